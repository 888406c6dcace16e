// Copyright 2026 The Bucketfeed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bucketfeed/pipeline.hpp"

#include <fmt/format.h>

#include "bucketfeed/errors.hpp"

namespace bucketfeed {

PartitionSampler::PartitionSampler(std::uint64_t num_samples, std::uint64_t nodes, std::uint64_t seed)
    : num_samples_(num_samples), nodes_(nodes), seed_(seed) {
  if (num_samples_ == 0) throw ConfigError("partitioning needs at least one sample");
  if (nodes_ == 0) throw ConfigError("partitioning needs at least one node");
}

std::vector<std::uint64_t> PartitionSampler::Partition(std::uint64_t epoch, std::uint64_t node_rank) const {
  if (node_rank >= nodes_) {
    throw ConfigError(fmt::format("node_rank {} out of range for {} nodes", node_rank, nodes_));
  }
  RandomStream rng = SeededRng(seed_, fmt::format("partition/epoch{}", epoch));
  const std::vector<std::uint64_t> permutation = rng.Permutation(num_samples_);
  const std::uint64_t size = partition_size();
  std::vector<std::uint64_t> partition;
  partition.reserve(size);
  for (std::uint64_t i = 0; i < size; ++i) {
    const std::uint64_t position = node_rank + i * nodes_;
    partition.push_back(permutation[position % num_samples_]);
  }
  return partition;
}

PrefetchingSampler::PrefetchingSampler(IndexSource& sub_sampler, std::uint64_t fetch_size,
                                       std::uint64_t prefetch_threshold, FetchRequester& requester)
    : sub_sampler_(sub_sampler),
      fetch_size_(fetch_size),
      prefetch_threshold_(prefetch_threshold),
      requester_(requester) {
  if (fetch_size_ == 0) throw ConfigError("fetch_size must be ≥ 1");
}

void PrefetchingSampler::Refill() {
  std::vector<std::uint64_t> request;
  request.reserve(fetch_size_);
  while (request.size() < fetch_size_) {
    const std::optional<std::uint64_t> next = sub_sampler_.Next();
    if (!next) {
      exhausted_ = true;
      break;
    }
    request.push_back(*next);
  }
  if (request.empty()) return;
  queue_.insert(queue_.end(), request.begin(), request.end());
  ++fetch_requests_;
  requester_.RequestFetch(std::move(request));
}

std::optional<std::uint64_t> PrefetchingSampler::NextIndex() {
  if (queue_.empty() && !exhausted_) Refill();
  if (queue_.empty()) return std::nullopt;
  const std::uint64_t index = queue_.front();
  queue_.pop_front();
  if (queue_.size() <= prefetch_threshold_ && !exhausted_) Refill();
  return index;
}

FetchJobResult ExecuteFetchJob(BackingStore& store, SessionId session, std::span<const std::uint64_t> indices,
                               const PrefetchOptions& options, bool list_bucket) {
  FetchJobResult result;
  if (indices.empty()) return result;
  if (list_bucket) {
    const ListingPass pass = ListAll(store, options.page_size);
    result.listing_pages = pass.pages;
    result.listing_time = pass.service_time;
  }
  std::vector<SampleKey> keys;
  keys.reserve(indices.size());
  for (const std::uint64_t index : indices) keys.push_back(SampleKey{session, index});
  try {
    FetchManyResult fetched = FetchMany(store, keys, options.workers);
    result.fetch_time = fetched.makespan;
    result.records = std::move(fetched.records);
  } catch (const NotFoundError& e) {
    result.error = e.what();
  }
  return result;
}

PrefetchService::PrefetchService(BackingStore& store, FifoCache& cache, SessionId session, PrefetchOptions options)
    : store_(store), cache_(cache), session_(session), options_(options) {}

PrefetchService::~PrefetchService() { Drain(); }

FetchAck PrefetchService::RequestFetch(std::vector<std::uint64_t> indices) {
  if (indices.empty()) return FetchAck{0, 0};
  std::lock_guard lock(mu_);
  const FetchAck ack{next_job_id_++, indices.size()};
  const bool list_bucket = !(options_.list_once && ack.job_id > 1);
  threads_.emplace_back([this, id = ack.job_id, list_bucket, indices = std::move(indices)]() mutable {
    Run(id, std::move(indices), list_bucket);
  });
  return ack;
}

void PrefetchService::Drain() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return completed_.size() + 1 == next_job_id_; });
}

std::vector<PrefetchJobReport> PrefetchService::completed_jobs() const {
  std::lock_guard lock(mu_);
  return completed_;
}

void PrefetchService::Run(std::uint64_t job_id, std::vector<std::uint64_t> indices, bool list_bucket) {
  PrefetchJobReport report{job_id, indices.size(), 0, 0, Duration::zero(), std::nullopt};
  if (list_bucket) {
    try {
      const ListingPass pass = ListAll(store_, options_.page_size);
      report.listing_pages = pass.pages;
      report.modeled_duration += pass.service_time;
    } catch (const std::exception& e) {
      report.error = fmt::format("listing failed: {}", e.what());
    }
  }
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return download_turn_ == job_id; });
  }
  if (!report.error) {
    std::vector<SampleKey> keys;
    keys.reserve(indices.size());
    for (const std::uint64_t index : indices) keys.push_back(SampleKey{session_, index});
    try {
      FetchManyResult fetched = FetchMany(store_, keys, options_.workers);
      report.modeled_duration += fetched.makespan;
      cache_.PutAll(fetched.records);
      report.inserted = fetched.records.size();
    } catch (const NotFoundError& e) {
      report.error = e.what();
    }
  }
  {
    std::lock_guard lock(mu_);
    ++download_turn_;
    completed_.push_back(std::move(report));
  }
  cv_.notify_all();
}

CachingDataset::CachingDataset(FifoCache* cache, BackingStore& store, SessionId session, DatasetOptions options)
    : cache_(cache), store_(store), session_(session), options_(options) {}

LoadResult CachingDataset::LoadSample(std::uint64_t index) {
  const SampleKey key{session_, index};
  if (cache_ != nullptr) {
    if (std::optional<SharedBytes> cached = cache_->Get(key)) {
      ++hits_;
      return LoadResult{std::move(*cached), options_.cache_latency, true};
    }
  }
  ++misses_;
  FetchedObject fetched = store_.GetObject(key);
  ++store_fetches_;
  if (cache_ != nullptr && options_.insert_on_worker_miss) cache_->Put(fetched.record);
  const Duration lookup = cache_ != nullptr ? options_.cache_latency : Duration::zero();
  return LoadResult{std::move(fetched.record.payload), lookup + fetched.service_time, false};
}

DataLoader::DataLoader(IndexSource& sampler, CachingDataset& dataset, Timeline& timeline, std::uint64_t batch_size)
    : sampler_(sampler), dataset_(dataset), timeline_(timeline), batch_size_(batch_size) {
  if (batch_size_ == 0) throw ConfigError("batch_size must be ≥ 1");
}

std::optional<Batch> DataLoader::NextBatch() {
  Batch batch;
  batch.indices.reserve(batch_size_);
  while (batch.indices.size() < batch_size_) {
    const std::optional<std::uint64_t> index = sampler_.Next();
    if (!index) break;
    batch.indices.push_back(*index);
  }
  if (batch.indices.empty()) return std::nullopt;
  batch.payloads.reserve(batch.indices.size());
  for (const std::uint64_t index : batch.indices) {
    LoadResult loaded = dataset_.LoadSample(index);
    timeline_.Advance(loaded.loading_time);
    batch.loading_time += loaded.loading_time;
    ++(loaded.hit ? batch.hits : batch.misses);
    batch.payloads.push_back(std::move(loaded.payload));
  }
  return batch;
}

}  // namespace bucketfeed
