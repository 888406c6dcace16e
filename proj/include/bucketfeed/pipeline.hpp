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

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "bucketfeed/cache.hpp"
#include "bucketfeed/core.hpp"
#include "bucketfeed/store.hpp"

namespace bucketfeed {

/// Per-epoch random partitioning of [0, m) across n nodes.
///
/// Every node draws the same permutation for an epoch and takes positions
/// rank, rank + n, rank + 2n, ... When n does not divide m the permutation is
/// extended by wrapping around its start so every partition has ceil(m / n)
/// indices.
class PartitionSampler {
 public:
  PartitionSampler(std::uint64_t num_samples, std::uint64_t nodes, std::uint64_t seed);

  /// Throws ConfigError if node_rank >= nodes.
  std::vector<std::uint64_t> Partition(std::uint64_t epoch, std::uint64_t node_rank) const;

  std::uint64_t partition_size() const { return CeilDiv(num_samples_, nodes_); }

 private:
  std::uint64_t num_samples_;
  std::uint64_t nodes_;
  std::uint64_t seed_;
};

/// Any generator of sample indices; std::nullopt once exhausted.
class IndexSource {
 public:
  virtual ~IndexSource() = default;
  virtual std::optional<std::uint64_t> Next() = 0;
};

class VectorIndexSource final : public IndexSource {
 public:
  explicit VectorIndexSource(std::vector<std::uint64_t> indices) : indices_(std::move(indices)) {}

  std::optional<std::uint64_t> Next() override {
    if (position_ == indices_.size()) return std::nullopt;
    return indices_[position_++];
  }

 private:
  std::vector<std::uint64_t> indices_;
  std::size_t position_ = 0;
};

struct FetchAck {
  std::uint64_t job_id = 0;
  std::size_t count = 0;
};

/// Receiver of fetch requests. Implementations must return without waiting for
/// any store traffic.
class FetchRequester {
 public:
  virtual ~FetchRequester() = default;
  virtual FetchAck RequestFetch(std::vector<std::uint64_t> indices) = 0;
};

/// Wraps a sub-sampler with a queue of indices that were already sent to the
/// pre-fetch service.
///
/// Indices come out in exactly the sub-sampler's order. Whenever the queue
/// holds no more than `prefetch_threshold` indices and the sub-sampler has
/// more, the next min(fetch_size, remaining) indices are pulled into the queue
/// and requested as one fetch.
class PrefetchingSampler final : public IndexSource {
 public:
  PrefetchingSampler(IndexSource& sub_sampler, std::uint64_t fetch_size, std::uint64_t prefetch_threshold,
                     FetchRequester& requester);

  std::optional<std::uint64_t> Next() override { return NextIndex(); }
  std::optional<std::uint64_t> NextIndex();

  std::size_t queue_length() const { return queue_.size(); }
  std::uint64_t fetch_requests() const { return fetch_requests_; }

 private:
  void Refill();

  IndexSource& sub_sampler_;
  std::uint64_t fetch_size_;
  std::uint64_t prefetch_threshold_;
  FetchRequester& requester_;
  std::deque<std::uint64_t> queue_;
  bool exhausted_ = false;
  std::uint64_t fetch_requests_ = 0;
};

struct PrefetchOptions {
  std::uint64_t workers = 16;
  std::uint64_t page_size = 1000;
  // List the bucket before every job (the naive prototype) or only before the
  // first one.
  bool list_once = false;
};

struct FetchJobResult {
  std::vector<SampleRecord> records;
  std::uint64_t listing_pages = 0;
  Duration listing_time = Duration::zero();
  // Parallel fetch makespan.
  Duration fetch_time = Duration::zero();
  std::optional<std::string> error;
};

/// One pre-fetch job against `store`: optional full listing, then FetchMany.
/// A not-found index aborts the job and is reported through `error`.
FetchJobResult ExecuteFetchJob(BackingStore& store, SessionId session, std::span<const std::uint64_t> indices,
                               const PrefetchOptions& options, bool list_bucket);

struct PrefetchJobReport {
  std::uint64_t job_id = 0;
  std::size_t requested = 0;
  std::size_t inserted = 0;
  std::uint64_t listing_pages = 0;
  Duration modeled_duration = Duration::zero();
  std::optional<std::string> error;
};

/// Node-local pre-fetch service backed by threads.
///
/// RequestFetch() only enqueues and acknowledges. Every job gets its own thread
/// that lists the bucket right away; downloads then take turns on the node's
/// `options.workers` readers in request order. A job inserts its samples into
/// the cache all at once when its download finishes. Failed jobs are reported
/// and leave the cache untouched.
class PrefetchService final : public FetchRequester {
 public:
  PrefetchService(BackingStore& store, FifoCache& cache, SessionId session, PrefetchOptions options);
  ~PrefetchService() override;

  PrefetchService(const PrefetchService&) = delete;
  PrefetchService& operator=(const PrefetchService&) = delete;

  FetchAck RequestFetch(std::vector<std::uint64_t> indices) override;

  /// Blocks until every accepted job has finished.
  void Drain();

  /// Reports in completion order.
  std::vector<PrefetchJobReport> completed_jobs() const;

 private:
  void Run(std::uint64_t job_id, std::vector<std::uint64_t> indices, bool list_bucket);

  BackingStore& store_;
  FifoCache& cache_;
  SessionId session_;
  PrefetchOptions options_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t next_job_id_ = 1;
  // Job whose download may run next.
  std::uint64_t download_turn_ = 1;
  std::vector<PrefetchJobReport> completed_;
  std::vector<std::jthread> threads_;
};

struct DatasetOptions {
  // Worker-path misses also populate the cache (the cache-only arm).
  bool insert_on_worker_miss = false;
  // Charged to every cache lookup, hit or miss.
  Duration cache_latency = Duration::zero();
};

struct LoadResult {
  SharedBytes payload;
  Duration loading_time = Duration::zero();
  bool hit = false;
};

/// Cache-first sample lookup with store fallback.
///
/// Without a cache every load is a miss served by the store. Worker-path
/// misses are inserted only when `insert_on_worker_miss` is set; insert time is
/// never charged to loading time.
class CachingDataset {
 public:
  CachingDataset(FifoCache* cache, BackingStore& store, SessionId session, DatasetOptions options = {});

  /// Throws NotFoundError if the store lacks the sample.
  LoadResult LoadSample(std::uint64_t index);

  std::uint64_t hits() const { return hits_; }
  std::uint64_t misses() const { return misses_; }
  /// Store gets issued on the training path.
  std::uint64_t store_fetches() const { return store_fetches_; }

 private:
  FifoCache* cache_;
  BackingStore& store_;
  SessionId session_;
  DatasetOptions options_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
  std::uint64_t store_fetches_ = 0;
};

/// Source of "now" for the training loop. The simulator advances virtual time
/// here; real deployments can use a no-op.
class Timeline {
 public:
  virtual ~Timeline() = default;
  virtual Duration Now() const = 0;
  virtual void Advance(Duration elapsed) = 0;
};

/// Timeline that only accumulates the time it is told about.
class AccumulatingTimeline final : public Timeline {
 public:
  Duration Now() const override { return now_; }
  void Advance(Duration elapsed) override { now_ += elapsed; }

 private:
  Duration now_ = Duration::zero();
};

struct Batch {
  std::vector<std::uint64_t> indices;
  std::vector<SharedBytes> payloads;
  Duration loading_time = Duration::zero();
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
};

/// Mini-batch iteration: draws a batch of indices, then loads them one by one.
class DataLoader {
 public:
  DataLoader(IndexSource& sampler, CachingDataset& dataset, Timeline& timeline, std::uint64_t batch_size);

  /// The last batch may be short; std::nullopt once the sampler is exhausted.
  std::optional<Batch> NextBatch();

 private:
  IndexSource& sampler_;
  CachingDataset& dataset_;
  Timeline& timeline_;
  std::uint64_t batch_size_;
};

}  // namespace bucketfeed
