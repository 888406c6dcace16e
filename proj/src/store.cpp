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

#include "bucketfeed/store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <queue>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "bucketfeed/errors.hpp"

namespace bucketfeed {
namespace {

constexpr std::string_view kTokenPrefix = "page:";

std::string MakeToken(std::uint64_t next_index) { return fmt::format("{}{}", kTokenPrefix, next_index); }

std::uint64_t ParseToken(const std::string& token, std::uint64_t num_objects) {
  if (!token.starts_with(kTokenPrefix)) throw ProtocolError(fmt::format("malformed page token '{}'", token));
  const std::string_view digits = std::string_view(token).substr(kTokenPrefix.size());
  std::uint64_t value = 0;
  const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || end != digits.data() + digits.size() || digits.empty() || value == 0 ||
      value >= num_objects) {
    throw ProtocolError(fmt::format("invalid page token '{}'", token));
  }
  return value;
}

ListPageResult ListIndices(const std::optional<std::string>& page_token, std::uint64_t page_size,
                           std::uint64_t num_objects, const LatencyModel& latency, RequestLedger& ledger) {
  if (page_size < 1) throw DomainError("page_size must be ≥ 1");
  const std::uint64_t begin = page_token ? ParseToken(*page_token, num_objects) : 0;
  ledger.RecordListing();
  ListPageResult page;
  const std::uint64_t end = std::min(num_objects, begin + page_size);
  page.indices.reserve(end - begin);
  for (std::uint64_t i = begin; i < end; ++i) page.indices.push_back(i);
  if (end < num_objects) page.next_token = MakeToken(end);
  page.service_time = latency.list_latency;
  return page;
}

constexpr std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int DecimalWidth(std::uint64_t value) {
  int width = 1;
  while (value >= 10) {
    value /= 10;
    ++width;
  }
  return width;
}

}  // namespace

Duration LatencyModel::ServiceTime(std::uint64_t size_bytes, std::uint64_t concurrency) const {
  if (bandwidth_bytes_per_sec <= 0.0) throw DomainError("bandwidth must be positive");
  if (contention < 0.0) throw DomainError("contention must be ≥ 0");
  const double level = static_cast<double>(std::max<std::uint64_t>(concurrency, 1));
  const double overhead_ns = static_cast<double>(per_request_overhead.count()) * (1.0 + contention * (level - 1.0));
  const double transfer_ns = static_cast<double>(size_bytes) / bandwidth_bytes_per_sec * 1e9;
  const Duration total(static_cast<std::int64_t>(std::llround(overhead_ns + transfer_ns)));
  if (total <= Duration::zero()) throw DomainError("service time must be strictly positive");
  return total;
}

double LatencyModel::ParallelEfficiency(std::uint64_t size_bytes, std::uint64_t workers) const {
  const std::uint64_t k = std::max<std::uint64_t>(workers, 1);
  return static_cast<double>(ServiceTime(size_bytes, 1).count()) /
         static_cast<double>(ServiceTime(size_bytes, k).count());
}

LatencyModel CalibrateLatencyModel(std::uint64_t object_size_bytes, const ThroughputTargets& targets,
                                   Duration list_latency) {
  if (object_size_bytes == 0 || targets.sequential_bytes_per_sec <= 0.0 || targets.parallel_bytes_per_sec <= 0.0) {
    throw DomainError("calibration targets must be positive");
  }
  if (targets.overhead_fraction < 0.0 || targets.overhead_fraction >= 1.0) {
    throw DomainError("overhead_fraction must lie in [0, 1)");
  }
  const double size = static_cast<double>(object_size_bytes);
  const double sequential_s = size / targets.sequential_bytes_per_sec;
  const double overhead_s = targets.overhead_fraction * sequential_s;
  const double transfer_s = sequential_s - overhead_s;
  const double k = static_cast<double>(targets.parallel_workers);

  LatencyModel model;
  model.per_request_overhead = FromSeconds(overhead_s);
  model.bandwidth_bytes_per_sec = size / transfer_s;
  model.list_latency = list_latency;
  if (targets.parallel_workers <= 1 || overhead_s <= 0.0) return model;
  // One full wave of k requests must take k * size / parallel_rate:
  //   overhead * (1 + c (k - 1)) + transfer = k * size / parallel_rate
  const double wave_s = k * size / targets.parallel_bytes_per_sec;
  model.contention = std::max(0.0, (wave_s - transfer_s - overhead_s) / (overhead_s * (k - 1.0)));
  return model;
}

LatencyModel DefaultBucketModel(std::uint64_t object_size_bytes) {
  return CalibrateLatencyModel(object_size_bytes, ThroughputTargets{}, FromSeconds(0.010));
}

LatencyModel DefaultDiskModel(std::uint64_t object_size_bytes) {
  ThroughputTargets disk;
  disk.sequential_bytes_per_sec = 18.63e6;
  disk.parallel_bytes_per_sec = 18.63e6;
  disk.parallel_workers = 1;
  return CalibrateLatencyModel(object_size_bytes, disk, Duration::zero());
}

double EffectiveThroughput(const LatencyModel& model, std::uint64_t object_size_bytes, std::uint64_t objects,
                           std::uint64_t workers) {
  std::vector<Duration> times;
  times.reserve(objects);
  const std::uint64_t k = std::max<std::uint64_t>(workers, 1);
  for (std::uint64_t i = 0; i < objects; ++i) {
    const std::uint64_t wave_start = (i / k) * k;
    times.push_back(model.ServiceTime(object_size_bytes, std::min(k, objects - wave_start)));
  }
  const Duration makespan = GreedyMakespan(times, k);
  return static_cast<double>(objects * object_size_bytes) / ToSeconds(makespan);
}

LedgerCounts& LedgerCounts::operator+=(const LedgerCounts& other) {
  class_a += other.class_a;
  class_b += other.class_b;
  bytes_fetched += other.bytes_fetched;
  return *this;
}

LedgerCounts operator-(const LedgerCounts& a, const LedgerCounts& b) {
  return {a.class_a - b.class_a, a.class_b - b.class_b, a.bytes_fetched - b.bytes_fetched};
}

Duration GreedyMakespan(std::span<const Duration> service_times, std::uint64_t workers) {
  if (workers < 1) throw DomainError("workers must be ≥ 1");
  std::priority_queue<Duration, std::vector<Duration>, std::greater<>> free_at;
  for (std::uint64_t i = 0; i < std::min<std::uint64_t>(workers, service_times.size()); ++i) {
    free_at.push(Duration::zero());
  }
  Duration makespan = Duration::zero();
  for (const Duration t : service_times) {
    const Duration start = free_at.top();
    free_at.pop();
    const Duration finish = start + t;
    makespan = std::max(makespan, finish);
    free_at.push(finish);
  }
  return makespan;
}

FetchManyResult FetchMany(BackingStore& store, std::span<const SampleKey> keys, std::uint64_t workers) {
  if (workers < 1) throw DomainError("workers must be ≥ 1");
  if (keys.empty()) throw DomainError("fetch_many needs at least one key");
  FetchManyResult result;
  result.records.reserve(keys.size());
  std::vector<Duration> times;
  times.reserve(keys.size());
  const std::uint64_t n = keys.size();
  for (std::uint64_t i = 0; i < n; ++i) {
    FetchedObject fetched;
    try {
      fetched = store.GetObject(keys[i]);
    } catch (const NotFoundError& e) {
      throw NotFoundError(fmt::format("fetch_many aborted at index {}: {}", keys[i].index, e.what()));
    }
    const std::uint64_t wave_start = (i / workers) * workers;
    const std::uint64_t level = std::min(workers, n - wave_start);
    times.push_back(store.latency().ServiceTime(fetched.record.size_bytes(), level));
    result.records.push_back(std::move(fetched.record));
  }
  result.makespan = GreedyMakespan(times, workers);
  return result;
}

ListingPass ListAll(BackingStore& store, std::uint64_t page_size) {
  ListingPass pass;
  std::optional<std::string> token;
  do {
    ListPageResult page = store.ListPage(token, page_size);
    ++pass.pages;
    pass.service_time += page.service_time;
    token = std::move(page.next_token);
  } while (token);
  return pass;
}

Bytes GeneratePayload(std::uint64_t index, std::uint64_t size_bytes) {
  Bytes bytes(size_bytes);
  std::uint64_t state = SplitMix64(index);
  for (std::uint64_t i = 0; i < size_bytes; i += 8) {
    state = SplitMix64(state);
    for (std::uint64_t b = 0; b < 8 && i + b < size_bytes; ++b) {
      bytes[i + b] = static_cast<std::byte>((state >> (8 * b)) & 0xff);
    }
  }
  return bytes;
}

SimulatedBucket::SimulatedBucket(DatasetSpec dataset, LatencyModel latency)
    : dataset_(dataset), latency_(latency) {}

FetchedObject SimulatedBucket::GetObject(const SampleKey& key) {
  if (key.index >= dataset_.num_samples) {
    throw NotFoundError(fmt::format("object {} not in bucket of {} objects", key.index, dataset_.num_samples));
  }
  auto payload = std::make_shared<const Bytes>(GeneratePayload(key.index, dataset_.object_size_bytes));
  ledger_.RecordGet(payload->size());
  const Duration service = latency_.ServiceTime(payload->size());
  return {SampleRecord{key, std::move(payload)}, service};
}

ListPageResult SimulatedBucket::ListPage(const std::optional<std::string>& page_token, std::uint64_t page_size) {
  return ListIndices(page_token, page_size, dataset_.num_samples, latency_, ledger_);
}

LocalDirStore::LocalDirStore(std::filesystem::path root) : LocalDirStore(std::move(root), LatencyModel{}) {
  latency_ = DefaultDiskModel(std::max<std::uint64_t>(object_size_bytes_, 1));
}

LocalDirStore::LocalDirStore(std::filesystem::path root, LatencyModel latency)
    : root_(std::move(root)), latency_(latency) {
  const auto manifest_path = root_ / kManifestName;
  std::ifstream in(manifest_path);
  if (!in) return;
  const auto manifest = nlohmann::json::parse(in);
  num_samples_ = manifest.at("num_samples").get<std::uint64_t>();
  object_size_bytes_ = manifest.at("object_size_bytes").get<std::uint64_t>();
  index_width_ = manifest.value("index_width", DecimalWidth(num_samples_ == 0 ? 0 : num_samples_ - 1));
}

std::filesystem::path LocalDirStore::ObjectPath(std::uint64_t index) const {
  return root_ / fmt::format("{:0{}}", index, index_width_);
}

FetchedObject LocalDirStore::GetObject(const SampleKey& key) {
  if (key.index >= num_samples_) {
    throw NotFoundError(fmt::format("object {} not in directory {}", key.index, root_.string()));
  }
  const auto path = ObjectPath(key.index);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError(fmt::format("missing object file {}", path.string()));
  Bytes bytes;
  std::transform(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>(), std::back_inserter(bytes),
                 [](char c) { return static_cast<std::byte>(c); });
  ledger_.RecordGet(bytes.size());
  const Duration service = latency_.ServiceTime(bytes.size());
  return {SampleRecord{key, std::make_shared<const Bytes>(std::move(bytes))}, service};
}

ListPageResult LocalDirStore::ListPage(const std::optional<std::string>& page_token, std::uint64_t page_size) {
  return ListIndices(page_token, page_size, num_samples_, latency_, ledger_);
}

void WriteLocalDataset(const std::filesystem::path& root, const DatasetSpec& dataset) {
  std::filesystem::create_directories(root);
  const int width = DecimalWidth(dataset.num_samples == 0 ? 0 : dataset.num_samples - 1);
  for (std::uint64_t i = 0; i < dataset.num_samples; ++i) {
    const Bytes bytes = GeneratePayload(i, dataset.object_size_bytes);
    std::ofstream out(root / fmt::format("{:0{}}", i, width), std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  nlohmann::json manifest = {{"num_samples", dataset.num_samples},
                             {"object_size_bytes", dataset.object_size_bytes},
                             {"index_width", width}};
  std::ofstream(root / LocalDirStore::kManifestName) << manifest.dump(2) << '\n';
}

}  // namespace bucketfeed
