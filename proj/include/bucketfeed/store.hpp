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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bucketfeed/core.hpp"

namespace bucketfeed {

/// Service-time model of an object store or a local disk.
///
/// A single request costs `per_request_overhead + size / bandwidth`. When
/// several requests run at once the fixed overhead is inflated linearly with
/// the number of concurrent requests, which reproduces the sub-linear speedup
/// measured for parallel bucket reads:
///
///   service(size, k) = overhead * (1 + contention * (k - 1)) + size / bandwidth
///
/// CalibrateLatencyModel() derives `contention` from a measured parallel
/// throughput; 0 means requests scale perfectly.
struct LatencyModel {
  Duration per_request_overhead = Duration::zero();
  double bandwidth_bytes_per_sec = 1.0;
  Duration list_latency = Duration::zero();
  double contention = 0.0;

  /// Sequential service time of one object. Throws DomainError unless positive.
  Duration ServiceTime(std::uint64_t size_bytes) const { return ServiceTime(size_bytes, 1); }
  Duration ServiceTime(std::uint64_t size_bytes, std::uint64_t concurrency) const;

  /// Parallel throughput of `workers` readers over k times the sequential one.
  double ParallelEfficiency(std::uint64_t size_bytes, std::uint64_t workers) const;
};

/// Overhead/bandwidth split that hits a sequential and a parallel throughput.
struct ThroughputTargets {
  double sequential_bytes_per_sec = 49'800.0;
  double parallel_bytes_per_sec = 281'730.0;
  std::uint64_t parallel_workers = 16;
  // Share of the sequential per-object time spent in fixed request overhead.
  double overhead_fraction = 0.7;
};

LatencyModel CalibrateLatencyModel(std::uint64_t object_size_bytes, const ThroughputTargets& targets,
                                   Duration list_latency);

/// Bucket defaults: 49.80 kB/s sequential, 281.73 kB/s with 16 readers.
LatencyModel DefaultBucketModel(std::uint64_t object_size_bytes);
/// Disk default: 18.63 MB/s small-file reads, no contention.
LatencyModel DefaultDiskModel(std::uint64_t object_size_bytes);

/// Bytes per second achieved by fetching `objects` equal-sized objects with
/// `workers` parallel readers under `model`.
double EffectiveThroughput(const LatencyModel& model, std::uint64_t object_size_bytes, std::uint64_t objects,
                           std::uint64_t workers);

struct LedgerCounts {
  std::uint64_t class_a = 0;
  std::uint64_t class_b = 0;
  std::uint64_t bytes_fetched = 0;

  friend bool operator==(const LedgerCounts&, const LedgerCounts&) = default;
  LedgerCounts& operator+=(const LedgerCounts& other);
  friend LedgerCounts operator+(LedgerCounts a, const LedgerCounts& b) { return a += b; }
  friend LedgerCounts operator-(const LedgerCounts& a, const LedgerCounts& b);
};

/// Per-class API request accounting. Counters only grow.
class RequestLedger {
 public:
  void RecordListing() { class_a_.fetch_add(1, std::memory_order_relaxed); }
  void RecordGet(std::uint64_t bytes) {
    class_b_.fetch_add(1, std::memory_order_relaxed);
    bytes_.fetch_add(bytes, std::memory_order_relaxed);
  }
  LedgerCounts Snapshot() const {
    return {class_a_.load(std::memory_order_relaxed), class_b_.load(std::memory_order_relaxed),
            bytes_.load(std::memory_order_relaxed)};
  }

 private:
  std::atomic<std::uint64_t> class_a_{0};
  std::atomic<std::uint64_t> class_b_{0};
  std::atomic<std::uint64_t> bytes_{0};
};

struct FetchedObject {
  SampleRecord record;
  Duration service_time;
};

struct ListPageResult {
  std::vector<std::uint64_t> indices;
  std::optional<std::string> next_token;
  Duration service_time;
};

struct FetchManyResult {
  std::vector<SampleRecord> records;
  Duration makespan;
};

/// Object storage: single-object gets and paged listing, nothing bulk.
///
/// Service times are returned, never slept; callers own the clock.
class BackingStore {
 public:
  virtual ~BackingStore() = default;

  /// Throws NotFoundError for indices outside the dataset.
  virtual FetchedObject GetObject(const SampleKey& key) = 0;

  /// Enumerates object indices in order, `page_size` at a time. Throws
  /// ProtocolError for a token this store did not issue.
  virtual ListPageResult ListPage(const std::optional<std::string>& page_token, std::uint64_t page_size) = 0;

  virtual const LatencyModel& latency() const = 0;
  virtual LedgerCounts ledger() const = 0;
  virtual std::uint64_t num_objects() const = 0;
};

/// Fetches `keys` as repeated single gets spread over `workers` readers.
///
/// The makespan is that of a greedy schedule: each key goes to the earliest
/// free reader, and requests dispatched in the same wave of `workers` keys run
/// at that wave's concurrency. With uniform sizes and no contention this is
/// ceil(|keys| / workers) service times. A missing key discards the partial
/// result and rethrows NotFoundError naming the key.
FetchManyResult FetchMany(BackingStore& store, std::span<const SampleKey> keys, std::uint64_t workers);

/// Completion time of `service_times` scheduled greedily on `workers` readers.
Duration GreedyMakespan(std::span<const Duration> service_times, std::uint64_t workers);

/// Walks every listing page; returns the page count and summed service time.
struct ListingPass {
  std::uint64_t pages = 0;
  Duration service_time = Duration::zero();
};
ListingPass ListAll(BackingStore& store, std::uint64_t page_size);

/// Latency-modeled bucket whose objects are generated deterministically.
class SimulatedBucket final : public BackingStore {
 public:
  SimulatedBucket(DatasetSpec dataset, LatencyModel latency);

  FetchedObject GetObject(const SampleKey& key) override;
  ListPageResult ListPage(const std::optional<std::string>& page_token, std::uint64_t page_size) override;
  const LatencyModel& latency() const override { return latency_; }
  LedgerCounts ledger() const override { return ledger_.Snapshot(); }
  std::uint64_t num_objects() const override { return dataset_.num_samples; }

 private:
  DatasetSpec dataset_;
  LatencyModel latency_;
  RequestLedger ledger_;
};

/// Payload bytes of object `index` in generated datasets.
Bytes GeneratePayload(std::uint64_t index, std::uint64_t size_bytes);

/// Directory of `<index>` files (zero-padded) plus `manifest.json`.
///
/// Reads are real file reads; their modeled service time comes from the disk
/// latency model. A directory without a manifest is an empty store.
class LocalDirStore final : public BackingStore {
 public:
  explicit LocalDirStore(std::filesystem::path root);
  LocalDirStore(std::filesystem::path root, LatencyModel latency);

  FetchedObject GetObject(const SampleKey& key) override;
  ListPageResult ListPage(const std::optional<std::string>& page_token, std::uint64_t page_size) override;
  const LatencyModel& latency() const override { return latency_; }
  LedgerCounts ledger() const override { return ledger_.Snapshot(); }
  std::uint64_t num_objects() const override { return num_samples_; }

  std::filesystem::path ObjectPath(std::uint64_t index) const;

  static constexpr const char* kManifestName = "manifest.json";

 private:
  std::filesystem::path root_;
  std::uint64_t num_samples_ = 0;
  std::uint64_t object_size_bytes_ = 0;
  int index_width_ = 1;
  LatencyModel latency_;
  RequestLedger ledger_;
};

/// Materializes a generated dataset as a LocalDirStore layout.
void WriteLocalDataset(const std::filesystem::path& root, const DatasetSpec& dataset);

}  // namespace bucketfeed
