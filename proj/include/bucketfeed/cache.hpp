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

#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "bucketfeed/core.hpp"

namespace bucketfeed {

struct CacheStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
  std::uint64_t occupancy = 0;

  std::uint64_t lookups() const { return hits + misses; }
  /// misses / lookups, or 0 when nothing was looked up.
  double miss_rate() const;

  friend bool operator==(const CacheStats&, const CacheStats&) = default;
};

/// Capacity-capped sample cache that evicts in insertion order.
///
/// A hit does not refresh an entry's position, and putting a key that is
/// already resident changes nothing. Capacity 0 disables the cache. Entries
/// survive ResetEpochStats(); only the counters restart.
///
/// Payloads are held in memory unless a spill directory is given, in which
/// case each resident payload lives in its own file there.
///
/// All operations are serialized by an internal mutex, so a training loop and a
/// pre-fetch inserter may share one instance.
class FifoCache {
 public:
  explicit FifoCache(std::uint64_t capacity);
  FifoCache(std::uint64_t capacity, std::filesystem::path spill_dir);
  ~FifoCache();

  FifoCache(const FifoCache&) = delete;
  FifoCache& operator=(const FifoCache&) = delete;

  /// Counts a hit or a miss.
  std::optional<SharedBytes> Get(const SampleKey& key);

  /// Returns the keys evicted to make room (at most one per new key).
  std::vector<SampleKey> Put(const SampleRecord& record);
  /// Inserts in order under a single lock.
  std::vector<SampleKey> PutAll(std::span<const SampleRecord> records);

  /// Residency check that does not touch the counters.
  bool Contains(const SampleKey& key) const;

  CacheStats Stats() const;
  /// Snapshot of the counters since the previous reset, then zero them.
  CacheStats ResetEpochStats();

  std::uint64_t capacity() const { return capacity_; }
  std::uint64_t size() const;

 private:
  void PutLocked(const SampleRecord& record, std::vector<SampleKey>& evicted);
  std::filesystem::path SpillPath(const SampleKey& key) const;

  const std::uint64_t capacity_;
  const std::optional<std::filesystem::path> spill_dir_;

  mutable std::mutex mu_;
  // Null payloads mark entries whose bytes are spilled to disk.
  std::unordered_map<SampleKey, SharedBytes> entries_;
  std::deque<SampleKey> order_;
  CacheStats stats_;
};

}  // namespace bucketfeed
