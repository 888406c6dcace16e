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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bucketfeed {

/// Virtual and modeled time. Integer nanoseconds keep simulations bit-exact.
using Duration = std::chrono::nanoseconds;

Duration FromSeconds(double seconds);
double ToSeconds(Duration d);

constexpr std::uint64_t CeilDiv(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

/// Identifies one training run; cache entries from other sessions never hit.
struct SessionId {
  std::uint64_t value = 0;
  friend bool operator==(SessionId, SessionId) = default;
};

struct SampleKey {
  SessionId session;
  std::uint64_t index = 0;
  friend bool operator==(const SampleKey&, const SampleKey&) = default;
};

using Bytes = std::vector<std::byte>;
using SharedBytes = std::shared_ptr<const Bytes>;

struct SampleRecord {
  SampleKey key;
  SharedBytes payload;

  std::uint64_t size_bytes() const { return payload ? payload->size() : 0; }
};

/// Uniform-object-size dataset description.
struct DatasetSpec {
  std::uint64_t num_samples = 60000;
  std::uint64_t object_size_bytes = 1000;

  std::uint64_t total_bytes() const { return num_samples * object_size_bytes; }
};

/// The four experimental arms.
enum class Mode { kBucketDirect, kCacheOnly, kCachePrefetch, kDisk };

std::string_view ToString(Mode mode);
std::optional<Mode> ParseMode(std::string_view text);

/// Cache capacity that can never be reached by a dataset.
inline constexpr std::uint64_t kUnlimitedCapacity = std::numeric_limits<std::uint64_t>::max();

struct ExperimentConfig {
  std::uint64_t nodes = 3;
  std::uint64_t epochs = 2;
  std::uint64_t batch_size = 512;
  std::uint64_t fetch_size = 1024;
  // Fetched-but-untrained samples at or below which another fetch is issued.
  std::uint64_t prefetch_threshold = 0;
  // Samples; 0 disables caching, kUnlimitedCapacity never evicts.
  std::uint64_t cache_capacity = 2048;
  std::uint64_t parallel_fetch_workers = 16;
  std::uint64_t page_size = 1000;
  Duration compute_time_per_batch = Duration::zero();
  std::uint64_t trials = 3;
  std::uint64_t seed = 42;
  Mode mode = Mode::kCachePrefetch;
  // Pre-fetch jobs list the bucket once per node instead of once per request.
  bool list_once_per_node = false;
};

/// Indices each node trains on per epoch: ceil(m / n).
std::uint64_t PartitionSize(const ExperimentConfig& config, const DatasetSpec& dataset);

/// Every violated invariant as a human-readable message; empty means valid.
std::vector<std::string> ValidateConfig(const ExperimentConfig& config, const DatasetSpec& dataset);

/// Deterministic 64-bit random stream.
///
/// Draws are defined here rather than through std::uniform_int_distribution so
/// that a (seed, label) pair reproduces the same permutation on every standard
/// library.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t state) : engine_(state) {}

  std::uint64_t Next() { return engine_(); }

  /// Unbiased draw from [0, bound). bound must be positive.
  std::uint64_t UniformBelow(std::uint64_t bound);

  /// Uniform double in [0, 1).
  double Uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  template <typename T>
  void Shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(UniformBelow(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  /// A uniformly random permutation of [0, n).
  std::vector<std::uint64_t> Permutation(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

/// Labelled independent streams: identical (seed, label) pairs replay exactly.
RandomStream SeededRng(std::uint64_t seed, std::string_view stream_label);

}  // namespace bucketfeed

template <>
struct std::hash<bucketfeed::SampleKey> {
  std::size_t operator()(const bucketfeed::SampleKey& key) const noexcept {
    std::uint64_t h = key.session.value * 0x9e3779b97f4a7c15ULL;
    h ^= key.index + 0x7f4a7c159e3779b9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};
