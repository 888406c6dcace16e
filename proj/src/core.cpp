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

#include "bucketfeed/core.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace bucketfeed {
namespace {

constexpr std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t Fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Duration FromSeconds(double seconds) { return Duration(static_cast<std::int64_t>(std::llround(seconds * 1e9))); }

double ToSeconds(Duration d) { return static_cast<double>(d.count()) * 1e-9; }

std::string_view ToString(Mode mode) {
  switch (mode) {
    case Mode::kBucketDirect:
      return "bucket-direct";
    case Mode::kCacheOnly:
      return "cache-only";
    case Mode::kCachePrefetch:
      return "cache+prefetch";
    case Mode::kDisk:
      return "disk";
  }
  return "unknown";
}

std::optional<Mode> ParseMode(std::string_view text) {
  for (const Mode mode : {Mode::kBucketDirect, Mode::kCacheOnly, Mode::kCachePrefetch, Mode::kDisk}) {
    if (text == ToString(mode)) return mode;
  }
  return std::nullopt;
}

std::uint64_t PartitionSize(const ExperimentConfig& config, const DatasetSpec& dataset) {
  if (config.nodes == 0) return dataset.num_samples;
  return CeilDiv(dataset.num_samples, config.nodes);
}

std::vector<std::string> ValidateConfig(const ExperimentConfig& config, const DatasetSpec& dataset) {
  std::vector<std::string> violations;
  auto require_positive = [&](std::uint64_t value, std::string_view name) {
    if (value < 1) violations.push_back(fmt::format("{} ≥ 1 required", name));
  };
  require_positive(dataset.num_samples, "num_samples");
  require_positive(dataset.object_size_bytes, "object_size_bytes");
  require_positive(config.nodes, "nodes");
  require_positive(config.epochs, "epochs");
  require_positive(config.batch_size, "batch_size");
  require_positive(config.fetch_size, "fetch_size");
  require_positive(config.parallel_fetch_workers, "parallel_fetch_workers");
  require_positive(config.page_size, "page_size");
  require_positive(config.trials, "trials");
  if (config.compute_time_per_batch < Duration::zero()) {
    violations.emplace_back("compute_time_per_batch must be ≥ 0");
  }
  if (config.mode == Mode::kCachePrefetch && config.cache_capacity > 0 &&
      config.prefetch_threshold >= config.cache_capacity) {
    violations.emplace_back("prefetch_threshold must be < cache_capacity");
  }
  if (config.nodes >= 1 && dataset.num_samples >= 1) {
    const std::uint64_t partition = PartitionSize(config, dataset);
    if (config.fetch_size > partition) {
      violations.push_back(
          fmt::format("fetch_size must be ≤ per-node partition size ({} > {})", config.fetch_size, partition));
    }
  }
  return violations;
}

std::uint64_t RandomStream::UniformBelow(std::uint64_t bound) {
  // Lemire's multiply-shift with rejection of the biased low band.
  unsigned __int128 product = static_cast<unsigned __int128>(engine_()) * bound;
  auto low = static_cast<std::uint64_t>(product);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      product = static_cast<unsigned __int128>(engine_()) * bound;
      low = static_cast<std::uint64_t>(product);
    }
  }
  return static_cast<std::uint64_t>(product >> 64);
}

std::vector<std::uint64_t> RandomStream::Permutation(std::uint64_t n) {
  std::vector<std::uint64_t> values(n);
  std::iota(values.begin(), values.end(), std::uint64_t{0});
  Shuffle(std::span<std::uint64_t>(values));
  return values;
}

RandomStream SeededRng(std::uint64_t seed, std::string_view stream_label) {
  return RandomStream(SplitMix64(SplitMix64(seed) ^ Fnv1a64(stream_label)));
}

}  // namespace bucketfeed
