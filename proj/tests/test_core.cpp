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

#include <algorithm>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "bucketfeed/core.hpp"

namespace bucketfeed {
namespace {

ExperimentConfig FiftyFifty() {
  ExperimentConfig config;
  config.nodes = 3;
  config.epochs = 2;
  config.fetch_size = 1024;
  config.prefetch_threshold = 1024;
  config.cache_capacity = 2048;
  config.mode = Mode::kCachePrefetch;
  return config;
}

TEST(ValidateConfig, FiftyFiftyIsValid) {
  EXPECT_TRUE(ValidateConfig(FiftyFifty(), DatasetSpec{60000, 1000}).empty());
}

TEST(ValidateConfig, ThresholdAtCapacityIsRejected) {
  ExperimentConfig config = FiftyFifty();
  config.prefetch_threshold = 2048;
  EXPECT_EQ(ValidateConfig(config, DatasetSpec{}),
            std::vector<std::string>{"prefetch_threshold must be < cache_capacity"});
}

TEST(ValidateConfig, ZeroFetchSizeIsRejected) {
  ExperimentConfig config = FiftyFifty();
  config.fetch_size = 0;
  EXPECT_EQ(ValidateConfig(config, DatasetSpec{}), std::vector<std::string>{"fetch_size ≥ 1 required"});
}

TEST(ValidateConfig, FetchLargerThanPartitionIsRejected) {
  ExperimentConfig config = FiftyFifty();
  config.fetch_size = 20001;
  config.cache_capacity = kUnlimitedCapacity;
  ASSERT_EQ(ValidateConfig(config, DatasetSpec{60000, 1000}).size(), 1u);
}

TEST(ValidateConfig, IsPure) {
  ExperimentConfig config = FiftyFifty();
  config.fetch_size = 0;
  config.nodes = 0;
  EXPECT_EQ(ValidateConfig(config, DatasetSpec{}), ValidateConfig(config, DatasetSpec{}));
}

TEST(Mode, NamesRoundTrip) {
  for (Mode mode : {Mode::kBucketDirect, Mode::kCacheOnly, Mode::kCachePrefetch, Mode::kDisk}) {
    EXPECT_EQ(ParseMode(ToString(mode)), mode);
  }
  EXPECT_EQ(ParseMode("cache+prefetch"), Mode::kCachePrefetch);
  EXPECT_EQ(ParseMode("nope"), std::nullopt);
}

TEST(SeededRng, SameLabelSameStream) {
  EXPECT_EQ(SeededRng(42, "partition/epoch0").Permutation(1000), SeededRng(42, "partition/epoch0").Permutation(1000));
}

TEST(SeededRng, DifferentLabelsDiffer) {
  EXPECT_NE(SeededRng(42, "partition/epoch0").Permutation(1000), SeededRng(42, "partition/epoch1").Permutation(1000));
}

TEST(SeededRng, DifferentSeedsDiffer) {
  EXPECT_NE(SeededRng(42, "x").Next(), SeededRng(43, "x").Next());
}

TEST(SeededRng, PermutationIsAPermutation) {
  for (std::uint64_t n : {0u, 1u, 2u, 17u, 1000u}) {
    std::vector<std::uint64_t> p = SeededRng(n, "p").Permutation(n);
    std::sort(p.begin(), p.end());
    std::vector<std::uint64_t> expected(n);
    std::iota(expected.begin(), expected.end(), 0);
    EXPECT_EQ(p, expected);
  }
}

TEST(SeededRng, UniformBelowStaysInRangeAndCoversIt) {
  RandomStream rng = SeededRng(7, "u");
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t v = rng.UniformBelow(10);
    ASSERT_LT(v, 10u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 10u);
}

TEST(SeededRng, FirstPositionIsRoughlyUniform) {
  // Chi-square over where element 0 lands in 4000 shuffles of 8.
  std::vector<int> counts(8, 0);
  RandomStream rng = SeededRng(11, "chi");
  for (int i = 0; i < 4000; ++i) {
    const auto p = rng.Permutation(8);
    counts[std::find(p.begin(), p.end(), 0) - p.begin()]++;
  }
  double chi = 0.0;
  for (int c : counts) chi += (c - 500.0) * (c - 500.0) / 500.0;
  // 99.9th percentile of chi-square with 7 degrees of freedom.
  EXPECT_LT(chi, 24.32);
}

TEST(Duration, SecondsRoundTrip) {
  EXPECT_EQ(FromSeconds(0.035), std::chrono::milliseconds(35));
  EXPECT_DOUBLE_EQ(ToSeconds(std::chrono::milliseconds(1500)), 1.5);
}

TEST(CeilDiv, MatchesFloatingCeiling) {
  for (std::uint64_t a = 0; a < 200; ++a) {
    for (std::uint64_t b = 1; b < 20; ++b) {
      EXPECT_EQ(CeilDiv(a, b), static_cast<std::uint64_t>(std::ceil(static_cast<double>(a) / b)));
    }
  }
}

}  // namespace
}  // namespace bucketfeed
