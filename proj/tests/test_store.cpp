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
#include <filesystem>
#include <numeric>

#include <gtest/gtest.h>

#include "bucketfeed/errors.hpp"
#include "bucketfeed/store.hpp"

namespace bucketfeed {
namespace {

namespace fs = std::filesystem;

LatencyModel FlatModel(Duration overhead, double bandwidth) {
  LatencyModel model;
  model.per_request_overhead = overhead;
  model.bandwidth_bytes_per_sec = bandwidth;
  return model;
}

std::vector<SampleKey> Keys(std::uint64_t n) {
  std::vector<SampleKey> keys;
  for (std::uint64_t i = 0; i < n; ++i) keys.push_back({SessionId{1}, i});
  return keys;
}

TEST(LatencyModel, OverheadPlusTransfer) {
  // 1 KiB at 50 KiB/s is 20 ms on top of 15 ms overhead.
  const LatencyModel model = FlatModel(std::chrono::milliseconds(15), 50.0 * 1024);
  EXPECT_EQ(model.ServiceTime(1024), std::chrono::milliseconds(35));
}

TEST(LatencyModel, PureBandwidthTakesOneSecondPerBandwidth) {
  EXPECT_EQ(FlatModel(Duration::zero(), 4096).ServiceTime(4096), std::chrono::seconds(1));
}

TEST(LatencyModel, ContentionInflatesOverheadOnly) {
  LatencyModel model = FlatModel(std::chrono::milliseconds(10), 1000);
  model.contention = 0.5;
  // 10 ms * (1 + 0.5 * 3) + 1 s.
  EXPECT_EQ(model.ServiceTime(1000, 4), std::chrono::milliseconds(1025));
}

TEST(Calibration, ReproducesThroughputTargets) {
  const ThroughputTargets targets;
  const LatencyModel model = CalibrateLatencyModel(1000, targets, Duration::zero());
  EXPECT_NEAR(EffectiveThroughput(model, 1000, 16'000, 1), 49'800.0, 1.0);
  EXPECT_NEAR(EffectiveThroughput(model, 1000, 16'000, 16), 281'730.0, 1.0);
  // The overhead share is the configured 70% of the sequential object time.
  EXPECT_NEAR(ToSeconds(model.per_request_overhead) / (1000 / 49'800.0), 0.7, 1e-6);
}

TEST(Calibration, DiskDefaultMatchesSmallFileRate) {
  EXPECT_NEAR(EffectiveThroughput(DefaultDiskModel(1000), 1000, 1000, 1), 18.63e6, 18.63e6 * 1e-3);
}

TEST(SimulatedBucket, GetReturnsDeterministicPayloadAndCounts) {
  SimulatedBucket bucket(DatasetSpec{100, 64}, FlatModel(std::chrono::milliseconds(1), 1e6));
  const FetchedObject a = bucket.GetObject({SessionId{1}, 5});
  const FetchedObject b = bucket.GetObject({SessionId{1}, 5});
  EXPECT_EQ(*a.record.payload, *b.record.payload);
  EXPECT_EQ(*a.record.payload, GeneratePayload(5, 64));
  EXPECT_NE(GeneratePayload(5, 64), GeneratePayload(6, 64));
  EXPECT_EQ(bucket.ledger(), (LedgerCounts{0, 2, 128}));
}

TEST(SimulatedBucket, IndexPastEndIsNotFound) {
  SimulatedBucket bucket(DatasetSpec{100, 64}, FlatModel(std::chrono::milliseconds(1), 1e6));
  EXPECT_THROW(bucket.GetObject({SessionId{1}, 100}), NotFoundError);
}

TEST(SimulatedBucket, ListingPageCounts) {
  for (const auto& [m, pages] : std::vector<std::pair<std::uint64_t, std::uint64_t>>{{5000, 5}, {5001, 6}}) {
    SimulatedBucket bucket(DatasetSpec{m, 10}, FlatModel(std::chrono::milliseconds(1), 1e6));
    EXPECT_EQ(ListAll(bucket, 1000).pages, pages);
    EXPECT_EQ(bucket.ledger().class_a, pages);
  }
}

TEST(SimulatedBucket, ForeignTokenIsProtocolError) {
  SimulatedBucket bucket(DatasetSpec{10, 10}, FlatModel(std::chrono::milliseconds(1), 1e6));
  EXPECT_THROW(bucket.ListPage(std::string("bogus"), 3), ProtocolError);
}

TEST(SimulatedBucket, ListingIsCompleteForEveryPageSize) {
  // Property: concatenated pages are exactly [0, m) for random m and p.
  RandomStream rng = SeededRng(3, "listing");
  for (int round = 0; round < 50; ++round) {
    const std::uint64_t m = rng.UniformBelow(300);
    const std::uint64_t p = 1 + rng.UniformBelow(40);
    SimulatedBucket bucket(DatasetSpec{m, 8}, FlatModel(std::chrono::milliseconds(1), 1e6));
    std::vector<std::uint64_t> seen;
    std::optional<std::string> token;
    std::uint64_t pages = 0;
    do {
      ListPageResult page = bucket.ListPage(token, p);
      ASSERT_LE(page.indices.size(), p);
      seen.insert(seen.end(), page.indices.begin(), page.indices.end());
      token = page.next_token;
      ++pages;
    } while (token);
    std::vector<std::uint64_t> expected(m);
    std::iota(expected.begin(), expected.end(), 0);
    EXPECT_EQ(seen, expected);
    EXPECT_EQ(pages, std::max<std::uint64_t>(1, CeilDiv(m, p)));
  }
}

TEST(FetchMany, OneWaveThenTwo) {
  const LatencyModel model = FlatModel(std::chrono::milliseconds(10), 1e6);
  const Duration t = model.ServiceTime(100);
  SimulatedBucket bucket(DatasetSpec{100, 100}, model);
  const auto keys = Keys(17);
  EXPECT_EQ(FetchMany(bucket, std::span(keys).first(16), 16).makespan, t);
  EXPECT_EQ(FetchMany(bucket, keys, 16).makespan, 2 * t);
  EXPECT_EQ(bucket.ledger().class_b, 33u);
}

TEST(FetchMany, MissingKeyThrowsNotFound) {
  SimulatedBucket bucket(DatasetSpec{10, 10}, FlatModel(std::chrono::milliseconds(1), 1e6));
  auto keys = Keys(3);
  keys.push_back({SessionId{1}, 99});
  EXPECT_THROW(FetchMany(bucket, keys, 4), NotFoundError);
}

TEST(GreedyMakespan, WithinParallelBoundsAndMonotoneInWorkers) {
  // Property over random service-time lists.
  RandomStream rng = SeededRng(5, "makespan");
  for (int round = 0; round < 100; ++round) {
    std::vector<Duration> times(1 + rng.UniformBelow(60));
    for (Duration& d : times) d = std::chrono::microseconds(1 + rng.UniformBelow(5000));
    const Duration total = std::accumulate(times.begin(), times.end(), Duration::zero());
    Duration previous = Duration::max();
    for (std::uint64_t k = 1; k <= 20; ++k) {
      const Duration makespan = GreedyMakespan(times, k);
      EXPECT_GE(makespan * static_cast<long>(k), total);
      EXPECT_LE(makespan, total);
      EXPECT_GE(makespan, *std::max_element(times.begin(), times.end()));
      if (k == 1) EXPECT_EQ(makespan, total);
      EXPECT_LE(makespan, previous);
      previous = makespan;
    }
  }
}

TEST(FetchMany, ParallelMakespanBoundsWithContention) {
  const LatencyModel model = DefaultBucketModel(1000);
  SimulatedBucket bucket(DatasetSpec{200, 1000}, model);
  const auto keys = Keys(200);
  const Duration sequential = model.ServiceTime(1000) * 200;
  Duration previous = Duration::max();
  for (std::uint64_t k : {1u, 2u, 4u, 8u, 16u}) {
    const Duration makespan = FetchMany(bucket, keys, k).makespan;
    EXPECT_LE(makespan, sequential);
    EXPECT_LE(makespan, previous);
    previous = makespan;
  }
}

class LocalDirStoreTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("bucketfeed_store_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  fs::path root_;
};

TEST_F(LocalDirStoreTest, ReadsWrittenDataset) {
  WriteLocalDataset(root_, DatasetSpec{25, 1000});
  LocalDirStore store(root_);
  EXPECT_EQ(store.num_objects(), 25u);
  const FetchedObject first = store.GetObject({SessionId{1}, 7});
  const FetchedObject second = store.GetObject({SessionId{1}, 7});
  EXPECT_EQ(*first.record.payload, *second.record.payload);
  EXPECT_EQ(*first.record.payload, GeneratePayload(7, 1000));
  EXPECT_EQ(first.service_time, DefaultDiskModel(1000).ServiceTime(1000));
  EXPECT_EQ(ListAll(store, 10).pages, 3u);
}

TEST_F(LocalDirStoreTest, ModeledReadTimeMatchesDiskRate) {
  const DatasetSpec dataset{600, 1000};
  WriteLocalDataset(root_, dataset);
  LocalDirStore store(root_);
  Duration total = Duration::zero();
  for (std::uint64_t i = 0; i < dataset.num_samples; ++i) total += store.GetObject({SessionId{1}, i}).service_time;
  EXPECT_NEAR(ToSeconds(total), dataset.total_bytes() / 18.63e6, 1e-6);
}

TEST_F(LocalDirStoreTest, EmptyDirectoryHasNothing) {
  fs::create_directories(root_);
  LocalDirStore store(root_);
  EXPECT_THROW(store.GetObject({SessionId{1}, 0}), NotFoundError);
}

TEST_F(LocalDirStoreTest, MissingFileIsNotFound) {
  WriteLocalDataset(root_, DatasetSpec{5, 10});
  LocalDirStore store(root_);
  fs::remove(store.ObjectPath(3));
  EXPECT_THROW(store.GetObject({SessionId{1}, 3}), NotFoundError);
}

}  // namespace
}  // namespace bucketfeed
