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

#include "bucketfeed/cache.hpp"

#include <fstream>
#include <algorithm>
#include <iterator>

#include <fmt/format.h>

#include "bucketfeed/errors.hpp"

namespace bucketfeed {

double CacheStats::miss_rate() const {
  const std::uint64_t total = lookups();
  return total == 0 ? 0.0 : static_cast<double>(misses) / static_cast<double>(total);
}

FifoCache::FifoCache(std::uint64_t capacity) : capacity_(capacity) {}

FifoCache::FifoCache(std::uint64_t capacity, std::filesystem::path spill_dir)
    : capacity_(capacity), spill_dir_(std::move(spill_dir)) {
  std::filesystem::create_directories(*spill_dir_);
}

FifoCache::~FifoCache() {
  if (!spill_dir_) return;
  std::error_code ignored;
  for (const SampleKey& key : order_) std::filesystem::remove(SpillPath(key), ignored);
}

std::filesystem::path FifoCache::SpillPath(const SampleKey& key) const {
  return *spill_dir_ / fmt::format("{}-{}", key.session.value, key.index);
}

std::optional<SharedBytes> FifoCache::Get(const SampleKey& key) {
  std::lock_guard lock(mu_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) {
    ++stats_.misses;
    return std::nullopt;
  }
  ++stats_.hits;
  if (it->second) return it->second;
  std::ifstream in(SpillPath(key), std::ios::binary);
  if (!in) throw NotFoundError(fmt::format("spilled cache entry {} vanished", key.index));
  Bytes bytes;
  std::transform(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>(), std::back_inserter(bytes),
                 [](char c) { return static_cast<std::byte>(c); });
  return std::make_shared<const Bytes>(std::move(bytes));
}

std::vector<SampleKey> FifoCache::Put(const SampleRecord& record) {
  std::vector<SampleKey> evicted;
  std::lock_guard lock(mu_);
  PutLocked(record, evicted);
  return evicted;
}

std::vector<SampleKey> FifoCache::PutAll(std::span<const SampleRecord> records) {
  std::vector<SampleKey> evicted;
  std::lock_guard lock(mu_);
  for (const SampleRecord& record : records) PutLocked(record, evicted);
  return evicted;
}

void FifoCache::PutLocked(const SampleRecord& record, std::vector<SampleKey>& evicted) {
  if (capacity_ == 0 || entries_.contains(record.key)) return;
  if (order_.size() == capacity_) {
    const SampleKey oldest = order_.front();
    order_.pop_front();
    entries_.erase(oldest);
    if (spill_dir_) {
      std::error_code ignored;
      std::filesystem::remove(SpillPath(oldest), ignored);
    }
    ++stats_.evictions;
    evicted.push_back(oldest);
  }
  SharedBytes payload = record.payload;
  if (spill_dir_) {
    std::ofstream out(SpillPath(record.key), std::ios::binary | std::ios::trunc);
    if (record.payload) {
      out.write(reinterpret_cast<const char*>(record.payload->data()),
                static_cast<std::streamsize>(record.payload->size()));
    }
    payload = nullptr;
  }
  entries_.emplace(record.key, std::move(payload));
  order_.push_back(record.key);
  stats_.occupancy = order_.size();
}

bool FifoCache::Contains(const SampleKey& key) const {
  std::lock_guard lock(mu_);
  return entries_.contains(key);
}

CacheStats FifoCache::Stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

CacheStats FifoCache::ResetEpochStats() {
  std::lock_guard lock(mu_);
  const CacheStats snapshot = stats_;
  stats_ = CacheStats{};
  stats_.occupancy = order_.size();
  return snapshot;
}

std::uint64_t FifoCache::size() const {
  std::lock_guard lock(mu_);
  return order_.size();
}

}  // namespace bucketfeed
