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

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "bucketfeed/core.hpp"
#include "bucketfeed/store.hpp"

namespace bucketfeed {

/// Timing of every medium a simulated node touches.
struct LatencySettings {
  LatencyModel bucket;
  LatencyModel disk;
  // Charged per cache lookup, hit or miss.
  Duration cache_latency = Duration::zero();
  // Serve disk mode from a LocalDirStore here instead of a generated store.
  std::optional<std::filesystem::path> disk_dir;
};

/// Everything one experiment needs; echoed verbatim in every report.
struct EffectiveConfig {
  std::string workload = "default";
  ExperimentConfig experiment;
  DatasetSpec dataset;
  LatencySettings latency;
};

/// Built-in starting points: "default", "mnist" and "cifar10".
///
/// The two named workloads emulate the three-node CNN/MNIST and
/// ResNet-50/CIFAR-10 runs: dataset sizes, 512-sample batches, per-batch
/// compute derived from the measured two-epoch compute totals (14.7 s and
/// 147.2 s), and a bucket calibrated to the measured read throughput.
/// Throws ConfigError for unknown names.
EffectiveConfig WorkloadPreset(std::string_view name);
std::vector<std::string> WorkloadNames();

/// Per-batch compute that spreads `total` over every batch of an `epochs`-long
/// run on one node.
Duration ComputePerBatch(Duration total, const DatasetSpec& dataset, std::uint64_t nodes, std::uint64_t epochs,
                         std::uint64_t batch_size);

/// Flat key/value document. A "workload" key selects the preset the other keys
/// override. Unknown keys and ill-typed values throw ConfigError.
EffectiveConfig ConfigFromJson(const nlohmann::json& document);
nlohmann::json ConfigToJson(const EffectiveConfig& config);

/// Reads a JSON config file; throws ConfigError if unreadable or invalid.
EffectiveConfig LoadConfigFile(const std::filesystem::path& path);

/// Applies one `key=value` override using the same keys as the file format.
void ApplyOverride(EffectiveConfig& config, std::string_view assignment);
void ApplyOverride(EffectiveConfig& config, std::string_view key, std::string_view value);

/// Names accepted by ApplyOverride and the config file.
const std::vector<std::string>& ConfigKeys();

}  // namespace bucketfeed
