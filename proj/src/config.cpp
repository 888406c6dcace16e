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

#include "bucketfeed/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include <fmt/format.h>

#include "bucketfeed/errors.hpp"

namespace bucketfeed {
namespace {

using nlohmann::json;

// Calibration of the emulated workloads. Objects are ~1 kB so that one
// sequential bucket read takes ~20 ms at 49.80 kB/s. The listing, cache-hit
// and per-file disk times were fitted to the measured two-epoch loading times
// of both workloads; see README.md.
constexpr std::uint64_t kObjectSizeBytes = 1000;
constexpr double kListLatencySeconds = 0.008;

struct WorkloadCalibration {
  std::uint64_t num_samples;
  double total_compute_s;
  double cache_latency_s;
  double disk_file_time_s;
};

constexpr WorkloadCalibration kMnist{60000, 14.7, 0.0, 0.002475};
constexpr WorkloadCalibration kCifar10{50000, 147.2, 0.0025, 0.00513};

std::uint64_t AsCount(const json& value, std::string_view key) {
  if (value.is_number_unsigned()) return value.get<std::uint64_t>();
  if (value.is_number_integer() && value.get<std::int64_t>() >= 0) return value.get<std::uint64_t>();
  if (value.is_number_float()) {
    const double d = value.get<double>();
    if (d >= 0.0 && d == static_cast<double>(static_cast<std::uint64_t>(d))) return static_cast<std::uint64_t>(d);
  }
  throw ConfigError(fmt::format("'{}' must be a non-negative integer, got {}", key, value.dump()));
}

double AsNumber(const json& value, std::string_view key) {
  if (!value.is_number()) throw ConfigError(fmt::format("'{}' must be a number, got {}", key, value.dump()));
  return value.get<double>();
}

bool AsBool(const json& value, std::string_view key) {
  if (!value.is_boolean()) throw ConfigError(fmt::format("'{}' must be true or false, got {}", key, value.dump()));
  return value.get<bool>();
}

std::string AsString(const json& value, std::string_view key) {
  if (!value.is_string()) throw ConfigError(fmt::format("'{}' must be a string, got {}", key, value.dump()));
  return value.get<std::string>();
}

struct Field {
  std::function<void(EffectiveConfig&, const json&)> set;
  std::function<json(const EffectiveConfig&)> get;
};

template <typename Member>
Field CountField(Member member, std::string_view key) {
  return Field{[member, key](EffectiveConfig& c, const json& v) { std::invoke(member, c) = AsCount(v, key); },
               [member](const EffectiveConfig& c) { return json(std::invoke(member, c)); }};
}

template <typename Member>
Field SecondsField(Member member, std::string_view key) {
  return Field{
      [member, key](EffectiveConfig& c, const json& v) { std::invoke(member, c) = FromSeconds(AsNumber(v, key)); },
      [member](const EffectiveConfig& c) { return json(ToSeconds(std::invoke(member, c))); }};
}

template <typename Member>
Field NumberField(Member member, std::string_view key) {
  return Field{[member, key](EffectiveConfig& c, const json& v) { std::invoke(member, c) = AsNumber(v, key); },
               [member](const EffectiveConfig& c) { return json(std::invoke(member, c)); }};
}

const std::map<std::string, Field, std::less<>>& Fields() {
  static const auto* fields = new std::map<std::string, Field, std::less<>>{
      {"nodes", CountField([](auto& c) -> auto& { return c.experiment.nodes; }, "nodes")},
      {"epochs", CountField([](auto& c) -> auto& { return c.experiment.epochs; }, "epochs")},
      {"batch_size", CountField([](auto& c) -> auto& { return c.experiment.batch_size; }, "batch_size")},
      {"fetch_size", CountField([](auto& c) -> auto& { return c.experiment.fetch_size; }, "fetch_size")},
      {"prefetch_threshold",
       CountField([](auto& c) -> auto& { return c.experiment.prefetch_threshold; }, "prefetch_threshold")},
      {"cache_capacity",
       Field{[](EffectiveConfig& c, const json& v) {
               if (v.is_string() && v.get<std::string>() == "unlimited") {
                 c.experiment.cache_capacity = kUnlimitedCapacity;
               } else {
                 c.experiment.cache_capacity = AsCount(v, "cache_capacity");
               }
             },
             [](const EffectiveConfig& c) {
               return c.experiment.cache_capacity == kUnlimitedCapacity ? json("unlimited")
                                                                         : json(c.experiment.cache_capacity);
             }}},
      {"parallel_fetch_workers",
       CountField([](auto& c) -> auto& { return c.experiment.parallel_fetch_workers; },
                  "parallel_fetch_workers")},
      {"page_size", CountField([](auto& c) -> auto& { return c.experiment.page_size; }, "page_size")},
      {"compute_time_per_batch",
       SecondsField([](auto& c) -> auto& { return c.experiment.compute_time_per_batch; },
                    "compute_time_per_batch")},
      {"trials", CountField([](auto& c) -> auto& { return c.experiment.trials; }, "trials")},
      {"seed", CountField([](auto& c) -> auto& { return c.experiment.seed; }, "seed")},
      {"mode",
       Field{[](EffectiveConfig& c, const json& v) {
               const std::string text = AsString(v, "mode");
               const std::optional<Mode> mode = ParseMode(text);
               if (!mode) {
                 throw ConfigError(fmt::format(
                     "unknown mode '{}' (expected bucket-direct, cache-only, cache+prefetch or disk)", text));
               }
               c.experiment.mode = *mode;
             },
             [](const EffectiveConfig& c) { return json(std::string(ToString(c.experiment.mode))); }}},
      {"list_once_per_node",
       Field{[](EffectiveConfig& c, const json& v) { c.experiment.list_once_per_node = AsBool(v, "list_once_per_node"); },
             [](const EffectiveConfig& c) { return json(c.experiment.list_once_per_node); }}},
      {"num_samples", CountField([](auto& c) -> auto& { return c.dataset.num_samples; }, "num_samples")},
      {"object_size_bytes",
       CountField([](auto& c) -> auto& { return c.dataset.object_size_bytes; }, "object_size_bytes")},
      {"bucket_overhead_s",
       SecondsField([](auto& c) -> auto& { return c.latency.bucket.per_request_overhead; },
                    "bucket_overhead_s")},
      {"bucket_bandwidth_bytes_per_sec",
       NumberField([](auto& c) -> auto& { return c.latency.bucket.bandwidth_bytes_per_sec; },
                   "bucket_bandwidth_bytes_per_sec")},
      {"bucket_list_latency_s",
       SecondsField([](auto& c) -> auto& { return c.latency.bucket.list_latency; },
                    "bucket_list_latency_s")},
      {"bucket_contention",
       NumberField([](auto& c) -> auto& { return c.latency.bucket.contention; }, "bucket_contention")},
      {"disk_overhead_s",
       SecondsField([](auto& c) -> auto& { return c.latency.disk.per_request_overhead; },
                    "disk_overhead_s")},
      {"disk_bandwidth_bytes_per_sec",
       NumberField([](auto& c) -> auto& { return c.latency.disk.bandwidth_bytes_per_sec; },
                   "disk_bandwidth_bytes_per_sec")},
      {"cache_latency_s",
       SecondsField([](auto& c) -> auto& { return c.latency.cache_latency; }, "cache_latency_s")},
      {"disk_dir",
       Field{[](EffectiveConfig& c, const json& v) {
               if (v.is_null() || (v.is_string() && v.get<std::string>().empty())) {
                 c.latency.disk_dir.reset();
               } else {
                 c.latency.disk_dir = AsString(v, "disk_dir");
               }
             },
             [](const EffectiveConfig& c) {
               return c.latency.disk_dir ? json(c.latency.disk_dir->string()) : json(nullptr);
             }}},
  };
  return *fields;
}

}  // namespace

Duration ComputePerBatch(Duration total, const DatasetSpec& dataset, std::uint64_t nodes, std::uint64_t epochs,
                         std::uint64_t batch_size) {
  const std::uint64_t batches = CeilDiv(CeilDiv(dataset.num_samples, nodes), batch_size) * epochs;
  return total / static_cast<std::int64_t>(batches);
}

std::vector<std::string> WorkloadNames() { return {"default", "mnist", "cifar10"}; }

EffectiveConfig WorkloadPreset(std::string_view name) {
  EffectiveConfig config;
  config.workload = std::string(name);
  config.dataset = DatasetSpec{60000, kObjectSizeBytes};
  config.latency.bucket =
      CalibrateLatencyModel(kObjectSizeBytes, ThroughputTargets{}, FromSeconds(kListLatencySeconds));
  config.latency.disk = DefaultDiskModel(kObjectSizeBytes);
  if (name == "default") return config;

  WorkloadCalibration calibration;
  if (name == "mnist") {
    calibration = kMnist;
  } else if (name == "cifar10") {
    calibration = kCifar10;
  } else {
    throw ConfigError(fmt::format("unknown workload '{}'", name));
  }
  config.dataset.num_samples = calibration.num_samples;
  const Duration transfer = FromSeconds(static_cast<double>(kObjectSizeBytes) /
                                        config.latency.disk.bandwidth_bytes_per_sec);
  config.latency.disk.per_request_overhead = FromSeconds(calibration.disk_file_time_s) - transfer;
  ExperimentConfig& e = config.experiment;
  e.nodes = 3;
  e.epochs = 2;
  e.batch_size = 512;
  e.mode = Mode::kCachePrefetch;
  e.cache_capacity = 2048;
  e.fetch_size = 1024;
  e.prefetch_threshold = 1024;
  e.compute_time_per_batch =
      ComputePerBatch(FromSeconds(calibration.total_compute_s), config.dataset, e.nodes, e.epochs, e.batch_size);
  config.latency.cache_latency = FromSeconds(calibration.cache_latency_s);
  return config;
}

EffectiveConfig ConfigFromJson(const json& document) {
  if (!document.is_object()) throw ConfigError("config must be a flat JSON object");
  EffectiveConfig config = WorkloadPreset("default");
  if (const auto it = document.find("workload"); it != document.end()) {
    config = WorkloadPreset(AsString(*it, "workload"));
  }
  const auto& fields = Fields();
  for (const auto& [key, value] : document.items()) {
    if (key == "workload") continue;
    const auto field = fields.find(key);
    if (field == fields.end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
    field->second.set(config, value);
  }
  return config;
}

json ConfigToJson(const EffectiveConfig& config) {
  json document = json::object();
  document["workload"] = config.workload;
  for (const auto& [key, field] : Fields()) document[key] = field.get(config);
  return document;
}

EffectiveConfig LoadConfigFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
  json document;
  try {
    document = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config file {} is not valid JSON: {}", path.string(), e.what()));
  }
  return ConfigFromJson(document);
}

void ApplyOverride(EffectiveConfig& config, std::string_view key, std::string_view value) {
  json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) parsed = std::string(value);
  if (key == "workload") {
    config = WorkloadPreset(AsString(parsed, "workload"));
    return;
  }
  const auto& fields = Fields();
  const auto field = fields.find(key);
  if (field == fields.end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
  field->second.set(config, parsed);
}

void ApplyOverride(EffectiveConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(fmt::format("override '{}' is not of the form key=value", assignment));
  }
  ApplyOverride(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

const std::vector<std::string>& ConfigKeys() {
  static const auto* keys = [] {
    auto* k = new std::vector<std::string>{"workload"};
    for (const auto& [key, field] : Fields()) k->push_back(key);
    return k;
  }();
  return *keys;
}

}  // namespace bucketfeed
