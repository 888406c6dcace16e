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

#include "bucketfeed/costmodel.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "bucketfeed/errors.hpp"

namespace bucketfeed {
namespace {

using nlohmann::json;

void RequireNonNegative(double value, std::string_view name) {
  if (!(value >= 0.0)) throw DomainError(fmt::format("{} must be ≥ 0, got {}", name, value));
}

void Validate(const CostInputs& in, const PricingRates& rates) {
  RequireNonNegative(in.system_gb, "system_gb");
  RequireNonNegative(in.dataset_gb, "dataset_gb");
  RequireNonNegative(in.compute_hours, "compute_hours");
  RequireNonNegative(in.loading_hours, "loading_hours");
  RequireNonNegative(rates.compute_per_hour, "compute_per_hour");
  RequireNonNegative(rates.disk_per_gb_month, "disk_per_gb_month");
  RequireNonNegative(rates.bucket_per_gb_month, "bucket_per_gb_month");
  RequireNonNegative(rates.class_a_per_request, "class_a_per_request");
  RequireNonNegative(rates.class_b_per_request, "class_b_per_request");
  if (in.page_size == 0) throw DomainError("page_size must be ≥ 1");
}

// n * c_c * (t_c + t_d): every node is billed for its compute and its waits.
double ComputeLoading(const CostInputs& in, const PricingRates& rates) {
  return static_cast<double>(in.nodes) * rates.compute_per_hour * (in.compute_hours + in.loading_hours);
}

double ApiDollars(const RequestCounts& requests, const PricingRates& rates) {
  return static_cast<double>(requests.class_a) * rates.class_a_per_request +
         static_cast<double>(requests.class_b) * rates.class_b_per_request;
}

// Bucket copy of the dataset plus, per node, the system disk and the cached
// share of the dataset.
double BucketStorage(const CostInputs& in, const PricingRates& rates) {
  const double cached_gb = in.dataset_gb / static_cast<double>(in.num_samples) * static_cast<double>(in.cached_samples);
  return (rates.bucket_per_gb_month * in.dataset_gb +
          static_cast<double>(in.nodes) * rates.disk_per_gb_month * (in.system_gb + cached_gb)) *
         in.BilledMonths();
}

MethodKind ParseMethodKind(const std::string& text) {
  if (text == "disk") return MethodKind::kDisk;
  if (text == "bucket") return MethodKind::kBucket;
  if (text == "prefetch") return MethodKind::kPrefetch;
  throw ConfigError(fmt::format("unknown method kind '{}' (expected disk, bucket or prefetch)", text));
}

ApiBasis ParseApiBasis(const std::string& text) {
  if (text == "ledger") return ApiBasis::kLedger;
  if (text == "formula") return ApiBasis::kFormula;
  if (text == "partition") return ApiBasis::kPartition;
  throw ConfigError(fmt::format("unknown api_basis '{}' (expected ledger, formula or partition)", text));
}

StorageBilling ParseBilling(const std::string& text) {
  if (text == "prorated") return StorageBilling::kProrated;
  if (text == "full-month") return StorageBilling::kFullMonth;
  throw ConfigError(fmt::format("unknown billing '{}' (expected prorated or full-month)", text));
}

double NumberAt(const json& object, std::string_view key) {
  const json& value = object.at(std::string(key));
  if (!value.is_number()) throw ConfigError(fmt::format("'{}' must be a number", key));
  return value.get<double>();
}

std::string OverrideText(const json& value) { return value.is_string() ? value.get<std::string>() : value.dump(); }

PricingRates RatesFromJson(const json& document) {
  if (!document.is_object()) throw ConfigError("'rates' must be an object");
  PricingRates rates;
  for (const auto& [key, value] : document.items()) {
    if (key == "compute_per_hour") {
      rates.compute_per_hour = NumberAt(document, key);
    } else if (key == "disk_per_gb_month") {
      rates.disk_per_gb_month = NumberAt(document, key);
    } else if (key == "bucket_per_gb_month") {
      rates.bucket_per_gb_month = NumberAt(document, key);
    } else if (key == "class_a_per_10k") {
      rates.class_a_per_request = NumberAt(document, key) / 10'000;
    } else if (key == "class_b_per_10k") {
      rates.class_b_per_request = NumberAt(document, key) / 10'000;
    } else {
      throw ConfigError(fmt::format("unknown rates key '{}'", key));
    }
  }
  return rates;
}

ScenarioMethod MethodFromJson(const json& document) {
  if (!document.is_object()) throw ConfigError("each method must be an object");
  ScenarioMethod method;
  bool has_kind = false;
  for (const auto& [key, value] : document.items()) {
    if (key == "name") {
      method.name = value.get<std::string>();
    } else if (key == "kind") {
      method.kind = ParseMethodKind(value.get<std::string>());
      has_kind = true;
    } else if (key == "config") {
      if (!value.is_object()) throw ConfigError("method 'config' must be an object");
      for (const auto& [k, v] : value.items()) method.overrides.emplace_back(k, OverrideText(v));
    } else if (key == "storage_usd") {
      method.storage_usd = NumberAt(document, key);
    } else if (key == "compute_hours") {
      method.compute_hours = NumberAt(document, key);
    } else if (key == "loading_hours") {
      method.loading_hours = NumberAt(document, key);
    } else {
      throw ConfigError(fmt::format("unknown method key '{}'", key));
    }
  }
  if (method.name.empty()) throw ConfigError("every method needs a name");
  if (!has_kind) throw ConfigError(fmt::format("method '{}' needs a kind", method.name));
  return method;
}

Mode ModeFor(MethodKind kind) {
  switch (kind) {
    case MethodKind::kDisk:
      return Mode::kDisk;
    case MethodKind::kBucket:
      return Mode::kBucketDirect;
    case MethodKind::kPrefetch:
      return Mode::kCachePrefetch;
  }
  return Mode::kCachePrefetch;
}

}  // namespace

double CostInputs::BilledMonths() const {
  if (billing == StorageBilling::kFullMonth) return 1.0;
  return (compute_hours + loading_hours) / kHoursPerMonth;
}

CostBreakdown CostDiskBaseline(const CostInputs& inputs, const PricingRates& rates) {
  Validate(inputs, rates);
  CostBreakdown cost;
  cost.storage = static_cast<double>(inputs.nodes) * rates.disk_per_gb_month * (inputs.dataset_gb + inputs.system_gb) *
                 inputs.BilledMonths();
  cost.compute_loading = ComputeLoading(inputs, rates);
  return cost;
}

CostBreakdown CostBucketBaseline(const CostInputs& inputs, const PricingRates& rates) {
  Validate(inputs, rates);
  if (inputs.num_samples == 0) throw DomainError("num_samples must be ≥ 1");
  if (inputs.cached_samples != 0) throw DomainError("the bucket baseline has no cache; cached_samples must be 0");
  CostBreakdown cost;
  cost.api = ApiDollars(PredictBucketRequests(inputs), rates);
  cost.storage = BucketStorage(inputs, rates);
  cost.compute_loading = ComputeLoading(inputs, rates);
  return cost;
}

CostBreakdown CostPrefetch(const CostInputs& inputs, const PricingRates& rates) {
  Validate(inputs, rates);
  if (inputs.num_samples == 0) throw DomainError("num_samples must be ≥ 1");
  if (inputs.fetch_size == 0) throw DomainError("fetch_size must be ≥ 1");
  CostBreakdown cost;
  cost.api = ApiDollars(PredictPrefetchRequests(inputs), rates);
  cost.storage = BucketStorage(inputs, rates);
  cost.compute_loading = ComputeLoading(inputs, rates);
  return cost;
}

RequestCounts PredictBucketRequests(const CostInputs& in) {
  if (in.page_size == 0) throw DomainError("page_size must be ≥ 1");
  return {in.epochs * in.nodes * CeilDiv(in.num_samples, in.page_size), in.epochs * in.num_samples};
}

RequestCounts PredictPrefetchRequests(const CostInputs& in) {
  if (in.fetch_size == 0) throw DomainError("fetch_size must be ≥ 1");
  RequestCounts counts = PredictBucketRequests(in);
  counts.class_a *= CeilDiv(in.num_samples, in.fetch_size);
  return counts;
}

RequestCounts PredictPrefetchRequestsPerPartition(const CostInputs& in) {
  if (in.fetch_size == 0) throw DomainError("fetch_size must be ≥ 1");
  if (in.nodes == 0) throw DomainError("nodes must be ≥ 1");
  RequestCounts counts = PredictBucketRequests(in);
  counts.class_a *= CeilDiv(CeilDiv(in.num_samples, in.nodes), in.fetch_size);
  return counts;
}

CostInputs CostInputsFor(const RunReport& report, double system_gb, StorageBilling billing) {
  const EffectiveConfig& c = report.config;
  CostInputs in;
  in.nodes = c.experiment.nodes;
  in.system_gb = system_gb;
  in.dataset_gb = static_cast<double>(c.dataset.total_bytes()) / 1e9;
  in.num_samples = c.dataset.num_samples;
  if (c.experiment.mode == Mode::kCacheOnly || c.experiment.mode == Mode::kCachePrefetch) {
    in.cached_samples = std::min(c.experiment.cache_capacity, c.dataset.num_samples);
  }
  in.page_size = c.experiment.page_size;
  in.epochs = c.experiment.epochs;
  in.fetch_size = c.experiment.fetch_size;
  if (!report.rows.empty()) {
    in.compute_hours = MeanComputeSeconds(report) / 3600.0;
    in.loading_hours = MeanLoadingSeconds(report) / 3600.0;
  }
  in.billing = billing;
  return in;
}

bool ReconcileReport::ok() const {
  for (const ReconcileLine& line : lines) {
    if (line.exact && !line.matches()) return false;
  }
  return true;
}

ReconcileReport Reconcile(const RunReport& report, const CostInputs& inputs) {
  const EffectiveConfig& c = report.config;
  const ExperimentConfig& e = c.experiment;
  if (inputs.nodes != e.nodes || inputs.num_samples != c.dataset.num_samples || inputs.page_size != e.page_size ||
      inputs.epochs != e.epochs || (e.mode == Mode::kCachePrefetch && inputs.fetch_size != e.fetch_size)) {
    throw ConfigError(fmt::format(
        "cost inputs (n={}, m={}, p={}, e={}, f={}) do not describe this run (n={}, m={}, p={}, e={}, f={})",
        inputs.nodes, inputs.num_samples, inputs.page_size, inputs.epochs, inputs.fetch_size, e.nodes,
        c.dataset.num_samples, e.page_size, e.epochs, e.fetch_size));
  }
  ReconcileReport result;
  result.mode = e.mode;
  // A run without rows simulated nothing, so every prediction is zero.
  CostInputs in = inputs;
  if (report.rows.empty()) in.epochs = 0;
  const std::uint64_t partition = CeilDiv(in.num_samples, in.nodes);
  const std::uint64_t pages = CeilDiv(in.num_samples, in.page_size);
  const std::uint64_t trials = report.rows.empty() ? 1 : report.trials();

  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    const LedgerCounts observed = report.rows.empty() ? LedgerCounts{} : TrialLedger(report, trial);
    const std::uint64_t worker_gets = report.rows.empty() ? 0 : TrialWorkerGets(report, trial);
    const std::uint64_t streamed = in.epochs * in.nodes * partition;
    auto add = [&](std::string component, std::uint64_t predicted, std::uint64_t seen, bool exact, std::string note) {
      result.lines.push_back(ReconcileLine{std::move(component), trial, predicted, seen, exact, std::move(note)});
    };
    switch (e.mode) {
      case Mode::kBucketDirect: {
        const RequestCounts formula = PredictBucketRequests(in);
        add("class_a", formula.class_a, observed.class_a, true, "one listing pass per node per epoch");
        add("class_b", formula.class_b, observed.class_b, in.num_samples % in.nodes == 0,
            in.num_samples % in.nodes == 0 ? "one get per sample per epoch"
                                           : "partitions pad m up to a multiple of n");
        add("class_b_padded", streamed, observed.class_b, true, "one get per partition slot per epoch");
        break;
      }
      case Mode::kCacheOnly: {
        const RequestCounts formula = PredictBucketRequests(in);
        add("class_a", formula.class_a, observed.class_a, true, "one listing pass per node per epoch");
        add("class_b_misses", worker_gets, observed.class_b, true, "every miss is one get");
        add("class_b_no_cache", streamed, observed.class_b, false, "gets saved by the cache");
        break;
      }
      case Mode::kCachePrefetch: {
        const RequestCounts global = PredictPrefetchRequests(in);
        const std::uint64_t fetches = in.epochs * in.nodes * CeilDiv(partition, in.fetch_size);
        const std::uint64_t per_partition =
            e.list_once_per_node ? (in.epochs > 0 ? in.nodes * pages : 0) : fetches * pages;
        add("class_a_per_partition", per_partition, observed.class_a, true,
            e.list_once_per_node ? "one listing pass per node" : "one listing pass per fetch of a node's partition");
        add("class_a_global", global.class_a, observed.class_a, false,
            "fetch count taken over the whole dataset instead of a partition");
        add("class_b_fetched_plus_fallback", streamed + worker_gets, observed.class_b, true,
            "pre-fetched samples plus training-loop misses");
        add("class_b_formula", global.class_b, observed.class_b, false, "misses are fetched twice");
        break;
      }
      case Mode::kDisk:
        add("class_a", 0, observed.class_a, true, "disk reads need no listing");
        add("disk_reads", streamed, observed.class_b, true, "local reads, not billed");
        break;
    }
  }
  return result;
}

std::string FormatMoney(double dollars) {
  const double sign = dollars < 0 ? -1.0 : 1.0;
  const double rounded = sign * std::floor(std::fabs(dollars) * 1e4 + 0.5) / 1e4;
  return fmt::format("{:.4f}", rounded == 0.0 ? 0.0 : rounded);
}

std::string_view ToString(MethodKind kind) {
  switch (kind) {
    case MethodKind::kDisk:
      return "disk";
    case MethodKind::kBucket:
      return "bucket";
    case MethodKind::kPrefetch:
      return "prefetch";
  }
  return "unknown";
}

std::string_view ToString(ApiBasis basis) {
  switch (basis) {
    case ApiBasis::kLedger:
      return "ledger";
    case ApiBasis::kFormula:
      return "formula";
    case ApiBasis::kPartition:
      return "partition";
  }
  return "unknown";
}

CostScenario CostScenarioFromJson(const json& document) {
  if (!document.is_object()) throw ConfigError("cost scenario must be a JSON object");
  CostScenario scenario;
  json config = json::object();
  for (const auto& [key, value] : document.items()) {
    try {
      if (key == "name") {
        scenario.name = value.get<std::string>();
      } else if (key == "workload") {
        config["workload"] = value;
      } else if (key == "config") {
        if (!value.is_object()) throw ConfigError("'config' must be an object");
        for (const auto& [k, v] : value.items()) config[k] = v;
      } else if (key == "rates") {
        scenario.rates = RatesFromJson(value);
      } else if (key == "system_gb") {
        scenario.system_gb = NumberAt(document, key);
      } else if (key == "billing") {
        scenario.billing = ParseBilling(value.get<std::string>());
      } else if (key == "api_basis") {
        scenario.api_basis = ParseApiBasis(value.get<std::string>());
      } else if (key == "methods") {
        if (!value.is_array()) throw ConfigError("'methods' must be a list");
        for (const json& m : value) scenario.methods.push_back(MethodFromJson(m));
      } else {
        throw ConfigError(fmt::format("unknown cost scenario key '{}'", key));
      }
    } catch (const json::type_error& e) {
      throw ConfigError(fmt::format("cost scenario key '{}' has the wrong type: {}", key, e.what()));
    }
  }
  if (config.contains("workload") && config.size() > 1) {
    // The workload preset goes first so the remaining keys override it.
    json ordered = {{"workload", config["workload"]}};
    for (const auto& [k, v] : config.items()) ordered[k] = v;
    config = ordered;
  }
  scenario.base = ConfigFromJson(config);
  if (scenario.methods.empty()) throw ConfigError("cost scenario lists no methods");
  return scenario;
}

CostScenario LoadCostScenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read cost scenario {}", path.string()));
  json document;
  try {
    document = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("cost scenario {} is not valid JSON: {}", path.string(), e.what()));
  }
  return CostScenarioFromJson(document);
}

std::vector<ScenarioRow> EvaluateScenario(const CostScenario& scenario) {
  std::vector<ScenarioRow> rows;
  for (const ScenarioMethod& method : scenario.methods) {
    EffectiveConfig config = scenario.base;
    config.experiment.mode = ModeFor(method.kind);
    for (const auto& [key, value] : method.overrides) ApplyOverride(config, key, value);
    if (config.experiment.mode != ModeFor(method.kind)) {
      throw ConfigError(fmt::format("method '{}' of kind {} cannot run in mode {}", method.name,
                                    ToString(method.kind), ToString(config.experiment.mode)));
    }
    const RunReport report = RunExperiment(config);
    ScenarioRow row;
    row.method = method.name;
    row.kind = method.kind;
    row.inputs = CostInputsFor(report, scenario.system_gb, scenario.billing);
    if (method.compute_hours) row.inputs.compute_hours = *method.compute_hours;
    if (method.loading_hours) row.inputs.loading_hours = *method.loading_hours;

    switch (method.kind) {
      case MethodKind::kDisk:
        row.cost = CostDiskBaseline(row.inputs, scenario.rates);
        break;
      case MethodKind::kBucket:
        row.cost = CostBucketBaseline(row.inputs, scenario.rates);
        row.requests = PredictBucketRequests(row.inputs);
        break;
      case MethodKind::kPrefetch:
        row.cost = CostPrefetch(row.inputs, scenario.rates);
        row.requests = PredictPrefetchRequests(row.inputs);
        break;
    }
    if (method.kind != MethodKind::kDisk) {
      if (scenario.api_basis == ApiBasis::kLedger) {
        double a = 0.0;
        double b = 0.0;
        for (std::uint64_t t = 0; t < report.trials(); ++t) {
          const LedgerCounts ledger = TrialLedger(report, t);
          a += static_cast<double>(ledger.class_a);
          b += static_cast<double>(ledger.class_b);
        }
        a /= static_cast<double>(report.trials());
        b /= static_cast<double>(report.trials());
        row.requests = {static_cast<std::uint64_t>(std::llround(a)), static_cast<std::uint64_t>(std::llround(b))};
        row.cost.api = a * scenario.rates.class_a_per_request + b * scenario.rates.class_b_per_request;
      } else if (scenario.api_basis == ApiBasis::kPartition && method.kind == MethodKind::kPrefetch) {
        row.requests = PredictPrefetchRequestsPerPartition(row.inputs);
        row.cost.api = ApiDollars(row.requests, scenario.rates);
      }
    }
    if (method.storage_usd) {
      row.cost.storage = *method.storage_usd;
      row.storage_pinned = true;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace bucketfeed
