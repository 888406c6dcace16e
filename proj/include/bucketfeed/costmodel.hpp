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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bucketfeed/config.hpp"
#include "bucketfeed/simharness.hpp"
#include "bucketfeed/store.hpp"

namespace bucketfeed {

inline constexpr double kHoursPerMonth = 730.0;

/// Prices in dollars. Request prices are per request, not per 10,000.
struct PricingRates {
  double compute_per_hour = 0.0;
  double disk_per_gb_month = 0.0;
  double bucket_per_gb_month = 0.0;
  double class_a_per_request = 0.05 / 10'000;
  double class_b_per_request = 0.002 / 10'000;
};

enum class StorageBilling {
  // Monthly rates scaled by run hours / 730.
  kProrated,
  kFullMonth,
};

struct CostInputs {
  std::uint64_t nodes = 0;
  // OS and dependencies on each VM disk.
  double system_gb = 0.0;
  double dataset_gb = 0.0;
  std::uint64_t num_samples = 0;
  // Samples held per node.
  std::uint64_t cached_samples = 0;
  std::uint64_t page_size = 1000;
  std::uint64_t epochs = 0;
  std::uint64_t fetch_size = 1;
  // Per node.
  double compute_hours = 0.0;
  double loading_hours = 0.0;
  StorageBilling billing = StorageBilling::kProrated;

  /// Months of storage charged.
  double BilledMonths() const;
};

struct CostBreakdown {
  double api = 0.0;
  double storage = 0.0;
  double compute_loading = 0.0;

  double total() const { return api + storage + compute_loading; }
};

/// Every node keeps the dataset on its own disk.
/// Throws DomainError for negative inputs or rates.
CostBreakdown CostDiskBaseline(const CostInputs& inputs, const PricingRates& rates);
/// Every sample comes from the bucket; requires cached_samples == 0 and
/// num_samples > 0.
CostBreakdown CostBucketBaseline(const CostInputs& inputs, const PricingRates& rates);
/// Cache plus pre-fetching: each fetch lists the whole bucket. Requires
/// fetch_size >= 1 and num_samples > 0.
CostBreakdown CostPrefetch(const CostInputs& inputs, const PricingRates& rates);

struct RequestCounts {
  std::uint64_t class_a = 0;
  std::uint64_t class_b = 0;

  friend bool operator==(const RequestCounts&, const RequestCounts&) = default;
};

/// e * n * ceil(m/p) listings and e * m gets.
RequestCounts PredictBucketRequests(const CostInputs& inputs);
/// Listing count multiplied by ceil(m/f) fetches over the whole dataset.
RequestCounts PredictPrefetchRequests(const CostInputs& inputs);
/// Listing count multiplied by the ceil(ceil(m/n)/f) fetches each node issues
/// over its own partition.
RequestCounts PredictPrefetchRequestsPerPartition(const CostInputs& inputs);

/// Cost inputs implied by a run: sizes from its dataset and per-node times
/// from its node-then-trial averages.
CostInputs CostInputsFor(const RunReport& report, double system_gb, StorageBilling billing);

struct ReconcileLine {
  std::string component;
  std::uint64_t trial = 0;
  std::uint64_t predicted = 0;
  std::uint64_t observed = 0;
  // Exact lines must agree; the others document a modeled gap.
  bool exact = true;
  std::string note;

  bool matches() const { return predicted == observed; }
  std::int64_t delta() const { return static_cast<std::int64_t>(observed) - static_cast<std::int64_t>(predicted); }
};

struct ReconcileReport {
  Mode mode = Mode::kBucketDirect;
  std::vector<ReconcileLine> lines;

  /// True when every exact line matches.
  bool ok() const;
};

/// Compares the request-count formulas with each trial's ledger. Throws
/// ConfigError if `inputs` describe a different run than `report`.
ReconcileReport Reconcile(const RunReport& report, const CostInputs& inputs);

/// Dollars with four decimals, rounded half up.
std::string FormatMoney(double dollars);

enum class MethodKind { kDisk, kBucket, kPrefetch };
enum class ApiBasis {
  // Requests counted in the simulation ledger.
  kLedger,
  // Listing term over the whole dataset.
  kFormula,
  // Listing term over each node's partition.
  kPartition,
};

struct ScenarioMethod {
  std::string name;
  MethodKind kind = MethodKind::kPrefetch;
  // Config overrides applied on top of the scenario's base config.
  std::vector<std::pair<std::string, std::string>> overrides;
  // Storage term fixed in dollars instead of computed from rates.
  std::optional<double> storage_usd;
  // Per-node times that replace the simulated ones.
  std::optional<double> compute_hours;
  std::optional<double> loading_hours;
};

struct CostScenario {
  std::string name;
  EffectiveConfig base;
  PricingRates rates;
  double system_gb = 0.0;
  StorageBilling billing = StorageBilling::kProrated;
  ApiBasis api_basis = ApiBasis::kLedger;
  std::vector<ScenarioMethod> methods;
};

struct ScenarioRow {
  std::string method;
  MethodKind kind = MethodKind::kDisk;
  CostInputs inputs;
  CostBreakdown cost;
  // Mean requests per trial, all nodes.
  RequestCounts requests;
  bool storage_pinned = false;
};

/// Scenario document: name, workload, config, rates, system_gb, billing,
/// api_basis and a methods list. Throws ConfigError on unknown keys.
CostScenario CostScenarioFromJson(const nlohmann::json& document);
CostScenario LoadCostScenario(const std::filesystem::path& path);

/// Simulates each method that needs measured times and prices it.
std::vector<ScenarioRow> EvaluateScenario(const CostScenario& scenario);

std::string_view ToString(MethodKind kind);
std::string_view ToString(ApiBasis basis);

}  // namespace bucketfeed
