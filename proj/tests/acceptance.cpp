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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are the constants below.

#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>

#include "bucketfeed/config.hpp"
#include "bucketfeed/costmodel.hpp"
#include "bucketfeed/simharness.hpp"

namespace bucketfeed {
namespace {

constexpr double kUnlimitedMissTarget = 0.66;
constexpr double kUnlimitedMissTolerance = 0.02;
constexpr double kCappedFraction = 0.75;
constexpr double kCappedMissFloor = 0.85;
constexpr double kOracleAgreement = 0.03;
constexpr std::uint64_t kFetchSweepFirst = 256;
constexpr std::uint64_t kFetchSweepLast = 4096;
constexpr std::uint64_t kFetchSweepStep = 256;
constexpr std::uint64_t kSweepSeeds = 3;
constexpr double kSaturationTolerance = 0.02;
constexpr double kThresholdReductionFloor = 0.50;
constexpr double kFiftyFiftyReductionFloor = 0.50;
constexpr double kLoadingReductionFloor = 0.80;
constexpr double kLinearityFloor = 0.99;
constexpr double kCostTolerance = 0.05;
constexpr std::uint64_t kTrials = 3;

struct Outcome {
  bool pass;
  std::string detail;
};

// Every simulated config, so determinism can replay them all.
std::vector<RunReport>& Recorded() {
  static std::vector<RunReport> reports;
  return reports;
}

RunReport Run(const EffectiveConfig& config) {
  RunReport report = RunExperiment(config);
  Recorded().push_back(report);
  return report;
}

EffectiveConfig Workload(const std::string& name, Mode mode) {
  EffectiveConfig config = WorkloadPreset(name);
  config.experiment.trials = kTrials;
  config.experiment.mode = mode;
  return config;
}

double Reduction(double before, double after) { return before > 0 ? (before - after) / before : 0.0; }

Outcome UnlimitedCacheMissRate() {
  EffectiveConfig config = Workload("mnist", Mode::kCacheOnly);
  config.experiment.cache_capacity = kUnlimitedCapacity;
  const double miss = MeanMissRate(Run(config), 2);
  const double analytic = 1.0 - 1.0 / static_cast<double>(config.experiment.nodes);
  return {std::fabs(miss - kUnlimitedMissTarget) <= kUnlimitedMissTolerance,
          fmt::format("epoch-2 miss {:.4f}, target {:.2f} ± {:.2f}, analytic 1 - 1/n = {:.4f}", miss,
                      kUnlimitedMissTarget, kUnlimitedMissTolerance, analytic)};
}

// Independent model of FIFO residency across two random repartitions: node
// rank 0 reads its epoch-1 partition into a capped FIFO, then looks up its
// epoch-2 partition, inserting every miss.
double FifoOracleMissRate(std::uint64_t m, std::uint64_t n, std::uint64_t capacity, int rounds) {
  std::mt19937_64 engine(20260101);
  std::vector<std::uint64_t> permutation(m);
  const std::uint64_t partition = m / n;
  double total = 0.0;
  for (int round = 0; round < rounds; ++round) {
    std::deque<std::uint64_t> order;
    std::unordered_set<std::uint64_t> resident;
    auto insert = [&](std::uint64_t key) {
      if (resident.count(key)) return;
      if (order.size() == capacity) {
        resident.erase(order.front());
        order.pop_front();
      }
      order.push_back(key);
      resident.insert(key);
    };
    std::uint64_t misses = 0;
    for (int epoch = 1; epoch <= 2; ++epoch) {
      for (std::uint64_t i = 0; i < m; ++i) permutation[i] = i;
      std::shuffle(permutation.begin(), permutation.end(), engine);
      for (std::uint64_t i = 0; i < partition; ++i) {
        const std::uint64_t key = permutation[i * n];
        if (epoch == 2 && !resident.count(key)) ++misses;
        insert(key);
      }
    }
    total += static_cast<double>(misses) / static_cast<double>(partition);
  }
  return total / rounds;
}

Outcome ConstrainedCacheMissRate() {
  EffectiveConfig config = Workload("mnist", Mode::kCacheOnly);
  const std::uint64_t partition = PartitionSize(config.experiment, config.dataset);
  config.experiment.cache_capacity = static_cast<std::uint64_t>(kCappedFraction * static_cast<double>(partition));
  const double miss = MeanMissRate(Run(config), 2);
  const double oracle = FifoOracleMissRate(config.dataset.num_samples, config.experiment.nodes,
                                           config.experiment.cache_capacity, 20);
  return {miss >= kCappedMissFloor && std::fabs(miss - oracle) <= kOracleAgreement,
          fmt::format("cache {} of {}: epoch-2 miss {:.4f} (floor {:.2f}), Monte-Carlo FIFO oracle {:.4f} "
                      "(agreement {:.3f}, allowed {:.2f})",
                      config.experiment.cache_capacity, partition, miss, kCappedMissFloor, oracle,
                      std::fabs(miss - oracle), kOracleAgreement)};
}

struct FetchSweep {
  std::string workload;
  std::uint64_t seed;
  std::vector<std::uint64_t> fetch_sizes;
  std::vector<double> miss;
  std::vector<RunReport> reports;
};

std::vector<FetchSweep>& FetchSweeps() {
  static std::vector<FetchSweep> sweeps;
  return sweeps;
}

Outcome FetchSizeMonotonicity() {
  std::vector<std::string> lines;
  std::size_t violations = 0;
  for (const std::string workload : {"mnist", "cifar10"}) {
    for (std::uint64_t seed = 1; seed <= kSweepSeeds; ++seed) {
      FetchSweep sweep{workload, seed, {}, {}, {}};
      for (std::uint64_t f = kFetchSweepFirst; f <= kFetchSweepLast; f += kFetchSweepStep) {
        EffectiveConfig config = Workload(workload, Mode::kCachePrefetch);
        config.experiment.cache_capacity = kUnlimitedCapacity;
        config.experiment.prefetch_threshold = 0;
        config.experiment.fetch_size = f;
        config.experiment.seed = seed;
        sweep.reports.push_back(Run(config));
        sweep.fetch_sizes.push_back(f);
        sweep.miss.push_back(MeanMissRate(sweep.reports.back()));
      }
      const std::vector<std::size_t> steps = IncreasingSteps(sweep.miss);
      violations += steps.size();
      std::string where;
      for (std::size_t i : steps) {
        where += fmt::format(" {}->{} (+{:.4f})", sweep.fetch_sizes[i], sweep.fetch_sizes[i + 1],
                             sweep.miss[i + 1] - sweep.miss[i]);
      }
      lines.push_back(fmt::format("{} seed {}: miss {:.4f} at f={} to {:.4f} at f={}, {} rises{}", workload, seed,
                                  sweep.miss.front(), kFetchSweepFirst, sweep.miss.back(), kFetchSweepLast,
                                  steps.size(), where));
      FetchSweeps().push_back(std::move(sweep));
    }
  }
  std::string detail = fmt::format("{} rises in total, 0 allowed", violations);
  for (const std::string& line : lines) detail += "\n    " + line;
  return {violations == 0, detail};
}

Outcome CacheSizeSaturation() {
  bool pass = true;
  std::string detail;
  for (const std::string workload : {"mnist", "cifar10"}) {
    std::vector<double> miss;
    for (std::uint64_t cache : {512u, 1024u, 2048u, 3072u}) {
      EffectiveConfig config = Workload(workload, Mode::kCachePrefetch);
      config.experiment.fetch_size = 1024;
      config.experiment.prefetch_threshold = 0;
      config.experiment.cache_capacity = cache;
      miss.push_back(MeanMissRate(Run(config)));
    }
    const double gap = std::fabs(miss[1] - miss[3]);
    pass = pass && gap <= kSaturationTolerance;
    detail += fmt::format("{}{}: miss at cache 512/1024/2048/3072 = {:.4f}/{:.4f}/{:.4f}/{:.4f}, "
                          "|1024 - 3072| = {:.4f} (allowed {:.2f})",
                          detail.empty() ? "" : "; ", workload, miss[0], miss[1], miss[2], miss[3], gap,
                          kSaturationTolerance);
  }
  return {pass, detail};
}

double PrefetchMiss(const std::string& workload, std::uint64_t fetch, std::uint64_t threshold) {
  EffectiveConfig config = Workload(workload, Mode::kCachePrefetch);
  config.experiment.cache_capacity = 2048;
  config.experiment.fetch_size = fetch;
  config.experiment.prefetch_threshold = threshold;
  return MeanMissRate(Run(config));
}

Outcome ThresholdBenefit() {
  const double long_off = PrefetchMiss("cifar10", 1024, 0);
  const double long_on = PrefetchMiss("cifar10", 1024, 1024);
  const double short_off = PrefetchMiss("mnist", 1024, 0);
  const double short_on = PrefetchMiss("mnist", 1024, 1024);
  const double long_cut = Reduction(long_off, long_on);
  const double short_cut = Reduction(short_off, short_on);
  return {long_cut >= kThresholdReductionFloor && short_cut > 0.0,
          fmt::format("long compute (cifar10) {:.4f} -> {:.4f}, reduction {:.1f}% (floor {:.0f}%); "
                      "short compute (mnist) {:.4f} -> {:.4f}, reduction {:.1f}% (must be > 0)",
                      long_off, long_on, 100 * long_cut, 100 * kThresholdReductionFloor, short_off, short_on,
                      100 * short_cut)};
}

Outcome FiftyFiftyVersusFullFetch() {
  const double full = PrefetchMiss("cifar10", 2048, 0);
  const double half = PrefetchMiss("cifar10", 1024, 1024);
  const double cut = Reduction(full, half);
  return {half <= full && cut >= kFiftyFiftyReductionFloor,
          fmt::format("cifar10 full fetch 2048 miss {:.4f}, 50/50 miss {:.4f}, reduction {:.1f}% (floor {:.0f}%)",
                      full, half, 100 * cut, 100 * kFiftyFiftyReductionFloor)};
}

Outcome LoadingTimeReduction() {
  bool pass = true;
  std::string detail;
  for (const std::string workload : {"mnist", "cifar10"}) {
    const double direct = MeanLoadingSeconds(Run(Workload(workload, Mode::kBucketDirect)));
    EffectiveConfig half = Workload(workload, Mode::kCachePrefetch);
    half.experiment.cache_capacity = 2048;
    half.experiment.fetch_size = 1024;
    half.experiment.prefetch_threshold = 1024;
    const double prefetch = MeanLoadingSeconds(Run(half));
    const double cut = Reduction(direct, prefetch);
    pass = pass && cut >= kLoadingReductionFloor;
    detail += fmt::format("{}{}: bucket-direct {:.1f} s, 50/50 {:.1f} s, reduction {:.1f}% (floor {:.0f}%)",
                          detail.empty() ? "" : "; ", workload, direct, prefetch, 100 * cut,
                          100 * kLoadingReductionFloor);
  }
  return {pass, detail};
}

Outcome Linearity() {
  bool pass = true;
  std::string detail;
  for (const FetchSweep& sweep : FetchSweeps()) {
    const RegressionResult fit = RegressLoadingTimeOnMissRate(sweep.reports);
    pass = pass && !fit.degenerate && fit.r_squared > kLinearityFloor;
    detail += fmt::format("{}{}/seed {}: r^2 {:.6f}", detail.empty() ? "" : "; ", sweep.workload, sweep.seed,
                          fit.r_squared);
  }
  return {pass && !FetchSweeps().empty(), detail + fmt::format(" (floor {:.2f})", kLinearityFloor)};
}

Outcome RequestReconciliation() {
  const EffectiveConfig direct = Workload("mnist", Mode::kBucketDirect);
  const RunReport direct_report = Run(direct);
  const std::uint64_t e = direct.experiment.epochs, n = direct.experiment.nodes, m = direct.dataset.num_samples,
                      p = direct.experiment.page_size;
  bool pass = true;
  std::string detail;
  for (std::uint64_t t = 0; t < direct_report.trials(); ++t) {
    const LedgerCounts ledger = TrialLedger(direct_report, t);
    pass = pass && ledger.class_b == e * m && ledger.class_a == e * n * CeilDiv(m, p);
  }
  const LedgerCounts first = TrialLedger(direct_report, 0);
  detail += fmt::format("bucket-direct class B {} (e*m = {}), class A {} (e*n*ceil(m/p) = {})", first.class_b,
                        e * m, first.class_a, e * n * CeilDiv(m, p));

  EffectiveConfig prefetch = Workload("mnist", Mode::kCachePrefetch);
  const RunReport prefetch_report = Run(prefetch);
  const CostInputs inputs = CostInputsFor(prefetch_report, 0.0, StorageBilling::kProrated);
  const ReconcileReport reconciled = Reconcile(prefetch_report, inputs);
  pass = pass && reconciled.ok();
  const std::uint64_t f = prefetch.experiment.fetch_size;
  const std::uint64_t partition = CeilDiv(m, n);
  for (const ReconcileLine& line : reconciled.lines) {
    if (line.trial != 0) continue;
    if (line.component == "class_a_per_partition") {
      detail += fmt::format("; prefetch class A {} (per partition {})", line.observed, line.predicted);
    }
    if (line.component == "class_a_global") {
      // The global-m formula counts ceil(m/f) fetches where a node makes
      // ceil(ceil(m/n)/f); rescaling the ledger by that ratio must land on it.
      const std::uint64_t rescaled = line.observed / CeilDiv(partition, f) * CeilDiv(m, f);
      const bool gap_explained = line.observed % CeilDiv(partition, f) == 0 && rescaled == line.predicted;
      pass = pass && gap_explained;
      detail += fmt::format("; global-m prediction {} = ledger x ceil(m/f)/ceil(ceil(m/n)/f) = {} x {}/{}", 
                            line.predicted, line.observed, CeilDiv(m, f), CeilDiv(partition, f));
    }
  }
  return {pass, detail};
}

std::filesystem::path ConfigPath(const char* name) {
  return std::filesystem::path(BUCKETFEED_SOURCE_DIR) / "configs" / name;
}

std::vector<std::vector<ScenarioRow>>& CostTables() {
  static std::vector<std::vector<ScenarioRow>> tables;
  return tables;
}

Outcome CostTable() {
  struct Target {
    const char* scenario;
    std::vector<double> totals;
    // Method positions from cheapest to dearest.
    std::vector<std::size_t> order;
  };
  // Methods in file order: disk, bucket, full-fetch-1024, full-fetch-2048, 50/50.
  const std::vector<Target> targets{
      {"cost_mnist.json", {2.05, 2.68, 2.17, 2.10, 2.12}, {0, 3, 4, 2, 1}},
      {"cost_cifar10.json", {2.23, 2.68, 2.25, 2.21, 2.17}, {4, 3, 0, 1}},
  };
  bool pass = true;
  std::string detail;
  for (const Target& target : targets) {
    const std::vector<ScenarioRow> rows = EvaluateScenario(LoadCostScenario(ConfigPath(target.scenario)));
    CostTables().push_back(rows);
    std::string line;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double total = rows[i].cost.total();
      const bool ok = std::fabs(total - target.totals[i]) <= kCostTolerance;
      pass = pass && ok;
      line += fmt::format(" {} {:.6f} vs {:.2f}{}", rows[i].method, total, target.totals[i], ok ? "" : " OUT");
    }
    bool ordered = true;
    std::string chain;
    for (std::size_t k = 0; k < target.order.size(); ++k) {
      const ScenarioRow& row = rows[target.order[k]];
      if (k > 0 && !(rows[target.order[k - 1]].cost.total() < row.cost.total())) ordered = false;
      chain += fmt::format("{}{}", k ? " < " : "", row.method);
    }
    pass = pass && ordered;
    detail += fmt::format("\n    {}:{}; order {} {}", target.scenario, line, chain, ordered ? "holds" : "BROKEN");
  }
  return {pass, fmt::format("totals within ± ${:.2f} and exact orderings{}", kCostTolerance, detail)};
}

Outcome Determinism() {
  const std::vector<RunReport> first = Recorded();
  std::size_t differing = 0;
  for (const RunReport& report : first) {
    const RunReport again = RunExperiment(report.config);
    if (again.rows != report.rows || ReportToJson(again).dump() != ReportToJson(report).dump()) ++differing;
  }
  std::size_t differing_tables = 0;
  const char* scenarios[] = {"cost_mnist.json", "cost_cifar10.json"};
  for (std::size_t i = 0; i < CostTables().size(); ++i) {
    const std::vector<ScenarioRow> again = EvaluateScenario(LoadCostScenario(ConfigPath(scenarios[i])));
    for (std::size_t j = 0; j < again.size(); ++j) {
      if (again[j].cost.total() != CostTables()[i][j].cost.total()) ++differing_tables;
    }
  }
  return {differing == 0 && differing_tables == 0 && !first.empty(),
          fmt::format("replayed {} runs and {} cost tables: {} runs and {} cost rows differ", first.size(),
                      CostTables().size(), differing, differing_tables)};
}

}  // namespace
}  // namespace bucketfeed

int main() {
  using namespace bucketfeed;
  struct Criterion {
    const char* name;
    Outcome (*check)();
  };
  const Criterion criteria[] = {
      {"unlimited-cache epoch-2 miss rate", UnlimitedCacheMissRate},
      {"constrained-cache degradation", ConstrainedCacheMissRate},
      {"fetch-size monotonicity", FetchSizeMonotonicity},
      {"cache-size saturation", CacheSizeSaturation},
      {"threshold benefit", ThresholdBenefit},
      {"50/50 versus full fetch", FiftyFiftyVersusFullFetch},
      {"loading-time reduction", LoadingTimeReduction},
      {"loading time linear in miss rate", Linearity},
      {"request-count reconciliation", RequestReconciliation},
      {"cost table reproduction", CostTable},
      {"determinism", Determinism},
  };
  int failed = 0;
  int number = 0;
  for (const Criterion& criterion : criteria) {
    ++number;
    Outcome outcome;
    try {
      outcome = criterion.check();
    } catch (const std::exception& e) {
      outcome = {false, fmt::format("threw: {}", e.what())};
    }
    if (!outcome.pass) ++failed;
    std::printf("%s criterion %d: %s: %s\n", outcome.pass ? "PASS" : "FAIL", number, criterion.name,
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", number - failed, number);
  return failed == 0 ? 0 : 1;
}
