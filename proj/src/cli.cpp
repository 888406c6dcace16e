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

#include "bucketfeed/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "bucketfeed/config.hpp"
#include "bucketfeed/costmodel.hpp"
#include "bucketfeed/errors.hpp"
#include "bucketfeed/simharness.hpp"
#include "bucketfeed/store.hpp"

namespace bucketfeed {
namespace {

namespace fs = std::filesystem;

// Flags shared by every simulating subcommand.
struct ConfigFlags {
  std::string config_path;
  std::string workload;
  std::string mode;
  std::optional<std::string> cache;
  std::optional<std::uint64_t> fetch;
  std::optional<std::uint64_t> threshold;
  std::vector<std::string> sets;
  std::string out_dir;
};

void AddConfigFlags(CLI::App& command, ConfigFlags& flags) {
  command.add_option("--config", flags.config_path, "JSON config file");
  command.add_option("--workload", flags.workload, "preset to start from when no --config is given");
  command.add_option("--mode", flags.mode, "bucket-direct, cache-only, cache+prefetch or disk");
  command.add_option("--cache", flags.cache, "cache capacity in samples, or 'unlimited'");
  command.add_option("--fetch", flags.fetch, "pre-fetch fetch size in samples");
  command.add_option("--threshold", flags.threshold, "pre-fetch threshold in samples");
  command.add_option("--set", flags.sets, "key=value override, repeatable")->type_name("KEY=VALUE");
  command.add_option("--out", flags.out_dir, "directory for report files");
}

// Finds `given` as is, then under the config directory named by the
// environment.
fs::path ResolvePath(const std::string& given) {
  const fs::path path(given);
  if (fs::exists(path) || path.is_absolute()) return path;
  if (const char* dir = std::getenv(kConfigDirEnv); dir != nullptr && *dir != '\0') {
    const fs::path candidate = fs::path(dir) / path;
    if (fs::exists(candidate)) return candidate;
  }
  return path;
}

EffectiveConfig BuildConfig(const ConfigFlags& flags) {
  if (!flags.config_path.empty() && !flags.workload.empty()) {
    throw ConfigError("--workload and --config are exclusive; put \"workload\" in the config file instead");
  }
  EffectiveConfig config = flags.config_path.empty()
                               ? WorkloadPreset(flags.workload.empty() ? "default" : flags.workload)
                               : LoadConfigFile(ResolvePath(flags.config_path));
  if (!flags.mode.empty()) ApplyOverride(config, "mode", flags.mode);
  if (flags.cache) ApplyOverride(config, "cache_capacity", *flags.cache);
  if (flags.fetch) config.experiment.fetch_size = *flags.fetch;
  if (flags.threshold) config.experiment.prefetch_threshold = *flags.threshold;
  for (const std::string& assignment : flags.sets) ApplyOverride(config, assignment);
  return config;
}

void EchoConfig(const EffectiveConfig& config, std::ostream& out) {
  fmt::print(out, "effective config: {}\n", ConfigToJson(config).dump());
}

void WriteFile(const fs::path& path, const std::string& contents) {
  std::ofstream file(path);
  file << contents;
  if (!file) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
}

void WriteReportFiles(const RunReport& report, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  std::ostringstream tsv;
  WriteTsv(report, tsv);
  WriteFile(dir / (stem + ".tsv"), tsv.str());
  WriteFile(dir / (stem + ".json"), ReportToJson(report).dump(2) + "\n");
}

void PrintSummary(const RunReport& report, std::ostream& out) {
  fmt::print(out, "averaging: mean over trials of mean over nodes; times are per node, summed over epochs\n");
  fmt::print(out, "{:<8}{:>16}{:>16}{:>12}\n", "epoch", "loading_time_s", "compute_time_s", "miss_rate");
  for (std::uint64_t epoch = 1; epoch <= report.epochs(); ++epoch) {
    fmt::print(out, "{:<8}{:>16.6f}{:>16.6f}{:>12.6f}\n", epoch, MeanLoadingSeconds(report, epoch),
               MeanComputeSeconds(report, epoch), MeanMissRate(report, epoch));
  }
  fmt::print(out, "{:<8}{:>16.6f}{:>16.6f}{:>12.6f}\n", "all", MeanLoadingSeconds(report),
             MeanComputeSeconds(report), MeanMissRate(report));
  LedgerCounts total;
  for (std::uint64_t t = 0; t < report.trials(); ++t) total = total + TrialLedger(report, t);
  fmt::print(out, "requests (all trials): class_a {} class_b {} bytes {}\n", total.class_a, total.class_b,
             total.bytes_fetched);
}

int CmdRun(const ConfigFlags& flags, std::ostream& out) {
  const EffectiveConfig config = BuildConfig(flags);
  EchoConfig(config, out);
  const RunReport report = RunExperiment(config);
  PrintSummary(report, out);
  if (!flags.out_dir.empty()) WriteReportFiles(report, flags.out_dir, "report");
  return kExitOk;
}

std::vector<std::string> SplitValues(const std::string& text) {
  std::vector<std::string> values;
  std::stringstream stream(text);
  for (std::string item; std::getline(stream, item, ',');) {
    if (!item.empty()) values.push_back(item);
  }
  return values;
}

int CmdSweep(const ConfigFlags& flags, const std::string& axis, const std::string& values_text,
             std::ostream& out) {
  const EffectiveConfig base = BuildConfig(flags);
  const std::vector<std::string> values = SplitValues(values_text);
  if (values.empty()) throw ConfigError("--values lists no values");
  EchoConfig(base, out);
  const std::vector<SweepPoint> points = RunSweep(base, axis, values);

  std::vector<double> miss;
  std::vector<double> loading;
  std::vector<RunReport> reports;
  std::ostringstream table;
  fmt::print(table, "{}\tloading_time_s\tcompute_time_s\tmiss_rate\tclass_a\tclass_b\n", axis);
  for (const SweepPoint& point : points) {
    const RunReport& report = point.report;
    LedgerCounts total;
    for (std::uint64_t t = 0; t < report.trials(); ++t) total = total + TrialLedger(report, t);
    miss.push_back(MeanMissRate(report));
    loading.push_back(MeanLoadingSeconds(report));
    fmt::print(table, "{}\t{:.6f}\t{:.6f}\t{:.6f}\t{}\t{}\n", point.value, loading.back(),
               MeanComputeSeconds(report), miss.back(), total.class_a, total.class_b);
    if (!flags.out_dir.empty()) WriteReportFiles(report, flags.out_dir, fmt::format("{}={}", axis, point.value));
    reports.push_back(report);
  }
  out << table.str();
  if (!flags.out_dir.empty()) WriteFile(fs::path(flags.out_dir) / "sweep.tsv", table.str());

  const std::vector<std::size_t> miss_steps = IncreasingSteps(miss);
  if (miss_steps.empty()) {
    fmt::print(out, "miss_rate non-increasing: pass\n");
  } else {
    std::vector<std::string> where;
    for (std::size_t i : miss_steps) where.push_back(fmt::format("{}->{}", values[i], values[i + 1]));
    fmt::print(out, "miss_rate non-increasing: fail at {}\n", fmt::join(where, ", "));
  }
  fmt::print(out, "loading_time non-increasing: {}\n", IncreasingSteps(loading).empty() ? "pass" : "fail");
  if (reports.size() >= 3) {
    const RegressionResult fit = RegressLoadingTimeOnMissRate(reports);
    if (fit.degenerate) {
      fmt::print(out, "loading_time vs miss_rate: every point has the same miss rate, no fit\n");
    } else {
      fmt::print(out, "loading_time vs miss_rate: slope {:.6f} s, intercept {:.6f} s, r^2 {:.6f} over {} trials\n",
                 fit.slope, fit.intercept, fit.r_squared, fit.points);
    }
  }
  return kExitOk;
}

int CmdCost(const std::string& scenario_path, const std::vector<std::string>& sets, const std::string& out_dir,
            std::ostream& out) {
  CostScenario scenario = LoadCostScenario(ResolvePath(scenario_path));
  for (const std::string& assignment : sets) ApplyOverride(scenario.base, assignment);
  fmt::print(out, "scenario: {}\n", scenario.name);
  EchoConfig(scenario.base, out);
  fmt::print(out, "api basis: {}; dollars; times are per node in seconds\n", ToString(scenario.api_basis));
  const std::vector<ScenarioRow> rows = EvaluateScenario(scenario);
  std::ostringstream table;
  fmt::print(table, "method\tkind\tclass_a\tclass_b\tt_c_s\tt_d_s\tapi\tstorage\tcompute_loading\ttotal\n");
  for (const ScenarioRow& row : rows) {
    fmt::print(table, "{}\t{}\t{}\t{}\t{:.3f}\t{:.3f}\t{}\t{}{}\t{}\t{}\n", row.method, ToString(row.kind),
               row.requests.class_a, row.requests.class_b, row.inputs.compute_hours * 3600.0,
               row.inputs.loading_hours * 3600.0, FormatMoney(row.cost.api), FormatMoney(row.cost.storage),
               row.storage_pinned ? "*" : "", FormatMoney(row.cost.compute_loading), FormatMoney(row.cost.total()));
  }
  out << table.str();
  if (std::any_of(rows.begin(), rows.end(), [](const ScenarioRow& r) { return r.storage_pinned; })) {
    fmt::print(out, "* storage fixed by the scenario\n");
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    WriteFile(fs::path(out_dir) / "cost.tsv", table.str());
  }
  return kExitOk;
}

int CmdReconcile(const ConfigFlags& flags, std::ostream& out) {
  const EffectiveConfig config = BuildConfig(flags);
  EchoConfig(config, out);
  const RunReport report = RunExperiment(config);
  const ReconcileReport reconciled = Reconcile(report, CostInputsFor(report, 0.0, StorageBilling::kProrated));
  fmt::print(out, "mode {}\n", ToString(reconciled.mode));
  fmt::print(out, "trial\tcomponent\tpredicted\tobserved\tdelta\tcheck\tnote\n");
  for (const ReconcileLine& line : reconciled.lines) {
    const char* check = line.exact ? (line.matches() ? "exact-ok" : "exact-MISMATCH") : "informational";
    fmt::print(out, "{}\t{}\t{}\t{}\t{}\t{}\t{}\n", line.trial, line.component, line.predicted, line.observed,
               line.delta(), check, line.note);
  }
  fmt::print(out, "reconcile: {}\n", reconciled.ok() ? "pass" : "fail");
  return reconciled.ok() ? kExitOk : kExitRuntime;
}

struct CalibrateFlags {
  std::uint64_t object_size = 1000;
  ThroughputTargets targets;
  double list_latency_s = 0.008;
};

int CmdCalibrate(const CalibrateFlags& flags, std::ostream& out) {
  if (flags.object_size == 0) throw ConfigError("--object-size must be ≥ 1");
  const LatencyModel bucket =
      CalibrateLatencyModel(flags.object_size, flags.targets, std::chrono::duration_cast<Duration>(
                                                                  std::chrono::duration<double>(flags.list_latency_s)));
  const LatencyModel disk = DefaultDiskModel(flags.object_size);
  fmt::print(out, "object size {} B\n", flags.object_size);
  fmt::print(out, "targets: sequential {:.2f} B/s, {} workers {:.2f} B/s\n", flags.targets.sequential_bytes_per_sec,
             flags.targets.parallel_workers, flags.targets.parallel_bytes_per_sec);
  auto describe = [&](const char* name, const LatencyModel& model) {
    fmt::print(out, "{}: per_request_overhead {:.9f} s, bandwidth {:.3f} B/s, list_latency {:.6f} s, contention {:.6f}\n",
               name, ToSeconds(model.per_request_overhead), model.bandwidth_bytes_per_sec,
               ToSeconds(model.list_latency), model.contention);
  };
  describe("bucket", bucket);
  describe("disk", disk);
  const std::uint64_t objects = 16'000;
  fmt::print(out, "bucket achieved: sequential {:.2f} B/s, {} workers {:.2f} B/s over {} objects\n",
             EffectiveThroughput(bucket, flags.object_size, objects, 1), flags.targets.parallel_workers,
             EffectiveThroughput(bucket, flags.object_size, objects, flags.targets.parallel_workers), objects);
  fmt::print(out, "disk achieved: sequential {:.2f} B/s\n", EffectiveThroughput(disk, flags.object_size, objects, 1));
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"bucketfeed: simulate cache-backed pre-fetching from object storage"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  ConfigFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "simulate one experiment");
  AddConfigFlags(*run, run_flags);

  ConfigFlags sweep_flags;
  std::string axis;
  std::string values;
  CLI::App* sweep = app.add_subcommand("sweep", "simulate one experiment per value of a config field");
  AddConfigFlags(*sweep, sweep_flags);
  sweep->add_option("--axis", axis, "config field to vary")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();

  std::string scenario;
  std::vector<std::string> cost_sets;
  std::string cost_out;
  CLI::App* cost = app.add_subcommand("cost", "price a cost scenario");
  cost->add_option("scenario", scenario, "JSON cost scenario")->required();
  cost->add_option("--set", cost_sets, "key=value override of the scenario's base config")->type_name("KEY=VALUE");
  cost->add_option("--out", cost_out, "directory for cost.tsv");

  ConfigFlags reconcile_flags;
  CLI::App* reconcile = app.add_subcommand("reconcile", "compare request-count formulas with the ledger");
  AddConfigFlags(*reconcile, reconcile_flags);

  CalibrateFlags calibrate_flags;
  CLI::App* calibrate = app.add_subcommand("calibrate", "derive latency models from throughput targets");
  calibrate->add_option("--object-size", calibrate_flags.object_size, "bytes per object");
  calibrate->add_option("--sequential", calibrate_flags.targets.sequential_bytes_per_sec, "B/s with one reader");
  calibrate->add_option("--parallel", calibrate_flags.targets.parallel_bytes_per_sec, "B/s with --workers readers");
  calibrate->add_option("--workers", calibrate_flags.targets.parallel_workers, "parallel readers");
  calibrate->add_option("--overhead-fraction", calibrate_flags.targets.overhead_fraction,
                        "share of sequential time spent in request overhead");
  calibrate->add_option("--list-latency", calibrate_flags.list_latency_s, "seconds per listing page");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return CmdRun(run_flags, out);
    if (*sweep) return CmdSweep(sweep_flags, axis, values, out);
    if (*cost) return CmdCost(scenario, cost_sets, cost_out, out);
    if (*reconcile) return CmdReconcile(reconcile_flags, out);
    if (*calibrate) return CmdCalibrate(calibrate_flags, out);
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace bucketfeed
