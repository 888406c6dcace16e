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
#include <functional>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bucketfeed/cache.hpp"
#include "bucketfeed/config.hpp"
#include "bucketfeed/core.hpp"
#include "bucketfeed/pipeline.hpp"
#include "bucketfeed/store.hpp"

namespace bucketfeed {

/// Discrete-event clock. Scheduled callbacks fire, in (time, insertion) order,
/// while Advance() moves time past them.
class VirtualClock final : public Timeline {
 public:
  Duration Now() const override { return now_; }
  void Advance(Duration elapsed) override;

  /// Runs `callback` once the clock reaches `at` (immediately on the next
  /// Advance() if `at` is already past).
  void Schedule(Duration at, std::function<void()> callback);

  std::size_t pending_events() const { return events_.size(); }

 private:
  struct Event {
    Duration at;
    std::uint64_t sequence;
    std::function<void()> callback;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.at != b.at ? a.at > b.at : a.sequence > b.sequence;
    }
  };

  Duration now_ = Duration::zero();
  std::uint64_t next_sequence_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> events_;
};

/// Pre-fetch service on a virtual clock.
///
/// A request is acknowledged at once and its job starts listing right away,
/// alongside any jobs still running. Downloads share the node's pool of
/// parallel readers, so a job's gets begin once its listing is done and every
/// earlier job's gets have finished. All of a job's samples become resident at
/// its completion instant. Store calls are issued when the request is
/// accepted, so the ledger reflects a job as soon as it exists.
class VirtualPrefetchService final : public FetchRequester {
 public:
  VirtualPrefetchService(VirtualClock& clock, BackingStore& store, FifoCache& cache, SessionId session,
                         PrefetchOptions options);

  FetchAck RequestFetch(std::vector<std::uint64_t> indices) override;

  std::uint64_t jobs() const { return next_job_id_ - 1; }
  std::uint64_t listing_passes() const { return listing_passes_; }
  /// When the reader pool drains its current backlog.
  Duration busy_until() const { return busy_until_; }

 private:
  VirtualClock& clock_;
  BackingStore& store_;
  FifoCache& cache_;
  SessionId session_;
  PrefetchOptions options_;
  Duration busy_until_ = Duration::zero();
  std::uint64_t next_job_id_ = 1;
  std::uint64_t listing_passes_ = 0;
};

struct EpochMetrics {
  std::uint64_t trial = 0;
  std::uint64_t node = 0;
  // 1-based.
  std::uint64_t epoch = 0;
  // Time the training loop waited for samples.
  Duration loading_time = Duration::zero();
  Duration compute_time = Duration::zero();
  // Virtual time from epoch start to its last batch's compute completion.
  Duration elapsed = Duration::zero();
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
  // Gets issued by the training loop itself; the rest of class_b came from
  // pre-fetch jobs.
  std::uint64_t worker_gets = 0;
  std::uint64_t fetch_jobs = 0;
  LedgerCounts ledger;

  std::uint64_t lookups() const { return hits + misses; }
  double miss_rate() const;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct RunReport {
  EffectiveConfig config;
  // Ordered by trial, then node, then epoch.
  std::vector<EpochMetrics> rows;

  std::uint64_t trials() const { return config.experiment.trials; }
  std::uint64_t nodes() const { return config.experiment.nodes; }
  std::uint64_t epochs() const { return config.experiment.epochs; }
  const EpochMetrics& row(std::uint64_t trial, std::uint64_t node, std::uint64_t epoch) const;
};

/// Simulates every trial of `config`. Throws ConfigError listing violations for
/// an invalid config and NotFoundError if a sample cannot be served.
RunReport RunExperiment(const EffectiveConfig& config);

/// Selection of epochs an aggregate covers: one epoch (1-based) or all.
using EpochSelector = std::optional<std::uint64_t>;

/// Mean over trials of the mean over nodes.
///
/// Loading and compute times are summed over the selected epochs per node;
/// the miss rate pools the selected epochs' lookups per node.
double MeanLoadingSeconds(const RunReport& report, EpochSelector epoch = std::nullopt);
double MeanComputeSeconds(const RunReport& report, EpochSelector epoch = std::nullopt);
double MeanMissRate(const RunReport& report, EpochSelector epoch = std::nullopt);

/// Same aggregates restricted to one trial (mean over its nodes).
double TrialLoadingSeconds(const RunReport& report, std::uint64_t trial);
double TrialMissRate(const RunReport& report, std::uint64_t trial);

/// Requests of one trial, summed over nodes and epochs.
LedgerCounts TrialLedger(const RunReport& report, std::uint64_t trial);
std::uint64_t TrialWorkerGets(const RunReport& report, std::uint64_t trial);

/// Config fields accepted as sweep axes.
const std::vector<std::string>& SweepAxes();

struct SweepPoint {
  std::string value;
  RunReport report;
};

/// One report per value of `axis`, all with the base config's seed. Throws
/// ConfigError for an unknown axis or a value that does not parse.
std::vector<SweepPoint> RunSweep(const EffectiveConfig& base, std::string_view axis,
                                 std::span<const std::string> values);

/// Positions i where metric[i + 1] > metric[i] + tolerance.
std::vector<std::size_t> IncreasingSteps(std::span<const double> metric, double tolerance = 0.0);

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
  // Every point had the same miss rate; no fit was made.
  bool degenerate = false;
};

/// Least squares of per-trial loading time (s, mean over nodes, all epochs)
/// on per-trial miss rate. Throws DomainError for fewer than three reports.
RegressionResult RegressLoadingTimeOnMissRate(std::span<const RunReport> reports);

/// One row per trial x node x epoch, tab-separated, with a header line.
void WriteTsv(const RunReport& report, std::ostream& out);
/// Config echo, every row and the node-then-trial aggregates.
nlohmann::json ReportToJson(const RunReport& report);

}  // namespace bucketfeed
