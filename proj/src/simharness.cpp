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

#include "bucketfeed/simharness.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

#include <fmt/format.h>

#include "bucketfeed/errors.hpp"

namespace bucketfeed {
namespace {

using nlohmann::json;

std::unique_ptr<BackingStore> MakeStore(const EffectiveConfig& config) {
  if (config.experiment.mode == Mode::kDisk) {
    if (config.latency.disk_dir) return std::make_unique<LocalDirStore>(*config.latency.disk_dir, config.latency.disk);
    return std::make_unique<SimulatedBucket>(config.dataset, config.latency.disk);
  }
  return std::make_unique<SimulatedBucket>(config.dataset, config.latency.bucket);
}

bool UsesCache(Mode mode) { return mode == Mode::kCacheOnly || mode == Mode::kCachePrefetch; }

// Runs every epoch of one node of one trial on its own clock and store.
void SimulateNode(const EffectiveConfig& config, const PartitionSampler& partitioner, std::uint64_t trial,
                  std::uint64_t node, std::vector<EpochMetrics>& rows) {
  const ExperimentConfig& e = config.experiment;
  const SessionId session{trial * e.nodes + node + 1};
  VirtualClock clock;
  std::unique_ptr<BackingStore> store = MakeStore(config);
  std::unique_ptr<FifoCache> cache;
  if (UsesCache(e.mode)) cache = std::make_unique<FifoCache>(e.cache_capacity);

  DatasetOptions dataset_options;
  dataset_options.insert_on_worker_miss = e.mode == Mode::kCacheOnly;
  dataset_options.cache_latency = UsesCache(e.mode) ? config.latency.cache_latency : Duration::zero();
  std::unique_ptr<VirtualPrefetchService> prefetcher;
  if (e.mode == Mode::kCachePrefetch) {
    prefetcher = std::make_unique<VirtualPrefetchService>(
        clock, *store, *cache, session,
        PrefetchOptions{e.parallel_fetch_workers, e.page_size, e.list_once_per_node});
  }
  CachingDataset dataset(cache.get(), *store, session, dataset_options);

  for (std::uint64_t epoch = 1; epoch <= e.epochs; ++epoch) {
    const Duration epoch_start = clock.Now();
    const LedgerCounts ledger_before = store->ledger();
    const std::uint64_t hits_before = dataset.hits();
    const std::uint64_t misses_before = dataset.misses();
    const std::uint64_t gets_before = dataset.store_fetches();
    const std::uint64_t jobs_before = prefetcher ? prefetcher->jobs() : 0;

    // Without pre-fetching the node lists its objects once per epoch, which is
    // bookkeeping outside the training loop's waits.
    if (e.mode == Mode::kBucketDirect || e.mode == Mode::kCacheOnly) ListAll(*store, e.page_size);

    VectorIndexSource partition(partitioner.Partition(epoch, node));
    std::optional<PrefetchingSampler> prefetching;
    IndexSource* sampler = &partition;
    if (prefetcher) {
      prefetching.emplace(partition, e.fetch_size, e.prefetch_threshold, *prefetcher);
      sampler = &*prefetching;
    }
    DataLoader loader(*sampler, dataset, clock, e.batch_size);

    EpochMetrics metrics;
    metrics.trial = trial;
    metrics.node = node;
    metrics.epoch = epoch;
    while (std::optional<Batch> batch = loader.NextBatch()) {
      metrics.loading_time += batch->loading_time;
      clock.Advance(e.compute_time_per_batch);
      metrics.compute_time += e.compute_time_per_batch;
    }
    metrics.elapsed = clock.Now() - epoch_start;
    metrics.hits = dataset.hits() - hits_before;
    metrics.misses = dataset.misses() - misses_before;
    metrics.worker_gets = dataset.store_fetches() - gets_before;
    metrics.fetch_jobs = (prefetcher ? prefetcher->jobs() : 0) - jobs_before;
    metrics.evictions = cache ? cache->ResetEpochStats().evictions : 0;
    metrics.ledger = store->ledger() - ledger_before;
    rows.push_back(metrics);
  }
}

struct NodeTotals {
  double loading_s = 0.0;
  double compute_s = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;

  double miss_rate() const {
    const std::uint64_t lookups = hits + misses;
    return lookups == 0 ? 0.0 : static_cast<double>(misses) / static_cast<double>(lookups);
  }
};

NodeTotals Totals(const RunReport& report, std::uint64_t trial, std::uint64_t node, EpochSelector epoch) {
  NodeTotals totals;
  Duration loading = Duration::zero();
  Duration compute = Duration::zero();
  for (std::uint64_t ep = 1; ep <= report.epochs(); ++ep) {
    if (epoch && *epoch != ep) continue;
    const EpochMetrics& row = report.row(trial, node, ep);
    loading += row.loading_time;
    compute += row.compute_time;
    totals.hits += row.hits;
    totals.misses += row.misses;
  }
  totals.loading_s = ToSeconds(loading);
  totals.compute_s = ToSeconds(compute);
  return totals;
}

template <typename Metric>
double NodeMean(const RunReport& report, std::uint64_t trial, EpochSelector epoch, Metric metric) {
  double sum = 0.0;
  for (std::uint64_t node = 0; node < report.nodes(); ++node) sum += metric(Totals(report, trial, node, epoch));
  return sum / static_cast<double>(report.nodes());
}

template <typename Metric>
double TrialMean(const RunReport& report, EpochSelector epoch, Metric metric) {
  if (epoch && (*epoch < 1 || *epoch > report.epochs())) {
    throw ConfigError(fmt::format("epoch {} outside 1..{}", *epoch, report.epochs()));
  }
  double sum = 0.0;
  for (std::uint64_t trial = 0; trial < report.trials(); ++trial) sum += NodeMean(report, trial, epoch, metric);
  return sum / static_cast<double>(report.trials());
}

}  // namespace

void VirtualClock::Advance(Duration elapsed) {
  const Duration target = now_ + elapsed;
  while (!events_.empty() && events_.top().at <= target) {
    Event event = events_.top();
    events_.pop();
    now_ = std::max(now_, event.at);
    event.callback();
  }
  now_ = target;
}

void VirtualClock::Schedule(Duration at, std::function<void()> callback) {
  events_.push(Event{at, next_sequence_++, std::move(callback)});
}

VirtualPrefetchService::VirtualPrefetchService(VirtualClock& clock, BackingStore& store, FifoCache& cache,
                                               SessionId session, PrefetchOptions options)
    : clock_(clock), store_(store), cache_(cache), session_(session), options_(options) {}

FetchAck VirtualPrefetchService::RequestFetch(std::vector<std::uint64_t> indices) {
  if (indices.empty()) return FetchAck{0, 0};
  const FetchAck ack{next_job_id_++, indices.size()};
  const bool list_bucket = !(options_.list_once && listing_passes_ > 0);
  FetchJobResult result = ExecuteFetchJob(store_, session_, indices, options_, list_bucket);
  if (list_bucket) ++listing_passes_;
  if (result.error) throw NotFoundError(fmt::format("pre-fetch job {} failed: {}", ack.job_id, *result.error));
  const Duration fetch_start = std::max(clock_.Now() + result.listing_time, busy_until_);
  busy_until_ = fetch_start + result.fetch_time;
  clock_.Schedule(busy_until_, [this, records = std::move(result.records)] { cache_.PutAll(records); });
  return ack;
}

double EpochMetrics::miss_rate() const {
  return lookups() == 0 ? 0.0 : static_cast<double>(misses) / static_cast<double>(lookups());
}

const EpochMetrics& RunReport::row(std::uint64_t trial, std::uint64_t node, std::uint64_t epoch) const {
  const std::uint64_t position = (trial * nodes() + node) * epochs() + (epoch - 1);
  if (trial >= trials() || node >= nodes() || epoch < 1 || epoch > epochs() || position >= rows.size()) {
    throw ConfigError(fmt::format("no row for trial {} node {} epoch {}", trial, node, epoch));
  }
  return rows[position];
}

RunReport RunExperiment(const EffectiveConfig& config) {
  const std::vector<std::string> violations = ValidateConfig(config.experiment, config.dataset);
  if (!violations.empty()) {
    std::string message = "invalid config:";
    for (const std::string& v : violations) message += "\n  " + v;
    throw ConfigError(message);
  }
  const ExperimentConfig& e = config.experiment;
  RunReport report{config, {}};
  report.rows.reserve(e.trials * e.nodes * e.epochs);
  for (std::uint64_t trial = 0; trial < e.trials; ++trial) {
    const std::uint64_t trial_seed = SeededRng(e.seed, fmt::format("trial/{}", trial)).Next();
    const PartitionSampler partitioner(config.dataset.num_samples, e.nodes, trial_seed);
    for (std::uint64_t node = 0; node < e.nodes; ++node) SimulateNode(config, partitioner, trial, node, report.rows);
  }
  return report;
}

double MeanLoadingSeconds(const RunReport& report, EpochSelector epoch) {
  return TrialMean(report, epoch, [](const NodeTotals& t) { return t.loading_s; });
}

double MeanComputeSeconds(const RunReport& report, EpochSelector epoch) {
  return TrialMean(report, epoch, [](const NodeTotals& t) { return t.compute_s; });
}

double MeanMissRate(const RunReport& report, EpochSelector epoch) {
  return TrialMean(report, epoch, [](const NodeTotals& t) { return t.miss_rate(); });
}

double TrialLoadingSeconds(const RunReport& report, std::uint64_t trial) {
  return NodeMean(report, trial, std::nullopt, [](const NodeTotals& t) { return t.loading_s; });
}

double TrialMissRate(const RunReport& report, std::uint64_t trial) {
  return NodeMean(report, trial, std::nullopt, [](const NodeTotals& t) { return t.miss_rate(); });
}

LedgerCounts TrialLedger(const RunReport& report, std::uint64_t trial) {
  LedgerCounts total;
  for (const EpochMetrics& row : report.rows) {
    if (row.trial == trial) total += row.ledger;
  }
  return total;
}

std::uint64_t TrialWorkerGets(const RunReport& report, std::uint64_t trial) {
  std::uint64_t total = 0;
  for (const EpochMetrics& row : report.rows) {
    if (row.trial == trial) total += row.worker_gets;
  }
  return total;
}

const std::vector<std::string>& SweepAxes() {
  static const auto* axes = new std::vector<std::string>{
      "fetch_size", "prefetch_threshold", "cache_capacity", "compute_time_per_batch", "nodes",
      "epochs",     "batch_size",         "parallel_fetch_workers", "page_size"};
  return *axes;
}

std::vector<SweepPoint> RunSweep(const EffectiveConfig& base, std::string_view axis,
                                 std::span<const std::string> values) {
  const std::vector<std::string>& axes = SweepAxes();
  if (std::find(axes.begin(), axes.end(), axis) == axes.end()) {
    throw ConfigError(fmt::format("unknown sweep axis '{}'", axis));
  }
  std::vector<SweepPoint> points;
  points.reserve(values.size());
  for (const std::string& value : values) {
    EffectiveConfig config = base;
    ApplyOverride(config, axis, value);
    points.push_back(SweepPoint{value, RunExperiment(config)});
  }
  return points;
}

std::vector<std::size_t> IncreasingSteps(std::span<const double> metric, double tolerance) {
  std::vector<std::size_t> steps;
  for (std::size_t i = 0; i + 1 < metric.size(); ++i) {
    if (metric[i + 1] > metric[i] + tolerance) steps.push_back(i);
  }
  return steps;
}

RegressionResult RegressLoadingTimeOnMissRate(std::span<const RunReport> reports) {
  if (reports.size() < 3) {
    throw DomainError(fmt::format("regression needs at least 3 reports, got {}", reports.size()));
  }
  std::vector<double> x;
  std::vector<double> y;
  for (const RunReport& report : reports) {
    for (std::uint64_t trial = 0; trial < report.trials(); ++trial) {
      x.push_back(TrialMissRate(report, trial));
      y.push_back(TrialLoadingSeconds(report, trial));
    }
  }
  RegressionResult result;
  result.points = x.size();
  const double n = static_cast<double>(x.size());
  const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mean_x) * (x[i] - mean_x);
    sxy += (x[i] - mean_x) * (y[i] - mean_y);
    syy += (y[i] - mean_y) * (y[i] - mean_y);
  }
  if (sxx <= 1e-18) {
    result.degenerate = true;
    return result;
  }
  result.slope = sxy / sxx;
  result.intercept = mean_y - result.slope * mean_x;
  result.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return result;
}

void WriteTsv(const RunReport& report, std::ostream& out) {
  out << "trial\tnode\tepoch\tloading_time_s\tcompute_time_s\tmiss_rate\thits\tmisses\tevictions\tclass_a\tclass_b"
         "\tbytes\n";
  for (const EpochMetrics& r : report.rows) {
    out << fmt::format("{}\t{}\t{}\t{:.9f}\t{:.9f}\t{:.6f}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.trial, r.node, r.epoch,
                       ToSeconds(r.loading_time), ToSeconds(r.compute_time), r.miss_rate(), r.hits, r.misses,
                       r.evictions, r.ledger.class_a, r.ledger.class_b, r.ledger.bytes_fetched);
  }
}

json ReportToJson(const RunReport& report) {
  json rows = json::array();
  for (const EpochMetrics& r : report.rows) {
    rows.push_back({{"trial", r.trial},
                    {"node", r.node},
                    {"epoch", r.epoch},
                    {"loading_time_s", ToSeconds(r.loading_time)},
                    {"compute_time_s", ToSeconds(r.compute_time)},
                    {"elapsed_s", ToSeconds(r.elapsed)},
                    {"miss_rate", r.miss_rate()},
                    {"hits", r.hits},
                    {"misses", r.misses},
                    {"evictions", r.evictions},
                    {"worker_gets", r.worker_gets},
                    {"fetch_jobs", r.fetch_jobs},
                    {"class_a", r.ledger.class_a},
                    {"class_b", r.ledger.class_b},
                    {"bytes", r.ledger.bytes_fetched}});
  }
  json per_epoch = json::array();
  for (std::uint64_t epoch = 1; epoch <= report.epochs(); ++epoch) {
    per_epoch.push_back({{"epoch", epoch},
                         {"loading_time_s", MeanLoadingSeconds(report, epoch)},
                         {"compute_time_s", MeanComputeSeconds(report, epoch)},
                         {"miss_rate", MeanMissRate(report, epoch)}});
  }
  return {{"config", ConfigToJson(report.config)},
          {"rows", std::move(rows)},
          {"summary",
           {{"averaging", "mean over trials of mean over nodes"},
            {"loading_time_s", MeanLoadingSeconds(report)},
            {"compute_time_s", MeanComputeSeconds(report)},
            {"miss_rate", MeanMissRate(report)},
            {"per_epoch", std::move(per_epoch)}}}};
}

}  // namespace bucketfeed
