#include "attnrc/pipeline.hpp"

#include "attnrc/dynamics.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace attnrc::eval {

using dynamics::DatasetSplit;
using reservoir::StateMatrix;

AlignedPairs HarvestedRun::train_pairs() const {
  const long usable = states_train.rows() - horizon;
  if (usable < 2) throw ConfigError("train split too short for the requested horizon");
  return {states_train.data.topRows(usable), exposed_train.bottomRows(usable)};
}

AlignedPairs HarvestedRun::test_pairs() const {
  const long usable = states_test.rows() - horizon;
  if (usable < 2) throw ConfigError("test split too short for the requested horizon");
  return {states_test.data.topRows(usable), exposed_test.bottomRows(usable)};
}

namespace {

DatasetSplit build_dataset(const Config& cfg) {
  if (cfg.dataset.system == "uctls")
    return dynamics::build_uctls(cfg.dataset.sigma_force, cfg.dataset.n_train,
                                 cfg.dataset.n_test, cfg.dataset.seed);
  const auto exposure = cfg.dataset.alrs_exposure == "xyz" ? dynamics::AlrsExposure::xyz
                                                           : dynamics::AlrsExposure::x_only;
  return dynamics::build_alrs(cfg.dataset.n_train, cfg.dataset.n_test, cfg.dataset.window,
                              cfg.dataset.seed, exposure);
}

std::uint64_t state_cache_key(const Config& cfg, const DatasetSplit& data) {
  json key;
  key["dataset_id"] = data.id;
  key["backend"] = cfg.to_json()["reservoir"];
  key["seed"] = cfg.dataset.seed;
  key["format"] = 1;
  return fnv1a64(key.dump());
}

}  // namespace

HarvestedRun prepare_run(const Config& cfg) {
  HarvestedRun run;
  run.data = build_dataset(cfg);
  run.washout = cfg.reservoir.washout;
  run.horizon = cfg.eval.horizon;

  const long n_train = run.data.train.rows();
  const long n_test = run.data.test.rows();
  if (run.washout >= n_train) throw ConfigError("washout exceeds the training split");

  const Matrix exposed_train_full = run.data.train.exposed();
  const Matrix exposed_test = run.data.test.exposed();
  const int channels = static_cast<int>(exposed_train_full.cols());

  Matrix inputs(n_train + n_test, channels);
  inputs.topRows(n_train) = exposed_train_full;
  inputs.bottomRows(n_test) = exposed_test;

  const auto backend = cfg.backend_config();
  const auto mask = reservoir::make_mask(backend.nodes, channels, backend.theta,
                                         derive_seed(cfg.dataset.seed, "mask"));
  const std::uint64_t key = state_cache_key(cfg, run.data);
  const auto cache_path = cfg.resolve_cache_dir() / ("states_" + hex64(key) + ".bin");

  StateMatrix raw;
  if (!cfg.io.no_cache) {
    if (auto cached = reservoir::load_state_matrix(cache_path, key)) {
      raw = std::move(*cached);
      run.cache_hit = true;
    }
  }
  if (!run.cache_hit) {
    auto runner = reservoir::make_runner(backend, mask, channels,
                                         derive_seed(cfg.dataset.seed, "reservoir"));
    raw = reservoir::harvest(*runner, inputs);
    if (!cfg.io.no_cache) reservoir::save_state_matrix(cache_path, raw, key);
  }
  run.state_hash = reservoir::state_matrix_hash(raw);

  StateMatrix raw_train;
  raw_train.data = raw.data.block(run.washout, 0, n_train - run.washout, raw.data.cols());
  run.states_train = reservoir::standardize_states(raw_train);
  run.node_stats = run.states_train.stats;

  StateMatrix raw_test;
  raw_test.data = raw.data.bottomRows(n_test);
  run.states_test = reservoir::standardize_states(raw_test, run.node_stats);

  run.exposed_train = exposed_train_full.bottomRows(n_train - run.washout);
  run.exposed_test = exposed_test;
  return run;
}

TrainedReadout train_readout(const HarvestedRun& run, readout::ModelKind kind,
                             const Config& cfg) {
  TrainedReadout out;
  out.consumed_state_hash = run.state_hash;
  const AlignedPairs train = run.train_pairs();
  const AlignedPairs test = run.test_pairs();

  if (kind == readout::ModelKind::ridge) {
    const long rows = train.states.rows();
    const long tail = std::max<long>(std::lround(cfg.readout.validation_fraction *
                                                 static_cast<double>(rows)), 0);
    double best_lambda = cfg.readout.lambda_min;
    if (tail >= 2 && rows - tail >= 2 && cfg.readout.lambda_points > 1) {
      const Matrix fit_states = train.states.topRows(rows - tail);
      const Matrix fit_targets = train.targets.topRows(rows - tail);
      const Matrix val_states = train.states.bottomRows(tail);
      const Matrix val_targets = train.targets.bottomRows(tail);
      double best_score = std::numeric_limits<double>::infinity();
      const double log_min = std::log10(cfg.readout.lambda_min);
      const double log_max = std::log10(cfg.readout.lambda_max);
      for (int i = 0; i < cfg.readout.lambda_points; ++i) {
        const double lambda = std::pow(
            10.0, log_min + (log_max - log_min) * i / (cfg.readout.lambda_points - 1));
        try {
          const auto w = readout::train_ridge(fit_states, fit_targets, lambda);
          const double score = nrmse(readout::predict_ridge(val_states, w), val_targets);
          if (score < best_score) {
            best_score = score;
            best_lambda = lambda;
          }
        } catch (const NumericalError&) {
          // singular fit at this lambda; skip
        }
      }
    }
    out.best_lambda = best_lambda;
    out.model = readout::train_ridge(train.states, train.targets, best_lambda);
    return out;
  }

  const auto result = readout::train_attention(kind, train.states, train.targets, test.states,
                                               test.targets, cfg.readout.train);
  out.model = cfg.readout.selection == "best" ? result.best : result.last;
  out.curve = result.curve;
  out.best_epoch = result.best_epoch;
  return out;
}

MetricResult open_loop_eval(const readout::ReadoutModel& model,
                            const StateMatrix& states_test, const Matrix& exposed_test,
                            int horizon) {
  if (horizon < 1) throw ConfigError("open_loop_eval: horizon must be >= 1");
  const long rows = states_test.rows();
  if (horizon >= rows - 1)
    throw ConfigError("open_loop_eval: horizon " + std::to_string(horizon) +
                      " exceeds the test length");
  const Matrix pred = readout::predict(model, states_test.data.topRows(rows - horizon));
  const double value = nrmse(pred, exposed_test.bottomRows(rows - horizon));
  MetricResult metric;
  metric.name = "nrmse";
  metric.value = metric.ensemble_mean = value;
  metric.unit = "dimensionless";
  return metric;
}

namespace {

struct StartPoint {
  long row = 0;       // test-local state row providing the teacher-forced state
  long duration = 0;  // free-run steps
  double lyapunov = 0.0;
  double dt = 0.0;
  std::string system;  // empty for single-system tasks
};

std::vector<StartPoint> closed_loop_starts(const HarvestedRun& run, const Config& cfg) {
  const long n_test = run.states_test.rows();
  std::vector<StartPoint> starts;
  if (run.data.alternating()) {
    const long window = run.data.window;
    const long duration = std::min<long>(cfg.eval.closed_loop_duration, window - 1);
    for (long w = 0; w * window + duration < n_test; ++w) {
      StartPoint s;
      s.row = w * window;
      s.duration = duration;
      s.system = run.data.test_window_system(w);
      s.lyapunov = s.system == "roessler" ? cfg.eval.lyapunov_roessler : cfg.eval.lyapunov_lorenz;
      s.dt = s.system == "roessler" ? run.data.dt_roessler : run.data.dt_lorenz;
      starts.push_back(s);
    }
  } else {
    const long duration = std::min<long>(cfg.eval.closed_loop_duration, n_test - 2);
    const int count = std::max(1, cfg.eval.vpt_starts);
    const long span = n_test - duration - 1;
    for (int j = 0; j < count; ++j) {
      StartPoint s;
      s.row = span > 0 ? (span * j) / count : 0;
      s.duration = duration;
      s.lyapunov = cfg.eval.lyapunov_lorenz;
      s.dt = run.data.test.dt_sample;
      starts.push_back(s);
    }
  }
  return starts;
}

}  // namespace

ClosedLoopSummary closed_loop_eval(const readout::ReadoutModel& model, const HarvestedRun& run,
                                   const Config& cfg) {
  if (run.horizon != 1)
    throw ConfigError("closed_loop_eval: the readout must be trained on next-step targets");
  const int target_dims = static_cast<int>(run.exposed_test.cols());
  {
    const Matrix probe = readout::predict(model, run.states_test.data.topRows(1));
    if (probe.cols() != target_dims)
      throw ConfigError("closed_loop_eval: model targets do not cover all exposed channels");
  }

  const auto starts = closed_loop_starts(run, cfg);
  for (const auto& s : starts)
    if (s.duration < 1) throw ConfigError("closed_loop_eval: zero free-run duration");

  // Replay the harvesting pass (same seeds, same arithmetic) and branch a
  // clone at every start row.
  const Config& c = cfg;
  const Matrix exposed_train_full = run.data.train.exposed();
  const int channels = static_cast<int>(exposed_train_full.cols());
  const auto backend = c.backend_config();
  const auto mask = reservoir::make_mask(backend.nodes, channels, backend.theta,
                                         derive_seed(c.dataset.seed, "mask"));
  auto runner = reservoir::make_runner(backend, mask, channels,
                                       derive_seed(c.dataset.seed, "reservoir"));
  for (long l = 0; l < exposed_train_full.rows(); ++l)
    runner->step(exposed_train_full.row(l).transpose());

  std::vector<long> rows;
  rows.reserve(starts.size());
  for (const auto& s : starts) rows.push_back(s.row);

  ClosedLoopSummary summary;
  std::map<std::string, std::vector<double>> per_system;
  std::size_t next = 0;
  Vector state_row(backend.nodes);
  for (long l = 0; l < run.exposed_test.rows() && next < starts.size(); ++l) {
    state_row = runner->step(run.exposed_test.row(l).transpose());
    while (next < starts.size() && rows[next] == l) {
      const StartPoint& sp = starts[next];
      ClosedLoopRun clr;
      clr.start_index = sp.row;
      auto branch = runner->clone();

      const Vector standardized =
          (state_row - run.node_stats.mean).array() / run.node_stats.std.array();
      Matrix preds(sp.duration, target_dims);
      long produced = 0;
      try {
        Vector pred = readout::predict(model, standardized.transpose()).row(0).transpose();
        preds.row(0) = pred;
        produced = 1;
        for (long t = 1; t < sp.duration; ++t) {
          pred = readout::closed_loop_step(model, *branch, run.node_stats, pred);
          preds.row(t) = pred;
          produced = t + 1;
        }
      } catch (const NumericalError&) {
        clr.diverged = true;  // trajectory escape; score the VPT at the truncation
      }

      if (produced == 0) {
        clr.vpt.lyapunov_times = 0.0;
        clr.vpt.time = 0.0;
        clr.vpt.crossing_index = 0;
      } else {
        clr.predicted = preds.topRows(produced);
        const Matrix truth = run.exposed_test.block(sp.row + 1, 0, produced, target_dims);
        clr.vpt = vpt(clr.predicted, truth, sp.lyapunov, sp.dt, c.eval.vpt_threshold);
        if (clr.diverged && clr.vpt.saturated) {
          clr.vpt.saturated = false;
          clr.vpt.crossing_index = produced;
          clr.vpt.time = static_cast<double>(produced) * sp.dt;
          clr.vpt.lyapunov_times = clr.vpt.time * sp.lyapunov;
        }
      }
      if (!sp.system.empty()) per_system[sp.system].push_back(clr.vpt.lyapunov_times);
      summary.runs.push_back(std::move(clr));
      ++next;
    }
  }

  double total = 0.0;
  for (const auto& r : summary.runs) total += r.vpt.lyapunov_times;
  summary.mean_vpt = summary.runs.empty() ? 0.0 : total / static_cast<double>(summary.runs.size());
  for (const auto& [system, values] : per_system)
    summary.per_system_vpt[system] = mean_std(values).first;
  return summary;
}

double attention_boundary_ratio(const readout::LinearAttention& model,
                                const StateMatrix& states_test,
                                const std::vector<long>& boundaries, long gap, long washout) {
  if (gap < 2) throw ConfigError("attention_boundary_ratio: gap must be >= 2");
  const auto weights = readout::attention_weights(model, states_test.data);
  const long rows = states_test.rows();
  const long dim = static_cast<long>(weights.size()) * states_test.nodes();

  // Per-sample attention vectors, all target dimensions concatenated.
  Matrix w_all(rows, dim);
  for (std::size_t m = 0; m < weights.size(); ++m)
    w_all.middleCols(static_cast<long>(m) * states_test.nodes(), states_test.nodes()) = weights[m];

  auto mean_pairwise = [&](long lo_a, long lo_b) {
    double sum = 0.0;
    for (long i = 0; i < gap; ++i)
      for (long j = 0; j < gap; ++j) sum += (w_all.row(lo_a + i) - w_all.row(lo_b + j)).norm();
    return sum / static_cast<double>(gap * gap);
  };
  auto mean_within = [&](long lo) {
    double sum = 0.0;
    long count = 0;
    for (long i = 0; i < gap; ++i)
      for (long j = i + 1; j < gap; ++j) {
        sum += (w_all.row(lo + i) - w_all.row(lo + j)).norm();
        ++count;
      }
    return sum / static_cast<double>(count);
  };

  double ratio_sum = 0.0;
  long used = 0;
  for (long b : boundaries) {
    if (b - gap < washout || b + gap > rows) continue;
    const double across = mean_pairwise(b - gap, b);
    const double within = 0.5 * (mean_within(b - gap) + mean_within(b));
    if (within <= 0.0) continue;
    ratio_sum += across / within;
    ++used;
  }
  if (used == 0) throw ConfigError("attention_boundary_ratio: no usable boundaries");
  return ratio_sum / static_cast<double>(used);
}

SweepAxis sweep_axis_from_name(const std::string& name) {
  if (name == "reservoir_size") return SweepAxis::reservoir_size;
  if (name == "sigma_force") return SweepAxis::sigma_force;
  if (name == "horizon_steps") return SweepAxis::horizon_steps;
  throw ConfigError("unknown sweep axis: " + name);
}

std::string sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::reservoir_size: return "reservoir_size";
    case SweepAxis::sigma_force: return "sigma_force";
    case SweepAxis::horizon_steps: return "horizon_steps";
  }
  return "unknown";
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

namespace {

struct CellResult {
  bool ok = false;
  std::string error;
  // metric -> value, keyed per model
  std::map<std::string, std::map<std::string, double>> metrics;
  std::uint64_t state_hash = 0;
  bool cache_hit = false;
};

Config cell_config(const SweepSpec& spec, const Config& base, double value, int member) {
  Config cfg = base;
  cfg.dataset.seed = base.dataset.seed + static_cast<std::uint64_t>(member);
  cfg.readout.train.seed = derive_seed(cfg.dataset.seed, "train_init");
  switch (spec.axis) {
    case SweepAxis::reservoir_size:
      cfg.reservoir.nodes = static_cast<int>(std::lround(value));
      break;
    case SweepAxis::sigma_force:
      cfg.dataset.sigma_force = value;
      break;
    case SweepAxis::horizon_steps:
      cfg.eval.horizon = static_cast<int>(std::lround(value));
      break;
  }
  return cfg;
}

CellResult run_cell(const SweepSpec& spec, const Config& base, double value, int member) {
  CellResult cell;
  try {
    const Config cfg = cell_config(spec, base, value, member);
    const HarvestedRun run = prepare_run(cfg);
    cell.state_hash = run.state_hash;
    cell.cache_hit = run.cache_hit;
    const bool closed_loop = spec.axis != SweepAxis::horizon_steps && run.horizon == 1;
    for (const auto kind : spec.models) {
      const std::string name = readout::model_kind_name(kind);
      const TrainedReadout trained = train_readout(run, kind, cfg);
      const auto open = open_loop_eval(trained.model, run.states_test, run.exposed_test, run.horizon);
      cell.metrics[name]["nrmse"] = open.value;
      if (closed_loop) {
        const auto cl = closed_loop_eval(trained.model, run, cfg);
        cell.metrics[name]["vpt"] = cl.mean_vpt;
        for (const auto& [system, mean] : cl.per_system_vpt)
          cell.metrics[name]["vpt_" + system] = mean;
      }
    }
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

}  // namespace

ExperimentReport run_sweep(const SweepSpec& spec, const Config& base, int jobs) {
  if (spec.values.empty()) throw ConfigError("run_sweep: no axis values");
  for (std::size_t i = 1; i < spec.values.size(); ++i)
    if (spec.values[i] <= spec.values[i - 1])
      throw ConfigError("run_sweep: axis values must be strictly increasing");
  if (spec.members < 1) throw ConfigError("run_sweep: members must be >= 1");

  const long n_values = static_cast<long>(spec.values.size());
  const long n_cells = n_values * spec.members;
  std::vector<CellResult> cells(static_cast<std::size_t>(n_cells));

  std::atomic<long> cursor{0};
  auto worker = [&]() {
    for (;;) {
      const long idx = cursor.fetch_add(1);
      if (idx >= n_cells) return;
      const long vi = idx / spec.members;
      const int member = static_cast<int>(idx % spec.members);
      cells[static_cast<std::size_t>(idx)] = run_cell(spec, base, spec.values[vi], member);
    }
  };
  const int n_threads = std::max(1, jobs);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentReport report;
  json cell_info = json::array();
  for (long vi = 0; vi < n_values; ++vi) {
    // metric -> model -> member values
    std::map<std::string, std::map<std::string, std::vector<double>>> collected;
    for (int member = 0; member < spec.members; ++member) {
      const auto& cell = cells[static_cast<std::size_t>(vi * spec.members + member)];
      json info;
      info["axis_value"] = spec.values[vi];
      info["member"] = member;
      info["ok"] = cell.ok;
      if (cell.ok) {
        info["state_hash"] = hex64(cell.state_hash);
        info["cache_hit"] = cell.cache_hit;
      } else {
        info["error"] = cell.error;
        report.warnings.push_back("axis=" + std::to_string(spec.values[vi]) + " member=" +
                                  std::to_string(member) + ": " + cell.error);
      }
      cell_info.push_back(std::move(info));
      if (!cell.ok) continue;
      for (const auto& [model, metrics] : cell.metrics)
        for (const auto& [metric, value] : metrics) collected[metric][model].push_back(value);
    }
    for (const auto& [metric, by_model] : collected) {
      for (const auto& [model, values] : by_model) {
        const auto [mean, sd] = mean_std(values);
        ReportRow row;
        row.axis_value = spec.values[vi];
        row.model = model;
        row.metric = metric;
        row.mean = mean;
        row.std_dev = sd;
        row.n = static_cast<int>(values.size());
        report.rows.push_back(std::move(row));
      }
    }
  }

  report.provenance["axis"] = sweep_axis_name(spec.axis);
  report.provenance["values"] = spec.values;
  report.provenance["members"] = spec.members;
  json models = json::array();
  for (const auto kind : spec.models) models.push_back(readout::model_kind_name(kind));
  report.provenance["models"] = std::move(models);
  report.provenance["base_config"] = base.to_json();
  report.provenance["config_hash"] = base.hash();
  report.provenance["cells"] = std::move(cell_info);
  return report;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp);
    if (!f) throw ConfigError("cannot open for writing: " + tmp.string());
    f << contents;
  }
  std::filesystem::rename(tmp, path);
}

void save_report_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  std::ostringstream os;
  os << "axis_value,model,metric,mean,std,n\n";
  char buf[32];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", row.axis_value);
    os << buf << ',' << row.model << ',' << row.metric << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", row.mean);
    os << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", row.std_dev);
    os << buf << ',' << row.n << "\n";
  }
  write_file_atomic(path, os.str());
}

void save_report_json(const std::filesystem::path& path, const ExperimentReport& report) {
  json doc;
  doc["provenance"] = report.provenance;
  doc["warnings"] = report.warnings;
  json rows = json::array();
  for (const auto& row : report.rows) {
    json r;
    r["axis_value"] = row.axis_value;
    r["model"] = row.model;
    r["metric"] = row.metric;
    r["mean"] = row.mean;
    r["std"] = row.std_dev;
    r["n"] = row.n;
    rows.push_back(std::move(r));
  }
  doc["rows"] = std::move(rows);
  write_file_atomic(path, doc.dump(2) + "\n");
}

}  // namespace attnrc::eval
