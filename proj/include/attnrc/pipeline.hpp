#pragma once

#include "attnrc/config.hpp"
#include "attnrc/metrics.hpp"
#include "attnrc/readout.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace attnrc::eval {

using cli::Config;
using cli::json;

struct AlignedPairs {
  Matrix states;   // rows predicting k steps ahead
  Matrix targets;  // exposed channels k steps later
};

/// Dataset + harvested, standardized states. Train rows start after the
/// washout; test rows continue the same reservoir run without reset.
/// `exposed_train` / `exposed_test` hold the exposed channels at the same
/// row index as the state rows; the horizon shift happens in *_pairs().
struct HarvestedRun {
  dynamics::DatasetSplit data;
  reservoir::StateMatrix states_train;  // standardized, post-washout
  reservoir::StateMatrix states_test;   // standardized with train stats
  Matrix exposed_train;
  Matrix exposed_test;
  dynamics::StandardizationStats node_stats;
  std::uint64_t state_hash = 0;
  bool cache_hit = false;
  long washout = 0;
  int horizon = 1;

  AlignedPairs train_pairs() const;
  AlignedPairs test_pairs() const;
};

/// Build the dataset and harvest states for `cfg`, using the state-matrix
/// cache unless disabled.
HarvestedRun prepare_run(const Config& cfg);

struct TrainedReadout {
  readout::ReadoutModel model;
  readout::LossCurve curve;  // empty for ridge
  double best_lambda = 0.0;  // ridge only
  int best_epoch = 0;
  std::uint64_t consumed_state_hash = 0;
};

/// Ridge with log-grid lambda search on a validation tail of the training
/// split, or gradient-descent attention training, on the given run.
TrainedReadout train_readout(const HarvestedRun& run, readout::ModelKind kind,
                             const Config& cfg);

/// k-step-ahead NRMSE: rows [0, L-k) of the states predict exposed rows
/// [k, L). Throws when k >= the test length.
MetricResult open_loop_eval(const readout::ReadoutModel& model,
                            const reservoir::StateMatrix& states_test,
                            const Matrix& exposed_test, int horizon);

struct ClosedLoopRun {
  Matrix predicted;  // duration x M (possibly truncated on divergence)
  VptResult vpt;
  long start_index = 0;  // row in the test split
  bool diverged = false;
};

struct ClosedLoopSummary {
  std::vector<ClosedLoopRun> runs;
  double mean_vpt = 0.0;  // lyapunov times
  /// Alternating tasks report one mean per source system.
  std::map<std::string, double> per_system_vpt;
};

/// Teacher-force the reservoir over train + test inputs up to each start,
/// then free-run with predictions fed back. Start rows are either 10 evenly
/// spaced test indices or, for alternating tasks, window starts of the
/// requested parity. Divergence truncates the run and scores the VPT at the
/// escape time.
ClosedLoopSummary closed_loop_eval(const readout::ReadoutModel& model,
                                   const HarvestedRun& run, const Config& cfg);

/// Per-sample linear-attention weights around alternating-task boundaries:
/// mean pairwise distance across each boundary divided by the mean
/// within-window distance, averaged over all test-split boundaries.
double attention_boundary_ratio(const readout::LinearAttention& model,
                                const reservoir::StateMatrix& states_test,
                                const std::vector<long>& boundaries, long gap,
                                long washout = 0);

enum class SweepAxis { reservoir_size, sigma_force, horizon_steps };

SweepAxis sweep_axis_from_name(const std::string& name);
std::string sweep_axis_name(SweepAxis axis);

struct SweepSpec {
  SweepAxis axis = SweepAxis::reservoir_size;
  std::vector<double> values;  // strictly increasing, non-empty
  int members = 10;
  std::vector<readout::ModelKind> models = {readout::ModelKind::ridge,
                                            readout::ModelKind::linear_attention};
};

struct ReportRow {
  double axis_value = 0.0;
  std::string model;
  std::string metric;
  double mean = 0.0;
  double std_dev = 0.0;
  int n = 0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  json provenance;
  std::vector<std::string> warnings;
};

/// For each axis value and member seed: regenerate data, harvest once,
/// train every requested readout on the identical StateMatrix, and compute
/// open-loop NRMSE plus closed-loop VPT (skipped for the horizon axis).
/// Member failures are recorded as warnings and excluded from the stats.
ExperimentReport run_sweep(const SweepSpec& spec, const Config& base,
                           int jobs = 1);

void save_report_csv(const std::filesystem::path& path, const ExperimentReport& report);
void save_report_json(const std::filesystem::path& path, const ExperimentReport& report);

/// Ensemble mean/std over `values` (population std).
std::pair<double, double> mean_std(const std::vector<double>& values);

/// Atomic text write (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace attnrc::eval
