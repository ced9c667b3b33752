#pragma once

#include "attnrc/common.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace attnrc::dynamics {

/// Per-channel mean/std, always computed from a training split.
struct StandardizationStats {
  Vector mean;
  Vector std;

  int channels() const { return static_cast<int>(mean.size()); }
};

/// Multi-channel sampled time series. `exposed_mask` marks the channels a
/// reservoir is allowed to observe; hidden channels are kept for reference.
struct Trajectory {
  Matrix samples;  // L x D, row l sampled at t = l * dt_sample
  double dt_sample = 0.0;
  std::vector<std::string> channel_labels;
  std::vector<bool> exposed_mask;

  long rows() const { return samples.rows(); }
  int channels() const { return static_cast<int>(samples.cols()); }

  std::vector<int> exposed_indices() const;
  int exposed_count() const { return static_cast<int>(exposed_indices().size()); }

  /// Copy of the exposed channels only, L x E.
  Matrix exposed() const;
};

/// Population mean/std per channel.
StandardizationStats compute_stats(const Matrix& samples);

/// Per-channel z-score. Throws ConfigError when a std is zero or the
/// channel counts disagree.
Trajectory standardize(const Trajectory& traj, const StandardizationStats& stats);

/// Inverse of standardize.
Trajectory destandardize(const Trajectory& traj, const StandardizationStats& stats);

/// A train/test pair standardized with train-only stats, plus the metadata
/// needed to evaluate predictions (window boundaries for alternating tasks,
/// per-system sampling steps).
struct DatasetSplit {
  Trajectory train;
  Trajectory test;
  StandardizationStats stats;  // computed from the train split
  int target_horizon = 1;      // steps ahead
  std::string id;              // cache key component
  std::uint64_t seed = 0;

  // Alternating-task metadata. Empty / zero for single-system datasets.
  std::vector<long> train_boundaries;
  std::vector<long> test_boundaries;
  std::string first_window_system;  // "roessler" or "lorenz"
  long window = 0;
  double dt_roessler = 0.0;
  double dt_lorenz = 0.0;

  /// Generating system of test window k, alternation continued from train.
  std::string test_window_system(long k) const;

  bool alternating() const { return !first_window_system.empty(); }
};

/// CSV with header `t,ch0,ch1,...` (t = l * dt_sample).
void save_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory load_trajectory_csv(const std::filesystem::path& path);

/// CSV plus `<stem>.json` sidecar carrying dt_sample, labels, exposed mask,
/// seed and standardization stats.
void save_trajectory_bundle(const std::filesystem::path& csv_path,
                            const Trajectory& traj,
                            const StandardizationStats& stats,
                            std::uint64_t seed,
                            const std::vector<long>& boundaries = {});

}  // namespace attnrc::dynamics
