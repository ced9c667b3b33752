#include "attnrc/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace attnrc::dynamics {

std::vector<int> Trajectory::exposed_indices() const {
  std::vector<int> idx;
  for (int c = 0; c < channels(); ++c) {
    if (c < static_cast<int>(exposed_mask.size()) && exposed_mask[c]) idx.push_back(c);
  }
  return idx;
}

Matrix Trajectory::exposed() const {
  const auto idx = exposed_indices();
  Matrix out(rows(), static_cast<long>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<long>(j)) = samples.col(idx[j]);
  return out;
}

std::string DatasetSplit::test_window_system(long k) const {
  if (!alternating() || window <= 0) return "";
  const long global = train.rows() / window + k;
  const bool even = (global % 2 == 0);
  const bool first_is_roessler = (first_window_system == "roessler");
  return (even == first_is_roessler) ? "roessler" : "lorenz";
}

StandardizationStats compute_stats(const Matrix& samples) {
  if (samples.rows() < 1) throw ConfigError("compute_stats: empty sample matrix");
  StandardizationStats stats;
  stats.mean = samples.colwise().mean();
  const Matrix centered = samples.rowwise() - stats.mean.transpose();
  stats.std = (centered.array().square().colwise().mean()).sqrt();
  return stats;
}

static void check_channels(const Trajectory& traj, const StandardizationStats& stats) {
  if (stats.channels() != traj.channels())
    throw ConfigError("standardize: stats have " + std::to_string(stats.channels()) +
                      " channels, trajectory has " + std::to_string(traj.channels()));
}

Trajectory standardize(const Trajectory& traj, const StandardizationStats& stats) {
  check_channels(traj, stats);
  for (int c = 0; c < stats.channels(); ++c) {
    if (stats.std[c] <= 0.0)
      throw ConfigError("standardize: channel " + std::to_string(c) + " has zero std");
  }
  Trajectory out = traj;
  out.samples = (traj.samples.rowwise() - stats.mean.transpose()).array().rowwise() /
                stats.std.transpose().array();
  return out;
}

Trajectory destandardize(const Trajectory& traj, const StandardizationStats& stats) {
  check_channels(traj, stats);
  Trajectory out = traj;
  out.samples = (traj.samples.array().rowwise() * stats.std.transpose().array()).matrix().rowwise() +
                stats.mean.transpose();
  return out;
}

void save_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ostringstream os;
  os << "t";
  for (int c = 0; c < traj.channels(); ++c) os << ",ch" << c;
  os << "\n";
  char buf[32];
  for (long l = 0; l < traj.rows(); ++l) {
    std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(l) * traj.dt_sample);
    os << buf;
    for (int c = 0; c < traj.channels(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", traj.samples(l, c));
      os << ',' << buf;
    }
    os << "\n";
  }
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path.string());
  f << os.str();
}

Trajectory load_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open: " + path.string());
  std::string line;
  if (!std::getline(f, line)) throw ConfigError("empty trajectory file: " + path.string());
  int cols = 0;
  for (char ch : line)
    if (ch == ',') ++cols;  // header `t,ch0,...`: commas == channel count
  std::vector<double> values;
  std::vector<double> times;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    times.push_back(std::stod(cell));
    for (int c = 0; c < cols; ++c) {
      std::getline(ls, cell, ',');
      values.push_back(std::stod(cell));
    }
  }
  Trajectory traj;
  const long rows = static_cast<long>(times.size());
  traj.samples = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
  traj.dt_sample = rows > 1 ? times[1] - times[0] : 0.0;
  traj.channel_labels.resize(cols);
  for (int c = 0; c < cols; ++c) traj.channel_labels[c] = "ch" + std::to_string(c);
  traj.exposed_mask.assign(cols, true);
  return traj;
}

void save_trajectory_bundle(const std::filesystem::path& csv_path, const Trajectory& traj,
                            const StandardizationStats& stats, std::uint64_t seed,
                            const std::vector<long>& boundaries) {
  save_trajectory_csv(csv_path, traj);
  nlohmann::ordered_json meta;
  meta["format_version"] = 1;
  meta["dt_sample"] = traj.dt_sample;
  meta["labels"] = traj.channel_labels;
  std::vector<bool> mask(traj.exposed_mask.begin(), traj.exposed_mask.end());
  meta["exposed_mask"] = mask;
  meta["seed"] = seed;
  meta["stats"]["mean"] = std::vector<double>(stats.mean.data(), stats.mean.data() + stats.mean.size());
  meta["stats"]["std"] = std::vector<double>(stats.std.data(), stats.std.data() + stats.std.size());
  if (!boundaries.empty()) meta["boundaries"] = boundaries;
  std::filesystem::path json_path = csv_path;
  json_path.replace_extension(".json");
  std::ofstream f(json_path);
  if (!f) throw ConfigError("cannot open for writing: " + json_path.string());
  f << meta.dump(2) << "\n";
}

}  // namespace attnrc::dynamics
