#include "attnrc/reservoir.hpp"

#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

namespace attnrc::reservoir {

std::unique_ptr<ReservoirRunner> make_runner(const BackendConfig& backend, const Mask& mask,
                                             int channels, std::uint64_t seed) {
  switch (backend.kind) {
    case BackendKind::lang_kobayashi:
      return std::make_unique<LaserRunner>(backend.nodes, channels, mask, backend.laser,
                                           backend.h_sub, seed);
    case BackendKind::leaky_esn:
      return std::make_unique<EsnRunner>(backend.nodes, channels, backend.esn, seed);
  }
  throw ConfigError("make_runner: unknown backend kind");
}

StateMatrix harvest(ReservoirRunner& runner, const Matrix& inputs) {
  std::vector<std::unique_ptr<ReservoirRunner>> unused;
  return harvest_with_checkpoints(runner, inputs, {}, unused);
}

StateMatrix harvest_with_checkpoints(ReservoirRunner& runner, const Matrix& inputs,
                                     const std::vector<long>& checkpoint_rows,
                                     std::vector<std::unique_ptr<ReservoirRunner>>& snapshots) {
  StateMatrix states;
  states.data.resize(inputs.rows(), runner.node_count());
  std::size_t next_checkpoint = 0;
  snapshots.clear();
  for (long l = 0; l < inputs.rows(); ++l) {
    states.data.row(l) = runner.step(inputs.row(l).transpose());
    if (next_checkpoint < checkpoint_rows.size() && checkpoint_rows[next_checkpoint] == l) {
      snapshots.push_back(runner.clone());
      ++next_checkpoint;
    }
  }
  if (!states.data.allFinite())
    throw NumericalError("harvest produced non-finite reservoir states");
  return states;
}

StateMatrix run_lang_kobayashi(const dynamics::Trajectory& inputs, const Mask& mask,
                               const LaserParams& params, double h_sub, std::uint64_t seed) {
  const Matrix exposed = inputs.exposed();
  LaserRunner runner(mask.nodes(), static_cast<int>(exposed.cols()), mask, params, h_sub, seed);
  return harvest(runner, exposed);
}

StateMatrix run_leaky_esn(const dynamics::Trajectory& inputs, int nodes, const EsnParams& params,
                          std::uint64_t seed) {
  const Matrix exposed = inputs.exposed();
  EsnRunner runner(nodes, static_cast<int>(exposed.cols()), params, seed);
  return harvest(runner, exposed);
}

StateMatrix standardize_states(const StateMatrix& states,
                               const std::optional<dynamics::StandardizationStats>& stats) {
  dynamics::StandardizationStats node_stats =
      stats ? *stats : dynamics::compute_stats(states.data);
  if (node_stats.channels() != states.nodes())
    throw ConfigError("standardize_states: node-count mismatch with supplied stats");
  for (int n = 0; n < node_stats.channels(); ++n) {
    if (node_stats.std[n] <= 0.0) {
      std::cerr << "[attnrc] warning: node " << n
                << " has zero variance; std clamped to 1\n";
      node_stats.std[n] = 1.0;
    }
  }
  StateMatrix out;
  out.data = (states.data.rowwise() - node_stats.mean.transpose()).array().rowwise() /
             node_stats.std.transpose().array();
  out.standardized = true;
  out.stats = std::move(node_stats);
  return out;
}

double input_coupling_deviation(const BackendConfig& backend, const Mask& mask,
                                std::uint64_t seed, long probe_points) {
  const int channels = mask.channels();
  Matrix inputs_a(probe_points, channels), inputs_b(probe_points, channels);
  Rng rng_a(derive_seed(seed, "probe_a"));
  Rng rng_b(derive_seed(seed, "probe_b"));
  for (long l = 0; l < probe_points; ++l)
    for (int c = 0; c < channels; ++c) {
      inputs_a(l, c) = rng_a.uniform(-1.0, 1.0);
      inputs_b(l, c) = rng_b.uniform(-1.0, 1.0);
    }
  auto runner_a = make_runner(backend, mask, channels, seed);
  auto runner_b = make_runner(backend, mask, channels, seed);
  const StateMatrix states_a = harvest(*runner_a, inputs_a);
  const StateMatrix states_b = harvest(*runner_b, inputs_b);
  return (states_a.data - states_b.data).cwiseAbs().maxCoeff();
}

std::uint64_t state_matrix_hash(const StateMatrix& states) {
  return fnv1a64(states.data.data(), sizeof(double) * static_cast<std::size_t>(states.data.size()));
}

namespace {
constexpr char kMagic[4] = {'A', 'R', 'S', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_pod(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return static_cast<bool>(is);
}
}  // namespace

void save_state_matrix(const std::filesystem::path& path, const StateMatrix& states,
                       std::uint64_t key) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw ConfigError("cannot open cache file for writing: " + tmp.string());
    f.write(kMagic, 4);
    write_pod(f, kVersion);
    write_pod(f, key);
    const std::uint64_t rows = states.rows(), cols = states.nodes();
    write_pod(f, rows);
    write_pod(f, cols);
    const std::uint8_t standardized = states.standardized ? 1 : 0;
    write_pod(f, standardized);
    if (states.standardized) {
      f.write(reinterpret_cast<const char*>(states.stats.mean.data()), sizeof(double) * cols);
      f.write(reinterpret_cast<const char*>(states.stats.std.data()), sizeof(double) * cols);
    }
    f.write(reinterpret_cast<const char*>(states.data.data()),
            sizeof(double) * static_cast<std::size_t>(states.data.size()));
  }
  std::filesystem::rename(tmp, path);
}

std::optional<StateMatrix> load_state_matrix(const std::filesystem::path& path,
                                             std::uint64_t key) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return std::nullopt;
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw ConfigError("state cache has wrong magic: " + path.string());
  std::uint32_t version = 0;
  std::uint64_t stored_key = 0, rows = 0, cols = 0;
  std::uint8_t standardized = 0;
  if (!read_pod(f, version) || version != kVersion)
    throw ConfigError("state cache has unsupported version: " + path.string());
  if (!read_pod(f, stored_key) || stored_key != key)
    throw ConfigError("state cache key mismatch: " + path.string());
  if (!read_pod(f, rows) || !read_pod(f, cols) || !read_pod(f, standardized))
    throw ConfigError("truncated state cache: " + path.string());
  StateMatrix states;
  states.standardized = standardized != 0;
  if (states.standardized) {
    states.stats.mean.resize(static_cast<long>(cols));
    states.stats.std.resize(static_cast<long>(cols));
    f.read(reinterpret_cast<char*>(states.stats.mean.data()), sizeof(double) * cols);
    f.read(reinterpret_cast<char*>(states.stats.std.data()), sizeof(double) * cols);
  }
  states.data.resize(static_cast<long>(rows), static_cast<long>(cols));
  f.read(reinterpret_cast<char*>(states.data.data()),
         sizeof(double) * static_cast<std::size_t>(states.data.size()));
  if (!f) throw ConfigError("truncated state cache: " + path.string());
  return states;
}

void export_state_matrix_csv(const std::filesystem::path& path, const StateMatrix& states) {
  std::ostringstream os;
  for (int n = 0; n < states.nodes(); ++n) os << (n ? "," : "") << "node" << n;
  os << "\n";
  char buf[32];
  for (long l = 0; l < states.rows(); ++l) {
    for (int n = 0; n < states.nodes(); ++n) {
      std::snprintf(buf, sizeof(buf), "%.17g", states.data(l, n));
      os << (n ? "," : "") << buf;
    }
    os << "\n";
  }
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot open for writing: " + path.string());
  f << os.str();
}

}  // namespace attnrc::reservoir
