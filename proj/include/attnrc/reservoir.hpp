#pragma once

#include "attnrc/common.hpp"
#include "attnrc/mask.hpp"
#include "attnrc/trajectory.hpp"

#include <complex>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

namespace attnrc::reservoir {

enum class CouplingVariant {
  /// Field equation without a carrier term in dE/dt. The injected input
  /// then cannot influence the field, so harvested states are
  /// input-independent; kept for documentation and sanity checks.
  literal,
  /// Conventional normalized form with carrier-gain coupling:
  /// dE/dt = ts*((1 + i a)*n*E - |E|^2 E) + kappa*E(t - tau)*e^{i phi}.
  gain_coupled,
};

/// Lang-Kobayashi laser parameters. Defaults: alpha = 3, phi = 0,
/// kappa = 1e8 1/s, tau = 1.01 T = 5.05e-9 s, p = 1.11, eta = 0.08.
///
/// The nominal parameter set mixes dimensionless relaxation terms with
/// kappa given in 1/s; `time_scale` (1/s) multiplies the dimensionless
/// terms so the field actually responds on the theta = 1e-10 s node grid.
struct LaserParams {
  double alpha_tilde = 3.0;
  double phi = 0.0;
  double kappa = 1e8;    // 1/s
  double tau = 5.05e-9;  // s
  double pump = 1.11;
  double eta = 0.08;
  double time_scale = 1e9;  // 1/s
  CouplingVariant coupling = CouplingVariant::gain_coupled;
};

/// Leaky echo-state surrogate: s' = (1-a) s + a tanh(W s + W_in x).
/// Conventional values, used to validate readouts independently of the
/// laser model.
struct EsnParams {
  double spectral_radius = 0.9;
  double leak = 0.3;
  double input_scale = 1.0;
};

enum class BackendKind { lang_kobayashi, leaky_esn };

struct BackendConfig {
  BackendKind kind = BackendKind::lang_kobayashi;
  int nodes = 50;
  double theta = 1e-10;  // s, node interval (lang_kobayashi)
  double h_sub = 1e-11;  // s, integration sub-step (lang_kobayashi)
  LaserParams laser;
  EsnParams esn;
};

/// Harvested node responses, rows = data points.
struct StateMatrix {
  Matrix data;  // L x N
  bool standardized = false;
  dynamics::StandardizationStats stats;  // per node, set when standardized

  long rows() const { return data.rows(); }
  int nodes() const { return static_cast<int>(data.cols()); }
};

/// Sequential reservoir evolution: one data point in, one node-state row
/// out. History carries over between calls; clone() snapshots the full
/// internal state (used to branch closed-loop free runs).
class ReservoirRunner {
 public:
  virtual ~ReservoirRunner() = default;
  virtual Vector step(const Vector& input) = 0;
  virtual std::unique_ptr<ReservoirRunner> clone() const = 0;
  virtual int node_count() const = 0;
  virtual int input_channels() const = 0;
};

class EsnRunner final : public ReservoirRunner {
 public:
  EsnRunner(int nodes, int channels, const EsnParams& params, std::uint64_t seed);

  Vector step(const Vector& input) override;
  std::unique_ptr<ReservoirRunner> clone() const override;
  int node_count() const override { return static_cast<int>(state_.size()); }
  int input_channels() const override { return static_cast<int>(w_in_.cols()); }

 private:
  Matrix w_;     // N x N, scaled to the requested spectral radius
  Matrix w_in_;  // N x C
  Vector state_;
  double leak_;
};

/// Delay-differential Lang-Kobayashi integrator. RK4 on the h_sub grid with
/// the delayed field linearly interpolated from a ring-buffer history, so
/// tau does not have to be commensurate with theta or h_sub. Intensity
/// |E|^2 is sampled at l T + theta, ..., l T + N theta.
class LaserRunner final : public ReservoirRunner {
 public:
  LaserRunner(int nodes, int channels, const Mask& mask,
              const LaserParams& params, double h_sub, std::uint64_t seed);

  Vector step(const Vector& input) override;
  std::unique_ptr<ReservoirRunner> clone() const override;
  int node_count() const override { return mask_.nodes(); }
  int input_channels() const override { return mask_.channels(); }

 private:
  std::complex<double> delayed_field(double stage_offset) const;
  void substep(double drive);

  Mask mask_;
  LaserParams params_;
  double h_;
  int sub_per_theta_;
  double delay_substeps_;                      // tau / h_sub
  std::vector<std::complex<double>> history_;  // ring buffer, newest at head_
  std::size_t head_ = 0;
  std::complex<double> field_;
  double carrier_ = 0.0;
  long substeps_done_ = 0;
};

std::unique_ptr<ReservoirRunner> make_runner(const BackendConfig& backend,
                                             const Mask& mask, int channels,
                                             std::uint64_t seed);

/// Feed every row of `inputs` through the runner, collecting rows into a
/// StateMatrix. Optional checkpoints clone the runner after the listed rows.
StateMatrix harvest(ReservoirRunner& runner, const Matrix& inputs);
StateMatrix harvest_with_checkpoints(
    ReservoirRunner& runner, const Matrix& inputs,
    const std::vector<long>& checkpoint_rows,
    std::vector<std::unique_ptr<ReservoirRunner>>& snapshots);

/// Trajectory-level entry points wrapping the runners.
StateMatrix run_lang_kobayashi(const dynamics::Trajectory& inputs, const Mask& mask,
                               const LaserParams& params, double h_sub,
                               std::uint64_t seed);
StateMatrix run_leaky_esn(const dynamics::Trajectory& inputs, int nodes,
                          const EsnParams& params, std::uint64_t seed);

/// Per-node z-score. Training states standardize themselves; test states
/// must reuse the training stats. Zero-variance nodes have their std
/// clamped to 1 with a warning (a constant node carries no information).
StateMatrix standardize_states(
    const StateMatrix& states,
    const std::optional<dynamics::StandardizationStats>& stats = std::nullopt);

/// Max column-wise response deviation between two distinct constant inputs;
/// used to detect the input-decoupled literal field equation.
double input_coupling_deviation(const BackendConfig& backend, const Mask& mask,
                                std::uint64_t seed, long probe_points = 40);

std::uint64_t state_matrix_hash(const StateMatrix& states);

/// Versioned binary cache (magic "ARSM"). Load returns nullopt on a missing
/// file and throws ConfigError on version/key mismatch.
void save_state_matrix(const std::filesystem::path& path, const StateMatrix& states,
                       std::uint64_t key);
std::optional<StateMatrix> load_state_matrix(const std::filesystem::path& path,
                                             std::uint64_t key);
void export_state_matrix_csv(const std::filesystem::path& path,
                             const StateMatrix& states);

}  // namespace attnrc::reservoir
