#pragma once

#include "attnrc/common.hpp"
#include "attnrc/trajectory.hpp"

#include <functional>
#include <map>
#include <string>

namespace attnrc::dynamics {

/// Autonomous-or-driven vector field with named parameters. `rhs` must be
/// deterministic given (state, t).
struct OdeSystem {
  int dimension = 0;
  std::function<void(double t, const Vector& state, Vector& deriv)> rhs;
  std::map<std::string, double> parameters;
  std::string name;
};

OdeSystem lorenz_system(double a = 10.0, double b = 28.0, double c = 8.0 / 3.0);

/// Standard chaotic form: x' = -y - z, y' = x + a y, z' = b + z (x - c).
OdeSystem roessler_system(double a = 0.2, double b = 0.2, double c = 5.7);

/// Two Lorenz systems, the first driven by the second through sigma_force.
/// State layout: (x1, y1, z1, x2, y2, z2); the driver (subsystem 2) is
/// autonomous.
OdeSystem coupled_lorenz_system(double sigma_force, double a = 10.0,
                                double b = 28.0, double c = 8.0 / 3.0);

/// One fixed step of the Dormand-Prince 5(4) scheme. Returns the embedded
/// 4th/5th-order error-estimate norm; the step size is never adapted.
double dopri5_step(const OdeSystem& system, double t, Vector& state, double h);

struct IntegrationResult {
  Matrix states;          // (n_steps + 1) x dim, row 0 = initial state
  Vector error_estimate;  // embedded error norm per step (recorded, unused)
};

/// Fixed-step integration; throws NumericalError naming the step index if a
/// non-finite state appears.
IntegrationResult integrate_fixed_step(const OdeSystem& system,
                                       const Vector& initial, double h,
                                       long n_steps);

/// Unidirectionally-coupled two-Lorenz dataset: integrated at h = 0.01,
/// downsampled x10 to dt_sample = 0.1, transient discarded, channels
/// (x1, y1, z1) exposed and (x2, y2, z2) hidden, standardized by train stats.
DatasetSplit build_uctls(double sigma_force, long n_train, long n_test,
                         std::uint64_t seed);

enum class AlrsExposure {
  x_only,  // open-loop target, 1 channel
  xyz,     // closed-loop target, 3 channels
};

/// Alternating Lorenz-Roessler dataset: per-system series are standardized
/// before concatenation, windows alternate R,L,R,L,... and boundary indices
/// are recorded. `window` must divide both lengths.
DatasetSplit build_alrs(long n_train, long n_test, long window,
                        std::uint64_t seed,
                        AlrsExposure exposure = AlrsExposure::x_only);

struct LyapunovOptions {
  double transient_time = 100.0;  // settle onto the attractor first
  double renorm_interval = 1.0;   // time between renormalizations
  double separation = 1e-8;       // perturbation magnitude d0
  int discard_cycles = 10;        // align with the expanding direction
  bool expect_chaotic = false;    // sets `warning` if the estimate is <= 0
};

struct LyapunovEstimate {
  double value = 0.0;    // 1/time
  double horizon = 0.0;  // time actually accumulated
  std::string warning;   // non-empty on suspicious results
};

/// Benettin two-trajectory estimate of the largest Lyapunov exponent.
/// Deterministic given seed.
LyapunovEstimate largest_lyapunov(const OdeSystem& system, double h,
                                  double horizon, std::uint64_t seed,
                                  const LyapunovOptions& opts = {});

}  // namespace attnrc::dynamics
