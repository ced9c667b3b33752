#include "attnrc/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace attnrc::dynamics {

OdeSystem lorenz_system(double a, double b, double c) {
  OdeSystem sys;
  sys.dimension = 3;
  sys.parameters = {{"a", a}, {"b", b}, {"c", c}};
  sys.name = "lorenz";
  sys.rhs = [a, b, c](double, const Vector& s, Vector& ds) {
    ds[0] = a * (s[1] - s[0]);
    ds[1] = s[0] * (b - s[2]) - s[1];
    ds[2] = s[0] * s[1] - c * s[2];
  };
  return sys;
}

OdeSystem roessler_system(double a, double b, double c) {
  OdeSystem sys;
  sys.dimension = 3;
  sys.parameters = {{"a", a}, {"b", b}, {"c", c}};
  sys.name = "roessler";
  sys.rhs = [a, b, c](double, const Vector& s, Vector& ds) {
    ds[0] = -s[1] - s[2];
    ds[1] = s[0] + a * s[1];
    ds[2] = b + s[2] * (s[0] - c);
  };
  return sys;
}

OdeSystem coupled_lorenz_system(double sigma_force, double a, double b, double c) {
  OdeSystem sys;
  sys.dimension = 6;
  sys.parameters = {{"a", a}, {"b", b}, {"c", c}, {"sigma_force", sigma_force}};
  sys.name = "uctls";
  sys.rhs = [sigma_force, a, b, c](double, const Vector& s, Vector& ds) {
    const double x1 = s[0], y1 = s[1], z1 = s[2];
    const double x2 = s[3], y2 = s[4], z2 = s[5];
    ds[0] = (a + sigma_force * x2) * (y1 - x1);
    ds[1] = x1 * (b + sigma_force * y2 - z1) - y1;
    ds[2] = x1 * y1 - (c + sigma_force * z2) * z1;
    ds[3] = a * (y2 - x2);
    ds[4] = x2 * (b - z2) - y2;
    ds[5] = x2 * y2 - c * z2;
  };
  return sys;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
// 5th-order solution weights (row 7 of A) and the 4th-order embedded weights.
constexpr double kB5[7] = {35.0 / 384,     0.0,  500.0 / 1113, 125.0 / 192,
                           -2187.0 / 6784, 11.0 / 84, 0.0};
constexpr double kB4[7] = {5179.0 / 57600,  0.0,   7571.0 / 16695, 393.0 / 640,
                           -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

}  // namespace

double dopri5_step(const OdeSystem& system, double t, Vector& state, double h) {
  const int dim = system.dimension;
  Eigen::Matrix<double, Eigen::Dynamic, 7> k(dim, 7);
  Vector work(dim), deriv(dim);

  for (int stage = 0; stage < 7; ++stage) {
    work = state;
    for (int j = 0; j < stage; ++j)
      if (kA[stage][j] != 0.0) work += (h * kA[stage][j]) * k.col(j);
    system.rhs(t + kC[stage] * h, work, deriv);
    k.col(stage) = deriv;
  }

  Vector next = state;
  Vector err = Vector::Zero(dim);
  for (int stage = 0; stage < 7; ++stage) {
    if (kB5[stage] != 0.0) next += (h * kB5[stage]) * k.col(stage);
    err += (h * (kB5[stage] - kB4[stage])) * k.col(stage);
  }
  state = next;
  return err.norm();
}

IntegrationResult integrate_fixed_step(const OdeSystem& system, const Vector& initial,
                                       double h, long n_steps) {
  if (h <= 0.0) throw ConfigError("integrate_fixed_step: step size must be positive");
  if (initial.size() != system.dimension)
    throw ConfigError("integrate_fixed_step: initial state dimension mismatch");

  IntegrationResult result;
  result.states.resize(n_steps + 1, system.dimension);
  result.error_estimate.resize(n_steps);
  Vector state = initial;
  result.states.row(0) = state;
  for (long step = 0; step < n_steps; ++step) {
    result.error_estimate[step] = dopri5_step(system, static_cast<double>(step) * h, state, h);
    if (!state.allFinite())
      throw NumericalError("integration diverged at step " + std::to_string(step + 1));
    result.states.row(step + 1) = state;
  }
  return result;
}

namespace {

// Integrate with transient discard, then keep every `downsample`-th state.
Matrix sample_system(const OdeSystem& sys, const Vector& initial, double h,
                     long transient_samples, long n_samples, long downsample) {
  const long total_steps = (transient_samples + n_samples) * downsample;
  const auto run = integrate_fixed_step(sys, initial, h, total_steps);
  Matrix out(n_samples, sys.dimension);
  for (long l = 0; l < n_samples; ++l)
    out.row(l) = run.states.row((transient_samples + l) * downsample);
  return out;
}

Vector random_state(Rng& rng, int dim) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.uniform(-1.0, 1.0);
  return v;
}

constexpr long kTransientSamples = 1000;

}  // namespace

DatasetSplit build_uctls(double sigma_force, long n_train, long n_test, std::uint64_t seed) {
  if (sigma_force < 0.0) throw ConfigError("build_uctls: sigma_force must be >= 0");
  if (n_train < 2 || n_test < 1) throw ConfigError("build_uctls: split too short");

  const auto sys = coupled_lorenz_system(sigma_force);
  Rng rng(derive_seed(seed, "uctls_init"));
  const Vector initial = random_state(rng, 6);

  const double h = 0.01;
  const long downsample = 10;  // dt_sample = 0.1
  const Matrix samples = sample_system(sys, initial, h, kTransientSamples, n_train + n_test, downsample);

  Trajectory full;
  full.samples = samples;
  full.dt_sample = h * static_cast<double>(downsample);
  full.channel_labels = {"x1", "y1", "z1", "x2", "y2", "z2"};
  full.exposed_mask = {true, true, true, false, false, false};

  DatasetSplit split;
  split.seed = seed;
  split.id = "uctls_s" + std::to_string(sigma_force) + "_n" + std::to_string(n_train) + "+" +
             std::to_string(n_test) + "_seed" + std::to_string(seed);
  Trajectory train = full;
  train.samples = full.samples.topRows(n_train);
  Trajectory test = full;
  test.samples = full.samples.bottomRows(n_test);

  split.stats = compute_stats(train.samples);
  split.train = standardize(train, split.stats);
  split.test = standardize(test, split.stats);
  return split;
}

DatasetSplit build_alrs(long n_train, long n_test, long window, std::uint64_t seed,
                        AlrsExposure exposure) {
  if (window <= 0) throw ConfigError("build_alrs: window must be positive");
  if (n_train % window != 0 || n_test % window != 0)
    throw ConfigError("build_alrs: window must divide n_train and n_test");

  const long windows_train = n_train / window;
  const long windows_test = n_test / window;
  const long windows_total = windows_train + windows_test;
  // Windows alternate R,L,R,L,... with the parity continuing across the
  // train/test boundary.
  const long n_roessler_windows = (windows_total + 1) / 2;
  const long n_lorenz_windows = windows_total / 2;

  Rng rng(derive_seed(seed, "alrs_init"));
  const Vector init_r = random_state(rng, 3);
  const Vector init_l = random_state(rng, 3);

  // One continuous run per system, sliced into consecutive windows.
  const Matrix roessler_raw =
      sample_system(roessler_system(), init_r, 0.05, kTransientSamples, n_roessler_windows * window, 10);
  const Matrix lorenz_raw =
      sample_system(lorenz_system(), init_l, 0.01, kTransientSamples, n_lorenz_windows * window, 10);

  // Standardize each system over its training portion before concatenation.
  const long train_r_rows = std::min<long>(((windows_train + 1) / 2) * window, roessler_raw.rows());
  const long train_l_rows = std::min<long>((windows_train / 2) * window, lorenz_raw.rows());
  const StandardizationStats stats_r = compute_stats(roessler_raw.topRows(std::max<long>(train_r_rows, 1)));
  const StandardizationStats stats_l = compute_stats(lorenz_raw.topRows(std::max<long>(train_l_rows, 1)));
  const Matrix roessler_std = (roessler_raw.rowwise() - stats_r.mean.transpose()).array().rowwise() /
                              stats_r.std.transpose().array();
  const Matrix lorenz_std = (lorenz_raw.rowwise() - stats_l.mean.transpose()).array().rowwise() /
                            stats_l.std.transpose().array();

  const int channels = exposure == AlrsExposure::x_only ? 1 : 3;
  Matrix concatenated(n_train + n_test, channels);
  long next_r = 0, next_l = 0;
  for (long w = 0; w < windows_total; ++w) {
    const Matrix& source = (w % 2 == 0) ? roessler_std : lorenz_std;
    long& cursor = (w % 2 == 0) ? next_r : next_l;
    concatenated.block(w * window, 0, window, channels) =
        source.block(cursor, 0, window, channels);
    cursor += window;
  }

  Trajectory full;
  full.samples = concatenated;
  full.dt_sample = 1.0;  // sample units; per-system physical steps in the split metadata
  if (channels == 1) {
    full.channel_labels = {"x"};
    full.exposed_mask = {true};
  } else {
    full.channel_labels = {"x", "y", "z"};
    full.exposed_mask = {true, true, true};
  }

  DatasetSplit split;
  split.seed = seed;
  split.id = "alrs_w" + std::to_string(window) + "_n" + std::to_string(n_train) + "+" +
             std::to_string(n_test) + "_c" + std::to_string(channels) + "_seed" + std::to_string(seed);
  split.train = full;
  split.train.samples = concatenated.topRows(n_train);
  split.test = full;
  split.test.samples = concatenated.bottomRows(n_test);
  split.stats = compute_stats(split.train.samples);
  split.first_window_system = "roessler";
  split.window = window;
  split.dt_roessler = 0.5;
  split.dt_lorenz = 0.1;
  for (long b = window; b < n_train; b += window) split.train_boundaries.push_back(b);
  for (long b = window; b < n_test; b += window) split.test_boundaries.push_back(b);
  return split;
}

LyapunovEstimate largest_lyapunov(const OdeSystem& system, double h, double horizon,
                                  std::uint64_t seed, const LyapunovOptions& opts) {
  if (h <= 0.0 || horizon <= 0.0)
    throw ConfigError("largest_lyapunov: h and horizon must be positive");

  Rng rng(derive_seed(seed, "lyapunov"));
  Vector reference = random_state(rng, system.dimension);

  const long transient_steps = static_cast<long>(std::ceil(opts.transient_time / h));
  for (long s = 0; s < transient_steps; ++s) {
    dopri5_step(system, static_cast<double>(s) * h, reference, h);
    if (!reference.allFinite())
      throw NumericalError("lyapunov transient diverged at step " + std::to_string(s + 1));
  }

  Vector direction = random_state(rng, system.dimension);
  direction.normalize();
  Vector perturbed = reference + opts.separation * direction;

  const long steps_per_cycle = std::max<long>(1, static_cast<long>(std::round(opts.renorm_interval / h)));
  const double cycle_time = static_cast<double>(steps_per_cycle) * h;
  const long cycles = static_cast<long>(std::ceil(horizon / cycle_time)) + opts.discard_cycles;

  double log_sum = 0.0;
  double measured_time = 0.0;
  double t = 0.0;
  for (long cycle = 0; cycle < cycles; ++cycle) {
    for (long s = 0; s < steps_per_cycle; ++s) {
      dopri5_step(system, t, reference, h);
      dopri5_step(system, t, perturbed, h);
      t += h;
    }
    if (!reference.allFinite() || !perturbed.allFinite())
      throw NumericalError("lyapunov integration diverged in cycle " + std::to_string(cycle + 1));
    const double dist = (perturbed - reference).norm();
    if (dist <= 0.0)
      throw NumericalError("lyapunov separation collapsed to zero");
    if (cycle >= opts.discard_cycles) {
      log_sum += std::log(dist / opts.separation);
      measured_time += cycle_time;
    }
    perturbed = reference + (opts.separation / dist) * (perturbed - reference);
  }

  LyapunovEstimate est;
  est.value = log_sum / measured_time;
  est.horizon = measured_time;
  if (opts.expect_chaotic && est.value <= 0.0)
    est.warning = "expected chaotic dynamics but the largest exponent is non-positive";
  return est;
}

}  // namespace attnrc::dynamics
