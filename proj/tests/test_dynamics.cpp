#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "attnrc/dynamics.hpp"

#include <cmath>

using namespace attnrc;
using namespace attnrc::dynamics;

namespace {

OdeSystem zero_field(int dim) {
  OdeSystem sys;
  sys.dimension = dim;
  sys.rhs = [](double, const Vector&, Vector& ds) { ds.setZero(); };
  return sys;
}

OdeSystem linear_decay() {
  OdeSystem sys;
  sys.dimension = 1;
  sys.rhs = [](double, const Vector& s, Vector& ds) { ds = -s; };
  return sys;
}

}  // namespace

TEST_CASE("fixed-step integrator matches the exponential closed form") {
  Vector s0(1);
  s0 << 1.0;
  const auto run = integrate_fixed_step(linear_decay(), s0, 0.01, 100);
  CHECK(run.states.rows() == 101);
  CHECK(run.states(100, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
  // Embedded error estimates are recorded but never used for adaptation.
  CHECK(run.error_estimate.size() == 100);
  CHECK(run.error_estimate.maxCoeff() < 1e-10);
}

TEST_CASE("zero vector field leaves the state fixed") {
  Vector s0(3);
  s0 << 0.3, -1.2, 7.0;
  const auto run = integrate_fixed_step(zero_field(3), s0, 0.1, 50);
  for (long l = 0; l <= 50; ++l) CHECK((run.states.row(l).transpose() - s0).norm() == 0.0);
}

TEST_CASE("Lorenz trajectories converge onto the bounded attractor") {
  Vector s0(3);
  s0 << 40.0, -35.0, 90.0;  // far off the attractor
  const auto run = integrate_fixed_step(lorenz_system(), s0, 0.01, 20000);
  // Long-run |x| bound checked by brute-force integration: past the
  // transient the butterfly keeps |x| well under 25.
  CHECK(run.states.col(0).tail(15000).cwiseAbs().maxCoeff() < 25.0);
  CHECK(run.states.allFinite());
}

TEST_CASE("divergence names the failing step") {
  OdeSystem blowup;
  blowup.dimension = 1;
  blowup.rhs = [](double, const Vector& s, Vector& ds) { ds = s.array().square().matrix(); };
  Vector s0(1);
  s0 << 1e3;
  CHECK_THROWS_AS(integrate_fixed_step(blowup, s0, 1.0, 50), NumericalError);
}

TEST_CASE("uctls with zero forcing reduces to a single Lorenz system") {
  Vector s0(6);
  s0 << 0.3, -0.1, 0.9, 0.5, 0.2, -0.4;
  const auto coupled = integrate_fixed_step(coupled_lorenz_system(0.0), s0, 0.01, 2000);
  const auto single = integrate_fixed_step(lorenz_system(), s0.head(3), 0.01, 2000);
  CHECK((coupled.states.leftCols(3) - single.states).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("uctls dataset has the documented shape and exposure") {
  const auto split = build_uctls(0.05, 2000, 500, 7);
  CHECK(split.train.rows() == 2000);
  CHECK(split.test.rows() == 500);
  CHECK(split.train.channels() == 6);
  CHECK(split.train.exposed_count() == 3);
  CHECK(split.train.exposed().cols() == 3);
  CHECK(split.train.samples.allFinite());
  CHECK(split.test.samples.allFinite());
  CHECK(split.train.dt_sample == doctest::Approx(0.1));

  // Standardized by train stats: per-channel train mean ~0, std ~1.
  const auto stats = compute_stats(split.train.samples);
  CHECK(stats.mean.cwiseAbs().maxCoeff() < 1e-10);
  CHECK((stats.std.array() - 1.0).abs().maxCoeff() < 1e-10);
}

TEST_CASE("uctls dataset is bit-reproducible per seed") {
  const auto a = build_uctls(0.05, 500, 200, 42);
  const auto b = build_uctls(0.05, 500, 200, 42);
  const auto c = build_uctls(0.05, 500, 200, 43);
  CHECK((a.train.samples - b.train.samples).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.test.samples - b.test.samples).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.train.samples - c.train.samples).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("alrs alternates windows and records boundaries") {
  const auto split = build_alrs(5000, 1000, 500, 3);
  CHECK(split.train.rows() == 5000);
  CHECK(split.train_boundaries.size() == 9);  // 10 windows
  CHECK(split.train_boundaries.front() == 500);
  CHECK(split.train_boundaries.back() == 4500);
  CHECK(split.first_window_system == "roessler");
  CHECK(split.train.channels() == 1);

  // Each system's train windows concatenate to mean ~0, std ~1.
  std::vector<double> roessler_values, lorenz_values;
  for (long w = 0; w < 10; ++w) {
    for (long i = 0; i < 500; ++i) {
      const double v = split.train.samples(w * 500 + i, 0);
      (w % 2 == 0 ? roessler_values : lorenz_values).push_back(v);
    }
  }
  auto mean_of = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
  };
  CHECK(std::abs(mean_of(roessler_values)) < 1e-9);
  CHECK(std::abs(mean_of(lorenz_values)) < 1e-9);
}

TEST_CASE("alrs closed-loop exposure carries three channels") {
  const auto split = build_alrs(2000, 1000, 500, 3, AlrsExposure::xyz);
  CHECK(split.train.channels() == 3);
  CHECK(split.test_window_system(0) == "roessler");  // 4 train windows, parity continues
  CHECK(split.test_window_system(1) == "lorenz");
}

TEST_CASE("alrs rejects a window that does not divide the lengths") {
  CHECK_THROWS_AS(build_alrs(5200, 1000, 500, 3), ConfigError);
  CHECK_THROWS_AS(build_alrs(5000, 1100, 500, 3), ConfigError);
}

TEST_CASE("standardize round-trips and rejects zero variance") {
  Trajectory traj;
  traj.samples.resize(50, 2);
  Rng rng(5);
  for (long i = 0; i < 50; ++i) {
    traj.samples(i, 0) = rng.uniform(-3.0, 3.0);
    traj.samples(i, 1) = rng.uniform(5.0, 9.0);
  }
  traj.channel_labels = {"a", "b"};
  traj.exposed_mask = {true, true};

  const auto stats = compute_stats(traj.samples);
  const auto standardized = standardize(traj, stats);
  const auto self_stats = compute_stats(standardized.samples);
  CHECK(self_stats.mean.cwiseAbs().maxCoeff() < 1e-12);
  CHECK((self_stats.std.array() - 1.0).abs().maxCoeff() < 1e-12);

  const auto back = destandardize(standardized, stats);
  CHECK((back.samples - traj.samples).cwiseAbs().maxCoeff() < 1e-12);

  Trajectory flat = traj;
  flat.samples.col(1).setConstant(4.0);
  CHECK_THROWS_AS(standardize(flat, compute_stats(flat.samples)), ConfigError);
}

TEST_CASE("lyapunov estimate recovers the analytic contraction rate") {
  const auto est = largest_lyapunov(linear_decay(), 0.01, 100.0, 11);
  CHECK(est.value == doctest::Approx(-1.0).epsilon(0.01));
  CHECK(est.warning.empty());
}

TEST_CASE("lyapunov estimate for Lorenz sits near the classic value") {
  const auto est = largest_lyapunov(lorenz_system(), 0.01, 2000.0, 11);
  CHECK(est.value == doctest::Approx(0.91).epsilon(0.06));
}

TEST_CASE("lyapunov warns when a declared-chaotic system contracts") {
  LyapunovOptions opts;
  opts.expect_chaotic = true;
  const auto est = largest_lyapunov(linear_decay(), 0.01, 50.0, 2, opts);
  CHECK(est.value < 0.0);
  CHECK(!est.warning.empty());
}
