#pragma once

#include "attnrc/common.hpp"

#include <string>

namespace attnrc::eval {

struct MetricResult {
  std::string name;
  double value = 0.0;
  std::string unit;  // "dimensionless" or "lyapunov_times"
  double ensemble_mean = 0.0;
  double ensemble_std = 0.0;
  int n_members = 1;
};

/// sqrt( sum_l ||d_l - y_l||^2 / (L * Var(Y)) ) with Var(Y) the population
/// variance of the evaluated target set (summed over target dimensions), so
/// the mean predictor scores exactly 1. Throws NumericalError on zero
/// variance, ConfigError on shape mismatch or L < 2.
double nrmse(const Matrix& pred, const Matrix& truth);

struct VptResult {
  double lyapunov_times = 0.0;
  double time = 0.0;        // same value in model-time units
  long crossing_index = -1; // -1 when never exceeded
  bool saturated = false;
};

/// Valid prediction time: delta(t) = ||y_t - d_t||^2 / <||y - <y>||^2>,
/// with the time-averaged denominator taken over the truth series. Returns
/// the first time delta exceeds `threshold`, in units of Lyapunov times;
/// when never exceeded, the full duration with `saturated` set.
VptResult vpt(const Matrix& pred, const Matrix& truth, double lyapunov,
              double dt_sample, double threshold = 0.4);

struct SpectrumResult {
  Vector frequencies;  // cycles per model-time unit, uniform grid
  Vector power;        // non-negative
  int averaging_windows = 0;
};

/// Welch-averaged periodogram: Hann window, 50% overlap, power-of-two
/// segments. Requires L >= 256 (ConfigError otherwise). `segment` <= 0
/// picks the largest power of two <= L/4, clamped to [256, 4096].
SpectrumResult power_spectrum(const Vector& series, double dt_sample,
                              long segment = 0);

}  // namespace attnrc::eval
