#include "attnrc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace attnrc::eval {

double nrmse(const Matrix& pred, const Matrix& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw ConfigError("nrmse: shape mismatch");
  const long rows = truth.rows();
  if (rows < 2) throw ConfigError("nrmse: need at least 2 points");

  // Population variance of the evaluated target set, summed over target
  // dimensions, so a per-dimension mean predictor scores exactly 1.
  const Eigen::RowVectorXd mean = truth.colwise().mean();
  const double total_variance =
      (truth.rowwise() - mean).squaredNorm() / static_cast<double>(rows);
  if (total_variance <= 0.0) throw NumericalError("nrmse: target variance is zero");

  const double sum_sq = (pred - truth).squaredNorm();
  return std::sqrt(sum_sq / (static_cast<double>(rows) * total_variance));
}

VptResult vpt(const Matrix& pred, const Matrix& truth, double lyapunov, double dt_sample,
              double threshold) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw ConfigError("vpt: shape mismatch");
  if (pred.rows() < 1) throw ConfigError("vpt: empty series");
  if (lyapunov <= 0.0) throw ConfigError("vpt: lyapunov exponent must be positive");
  if (dt_sample <= 0.0) throw ConfigError("vpt: dt_sample must be positive");

  const long rows = truth.rows();
  const Eigen::RowVectorXd mean = truth.colwise().mean();
  const double denom = (truth.rowwise() - mean).squaredNorm() / static_cast<double>(rows);
  if (denom <= 0.0) throw NumericalError("vpt: truth variance is zero");

  VptResult result;
  for (long l = 0; l < rows; ++l) {
    const double delta = (truth.row(l) - pred.row(l)).squaredNorm() / denom;
    if (delta > threshold) {
      result.crossing_index = l;
      result.time = static_cast<double>(l) * dt_sample;
      result.lyapunov_times = result.time * lyapunov;
      return result;
    }
  }
  result.saturated = true;
  result.time = static_cast<double>(rows) * dt_sample;
  result.lyapunov_times = result.time * lyapunov;
  return result;
}

namespace {

// In-place radix-2 Cooley-Tukey; `n` must be a power of two. Plenty for the
// power-of-two Welch segments used here.
void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> w_len(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= w_len;
      }
    }
  }
}

long largest_pow2_at_most(long v) {
  long p = 1;
  while (p * 2 <= v) p *= 2;
  return p;
}

}  // namespace

SpectrumResult power_spectrum(const Vector& series, double dt_sample, long segment) {
  const long length = series.size();
  if (length < 256) throw ConfigError("power_spectrum: series too short (need >= 256 samples)");
  if (dt_sample <= 0.0) throw ConfigError("power_spectrum: dt_sample must be positive");

  if (segment <= 0) segment = std::clamp<long>(largest_pow2_at_most(length / 4), 256, 4096);
  segment = largest_pow2_at_most(segment);
  if (segment > length) throw ConfigError("power_spectrum: segment exceeds series length");

  // Symmetric Hann window (reversal-invariant); 50% overlap.
  Vector window(segment);
  for (long i = 0; i < segment; ++i) {
    const double s =
        std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(segment - 1));
    window[i] = s * s;
  }
  const double window_power = window.squaredNorm();
  const long hop = segment / 2;
  const double fs = 1.0 / dt_sample;

  SpectrumResult result;
  const long bins = segment / 2 + 1;
  result.power = Vector::Zero(bins);
  result.frequencies.resize(bins);
  for (long k = 0; k < bins; ++k)
    result.frequencies[k] = static_cast<double>(k) * fs / static_cast<double>(segment);

  std::vector<std::complex<double>> buffer(segment);
  for (long start = 0; start + segment <= length; start += hop) {
    for (long i = 0; i < segment; ++i)
      buffer[static_cast<std::size_t>(i)] = series[start + i] * window[i];
    fft_radix2(buffer);
    for (long k = 0; k < bins; ++k) {
      double p = std::norm(buffer[static_cast<std::size_t>(k)]);
      if (k != 0 && k != segment / 2) p *= 2.0;  // one-sided
      result.power[k] += p;
    }
    ++result.averaging_windows;
  }
  result.power /= static_cast<double>(result.averaging_windows) * window_power * fs;
  return result;
}

}  // namespace attnrc::eval
