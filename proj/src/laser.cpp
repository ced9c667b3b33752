#include "attnrc/reservoir.hpp"

#include <cmath>

namespace attnrc::reservoir {

namespace {

/// Solitary-laser steady-state intensity: I (1 + I) = p.
double solitary_intensity(double pump) {
  return 0.5 * (-1.0 + std::sqrt(1.0 + 4.0 * pump));
}

}  // namespace

LaserRunner::LaserRunner(int nodes, int channels, const Mask& mask,
                         const LaserParams& params, double h_sub, std::uint64_t seed)
    : mask_(mask), params_(params), h_(h_sub) {
  if (mask_.nodes() != nodes)
    throw ConfigError("LaserRunner: mask row count must equal the node count");
  if (mask_.channels() != channels)
    throw ConfigError("LaserRunner: mask channel count mismatch");
  if (h_sub <= 0.0) throw ConfigError("LaserRunner: h_sub must be positive");
  if (params.tau <= 0.0) throw ConfigError("LaserRunner: tau must be positive");

  const double ratio = mask_.theta / h_sub;
  sub_per_theta_ = static_cast<int>(std::llround(ratio));
  if (sub_per_theta_ < 1 || std::abs(ratio - sub_per_theta_) > 1e-9 * ratio)
    throw ConfigError("LaserRunner: h_sub must divide theta");

  delay_substeps_ = params.tau / h_sub;  // honored via interpolation
  if (delay_substeps_ < 1.0)
    throw ConfigError("LaserRunner: tau must be at least h_sub");
  const std::size_t hist_len = static_cast<std::size_t>(std::floor(delay_substeps_)) + 3;

  const double intensity = solitary_intensity(params.pump);
  const double amplitude = std::sqrt(intensity);
  carrier_ = intensity;
  history_.assign(hist_len, std::complex<double>(amplitude, 0.0));
  head_ = 0;

  // Small seeded kick off the symmetric state; the washout removes it.
  Rng rng(derive_seed(seed, "laser_init"));
  field_ = std::complex<double>(amplitude * (1.0 + 1e-4 * rng.uniform(-1.0, 1.0)),
                                amplitude * 1e-4 * rng.uniform(-1.0, 1.0));
  history_[head_] = field_;
}

std::complex<double> LaserRunner::delayed_field(double stage_offset) const {
  // E(t_now + stage_offset*h - tau), linearly interpolated on the h grid.
  const double q = delay_substeps_ - stage_offset;
  const auto j0 = static_cast<std::size_t>(q);
  const double frac = q - static_cast<double>(j0);
  const std::size_t len = history_.size();
  const std::size_t newer = (head_ + len - j0 % len) % len;
  const std::size_t older = (newer + len - 1) % len;
  return (1.0 - frac) * history_[newer] + frac * history_[older];
}

void LaserRunner::substep(double drive) {
  const double ts = params_.time_scale;
  const double alpha = params_.alpha_tilde;
  const std::complex<double> feedback_phase = std::polar(params_.kappa, params_.phi);
  const std::complex<double> gain_factor(1.0, alpha);
  const bool gain_coupled = params_.coupling == CouplingVariant::gain_coupled;
  const double injection = params_.pump + params_.eta * drive;

  const auto rhs = [&](const std::complex<double>& e, double n, double stage_offset,
                       std::complex<double>& de, double& dn) {
    const double intensity = std::norm(e);
    const std::complex<double> gain = gain_coupled ? gain_factor * n : gain_factor;
    de = ts * (gain * e - intensity * e) + feedback_phase * delayed_field(stage_offset);
    dn = ts * (injection - (1.0 + intensity) * n);
  };

  std::complex<double> k1e, k2e, k3e, k4e;
  double k1n, k2n, k3n, k4n;
  rhs(field_, carrier_, 0.0, k1e, k1n);
  rhs(field_ + 0.5 * h_ * k1e, carrier_ + 0.5 * h_ * k1n, 0.5, k2e, k2n);
  rhs(field_ + 0.5 * h_ * k2e, carrier_ + 0.5 * h_ * k2n, 0.5, k3e, k3n);
  rhs(field_ + h_ * k3e, carrier_ + h_ * k3n, 1.0, k4e, k4n);

  field_ += (h_ / 6.0) * (k1e + 2.0 * k2e + 2.0 * k3e + k4e);
  carrier_ += (h_ / 6.0) * (k1n + 2.0 * k2n + 2.0 * k3n + k4n);

  head_ = (head_ + 1) % history_.size();
  history_[head_] = field_;
  ++substeps_done_;

  if (!std::isfinite(field_.real()) || !std::isfinite(field_.imag()) || !std::isfinite(carrier_))
    throw NumericalError("laser field diverged at substep " + std::to_string(substeps_done_));
}

Vector LaserRunner::step(const Vector& input) {
  const Vector drive = mask_input(input, mask_);
  Vector row(mask_.nodes());
  for (int node = 0; node < mask_.nodes(); ++node) {
    for (int s = 0; s < sub_per_theta_; ++s) substep(drive[node]);
    row[node] = std::norm(field_);  // intensity sample at l T + (node+1) theta
  }
  return row;
}

std::unique_ptr<ReservoirRunner> LaserRunner::clone() const {
  return std::make_unique<LaserRunner>(*this);
}

}  // namespace attnrc::reservoir
