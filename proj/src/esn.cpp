#include "attnrc/reservoir.hpp"

#include <Eigen/Eigenvalues>

namespace attnrc::reservoir {

EsnRunner::EsnRunner(int nodes, int channels, const EsnParams& params, std::uint64_t seed)
    : leak_(params.leak) {
  if (nodes < 1) throw ConfigError("EsnRunner: need at least one node");
  if (channels < 1) throw ConfigError("EsnRunner: need at least one input channel");
  if (params.leak < 0.0 || params.leak > 1.0)
    throw ConfigError("EsnRunner: leak must be in [0, 1]");

  Rng rng(derive_seed(seed, "esn_weights"));
  w_.resize(nodes, nodes);
  for (long i = 0; i < w_.size(); ++i) w_.data()[i] = rng.uniform(-1.0, 1.0);
  // Rescale the dense reservoir matrix to the requested spectral radius.
  const Eigen::VectorXcd eigs = Eigen::EigenSolver<Matrix>(w_, false).eigenvalues();
  const double radius = eigs.cwiseAbs().maxCoeff();
  if (radius > 0.0) w_ *= params.spectral_radius / radius;

  w_in_.resize(nodes, channels);
  for (long i = 0; i < w_in_.size(); ++i)
    w_in_.data()[i] = params.input_scale * rng.uniform(-1.0, 1.0);

  state_ = Vector::Zero(nodes);
}

Vector EsnRunner::step(const Vector& input) {
  if (input.size() != w_in_.cols())
    throw ConfigError("EsnRunner::step: input channel mismatch");
  state_ = (1.0 - leak_) * state_ + leak_ * (w_ * state_ + w_in_ * input).array().tanh().matrix();
  return state_;
}

std::unique_ptr<ReservoirRunner> EsnRunner::clone() const {
  return std::make_unique<EsnRunner>(*this);
}

}  // namespace attnrc::reservoir
