#include "attnrc/mask.hpp"

namespace attnrc::reservoir {

Mask make_mask(int n_nodes, int channels, double theta, std::uint64_t seed) {
  if (n_nodes < 1) throw ConfigError("make_mask: need at least one node");
  if (channels < 1) throw ConfigError("make_mask: need at least one channel");
  if (theta <= 0.0) throw ConfigError("make_mask: theta must be positive");
  Mask mask;
  mask.theta = theta;
  mask.values.resize(n_nodes, channels);
  Rng rng(derive_seed(seed, "mask"));
  for (int n = 0; n < n_nodes; ++n)
    for (int c = 0; c < channels; ++c) mask.values(n, c) = rng.uniform();
  return mask;
}

Vector mask_input(const Vector& x, const Mask& mask) {
  if (x.size() != mask.channels())
    throw ConfigError("mask_input: input has " + std::to_string(x.size()) +
                      " channels, mask expects " + std::to_string(mask.channels()));
  return mask.values * x;
}

}  // namespace attnrc::reservoir
