#pragma once

#include "attnrc/common.hpp"

namespace attnrc::reservoir {

/// Piecewise-constant input weighting over one mask period T = N * theta.
/// Entries are uniform on [0,1]; one column per input channel.
struct Mask {
  Matrix values;  // N x C
  double theta = 0.0;

  int nodes() const { return static_cast<int>(values.rows()); }
  int channels() const { return static_cast<int>(values.cols()); }
  double period() const { return theta * static_cast<double>(values.rows()); }
};

Mask make_mask(int n_nodes, int channels, double theta, std::uint64_t seed);

/// Segment values of the drive v_l(t) over [0, T): segment n carries
/// sum_c mask[n,c] * x[c]. Multichannel inputs are injected as a sum of
/// independently masked channels.
Vector mask_input(const Vector& x, const Mask& mask);

}  // namespace attnrc::reservoir
