#pragma once

#include "tomoboost/geometry.hpp"

#include <complex>
#include <vector>

namespace tomoboost {

enum class Pol : int { HH = 0, HV = 1, VV = 2 };

inline const char* pol_name(Pol p) {
  switch (p) {
    case Pol::HH: return "HH";
    case Pol::HV: return "HV";
    default: return "VV";
  }
}

/// Single-look complex stack: one complex sample per (channel, row, col),
/// channel = 3 * baseline + polarization. Immutable after construction.
struct SlcStack {
  AcquisitionGeometry geometry;
  int rows = 0;
  int cols = 0;
  std::vector<Eigen::MatrixXcd> channels;  // num_channels() matrices of rows x cols

  static int channel_index(int baseline, Pol pol) {
    return 3 * baseline + static_cast<int>(pol);
  }

  int num_channels() const { return static_cast<int>(channels.size()); }

  const Eigen::MatrixXcd& channel(int baseline, Pol pol) const {
    return channels[channel_index(baseline, pol)];
  }

  /// The 3*Nb observation vector at one pixel, in channel order.
  Eigen::VectorXcd pixel_vector(int row, int col) const {
    Eigen::VectorXcd u(num_channels());
    for (int k = 0; k < num_channels(); ++k) u[k] = channels[k](row, col);
    return u;
  }

  void validate() const;
};

}  // namespace tomoboost
