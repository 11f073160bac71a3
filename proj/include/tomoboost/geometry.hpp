#pragma once

#include "tomoboost/common.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace tomoboost {

/// Acquisition geometry of a multi-polarimetric multi-baseline stack.
/// Baselines are treated as perpendicular baselines in meters; entry 0 is
/// the master track and must be zero. Defaults describe an airborne P-band
/// campaign over tropical forest.
struct AcquisitionGeometry {
  double wavelength = 0.7542;    // m
  double flight_height = 3962.0; // m
  double incidence_angle = 35.061 * std::numbers::pi / 180.0;  // rad
  std::vector<double> baselines = {0.0, -14.0, -30.0, -44.0, -60.0, -75.0};  // m
  double range_resolution = 1.0;   // m
  double azimuth_resolution = 1.245;  // m

  int num_baselines() const { return static_cast<int>(baselines.size()); }
  int num_channels() const { return 3 * num_baselines(); }
  double slant_range() const { return flight_height / std::cos(incidence_angle); }

  void validate() const;
};

}  // namespace tomoboost
