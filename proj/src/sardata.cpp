#include "tomoboost/geometry.hpp"
#include "tomoboost/raster.hpp"
#include "tomoboost/stack.hpp"

#include <cmath>

namespace tomoboost {

void AcquisitionGeometry::validate() const {
  require(num_baselines() >= 2, "geometry: at least two baselines required");
  require(std::isfinite(wavelength) && wavelength > 0.0, "geometry: wavelength must be positive");
  require(std::isfinite(flight_height) && flight_height > 0.0,
          "geometry: flight height must be positive");
  require(incidence_angle > 0.0 && incidence_angle < std::numbers::pi / 2.0,
          "geometry: incidence angle must lie in (0, pi/2)");
  require(range_resolution > 0.0 && azimuth_resolution > 0.0,
          "geometry: resolutions must be positive");
  require(baselines.front() == 0.0, "geometry: first baseline is the master and must be 0");
  for (size_t i = 0; i < baselines.size(); ++i) {
    require(std::isfinite(baselines[i]), "geometry: baseline not finite");
    for (size_t j = i + 1; j < baselines.size(); ++j)
      require(baselines[i] != baselines[j], "geometry: baselines must be pairwise distinct");
  }
}

void SlcStack::validate() const {
  geometry.validate();
  require(rows >= 0 && cols >= 0, "stack: negative dimensions");
  require(num_channels() == geometry.num_channels(),
          "stack: channel count must equal 3 * Nb");
  for (const auto& ch : channels) {
    require(ch.rows() == rows && ch.cols() == cols, "stack: channel dimension mismatch");
    require(ch.allFinite(), "stack: non-finite sample");
  }
}

const char* raster_kind_name(RasterKind kind) {
  return kind == RasterKind::Chm ? "CHM" : "DTM";
}

RasterKind raster_kind_from_name(const std::string& name) {
  if (name == "CHM") return RasterKind::Chm;
  if (name == "DTM") return RasterKind::Dtm;
  fail("unknown raster kind '" + name + "'");
}

void HeightRaster::validate() const {
  require(rows >= 0 && cols >= 0, "raster: negative dimensions");
  require(values.rows() == rows && values.cols() == cols, "raster: dimension mismatch");
  require(valid_offset >= 0, "raster: negative valid_offset");
  require(values.allFinite(), "raster: non-finite value");
  if (kind == RasterKind::Chm && values.size() > 0)
    require(values.minCoeff() >= 0.0, "raster: CHM values must be non-negative");
}

void snap_to_float32(HeightRaster& raster) {
  // Materialize real float storage so the narrowing cannot be folded away.
  const Eigen::MatrixXf narrowed = raster.values.cast<float>();
  raster.values = narrowed.cast<double>();
}

}  // namespace tomoboost
