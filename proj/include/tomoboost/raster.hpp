#pragma once

#include "tomoboost/common.hpp"

#include <string>

namespace tomoboost {

enum class RasterKind { Chm, Dtm };

const char* raster_kind_name(RasterKind kind);
RasterKind raster_kind_from_name(const std::string& name);

/// Real-valued height map on the pixel grid. valid_offset records how many
/// border pixels windowed operations have cropped relative to the original
/// scene, so derived products can be aligned without guesswork.
///
/// Values are kept float32-representable (files store float32), which makes
/// write/read round trips exact.
struct HeightRaster {
  int rows = 0;
  int cols = 0;
  RasterKind kind = RasterKind::Chm;
  int valid_offset = 0;
  Eigen::MatrixXd values;

  void validate() const;
};

/// Round every value to the nearest float32, the precision the file format
/// carries.
void snap_to_float32(HeightRaster& raster);

}  // namespace tomoboost
