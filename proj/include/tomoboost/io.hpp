#pragma once

#include "tomoboost/features.hpp"
#include "tomoboost/raster.hpp"
#include "tomoboost/stack.hpp"

#include <filesystem>

namespace tomoboost {

// On-disk formats, all little-endian float32 row-major:
//   stack dir:   meta.json + one b{n}_p{HH|HV|VV}.cf32 per channel,
//                samples interleaved (re, im)
//   raster:      {base}.hdr.json + {base}.f32
//   feature grid: {base}.hdr.json + {base}.f32, pixel-major feature-minor

SlcStack read_stack(const std::filesystem::path& dir);
void write_stack(const SlcStack& stack, const std::filesystem::path& dir);

HeightRaster read_raster(const std::filesystem::path& base);
void write_raster(const HeightRaster& raster, const std::filesystem::path& base);

FeatureGrid read_feature_grid(const std::filesystem::path& base);
void write_feature_grid(const FeatureGrid& grid, const std::filesystem::path& base);

/// CSV export with header f0..f{M-1}, one pixel per line.
void write_feature_grid_csv(const FeatureGrid& grid, const std::filesystem::path& file);

}  // namespace tomoboost
