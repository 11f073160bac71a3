#pragma once

#include "tomoboost/raster.hpp"
#include "tomoboost/stack.hpp"

#include <complex>

namespace tomoboost {

/// Per-pixel Hermitian sample covariance of the channel vector. window is
/// the boxcar side used for estimation (1 for model-derived matrices).
struct CovarianceMatrix {
  Eigen::MatrixXcd values;
  int window = 1;

  int order() const { return static_cast<int>(values.rows()); }

  /// Square, Hermitian within 1e-12 * trace, real non-negative diagonal.
  void validate() const;
};

/// max_ij |R - R^H| over all entries.
double hermitian_asymmetry(const Eigen::MatrixXcd& m);

/// Smallest eigenvalue of the Hermitian part; PSD checks compare it
/// against -1e-9 * trace.
double min_eigenvalue(const CovarianceMatrix& cov);

/// Feature vector length for Nb baselines: 3Nb diagonal entries plus
/// (re, im) pairs for the 3Nb - 1 first-row entries.
inline int feature_dimension(int num_baselines) { return 9 * num_baselines - 2; }

/// Boxcar sample covariance over the W x W window centered at (row, col):
/// R = (1/W^2) * sum u u^H. W must be odd and the window must fit.
CovarianceMatrix estimate_covariance(const SlcStack& stack, int row, int col, int window);

/// Real feature vector: diagonal first, then Re/Im interleaved along the
/// first row (entry (0,0) excluded, it already sits in the diagonal block).
Eigen::VectorXd extract_features(const CovarianceMatrix& cov);

/// Features for every pixel whose window fits, stored pixel-major.
struct FeatureGrid {
  int rows = 0;
  int cols = 0;
  int dim = 0;
  int valid_offset = 0;
  int window = 1;
  MatrixXfRM values;  // (rows * cols) x dim

  std::int64_t pixel_count() const { return std::int64_t(rows) * cols; }
  std::int64_t index(int row, int col) const { return std::int64_t(row) * cols + col; }

  void validate() const;
};

/// Covariance features over the whole stack with an odd W x W boxcar.
/// Output dims are (rows - W + 1, cols - W + 1) with valid_offset (W-1)/2.
FeatureGrid build_feature_grid(const SlcStack& stack, int window, int threads = 0);

/// W x W boxcar mean with the same cropping as build_feature_grid, so the
/// averaged raster aligns pixelwise with the feature grid.
HeightRaster average_raster(const HeightRaster& raster, int window);

}  // namespace tomoboost
