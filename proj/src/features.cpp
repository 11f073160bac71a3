#include "tomoboost/features.hpp"

#include "tomoboost/parallel.hpp"

#include <Eigen/Eigenvalues>

namespace tomoboost {

void CovarianceMatrix::validate() const {
  require(values.rows() == values.cols(), "covariance: not square");
  require(window >= 1, "covariance: window must be >= 1");
  require(values.allFinite(), "covariance: non-finite entry");
  const double trace = values.real().diagonal().sum();
  require(hermitian_asymmetry(values) <= 1e-12 * std::max(trace, 1e-300),
          "covariance: not Hermitian");
  for (int i = 0; i < values.rows(); ++i)
    require(values(i, i).real() >= 0.0 && std::abs(values(i, i).imag()) <= 1e-12 * std::max(trace, 1e-300),
            "covariance: diagonal must be real and non-negative");
}

double hermitian_asymmetry(const Eigen::MatrixXcd& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

double min_eigenvalue(const CovarianceMatrix& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(cov.values,
                                                         Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

void FeatureGrid::validate() const {
  require(rows >= 0 && cols >= 0, "feature grid: negative dimensions");
  require(dim >= 1, "feature grid: empty feature dimension");
  require(valid_offset >= 0, "feature grid: negative valid_offset");
  require(window >= 1 && window % 2 == 1, "feature grid: window must be odd");
  require(values.rows() == pixel_count() && values.cols() == dim,
          "feature grid: storage dimension mismatch");
  require(values.allFinite(), "feature grid: non-finite value");
}

namespace {

void check_window(int window) {
  require(window >= 1 && window % 2 == 1, "window must be odd and >= 1");
}

// Summed-area table with a zero top row/left column; window sums come out
// of four lookups. Double accumulation keeps the subtraction benign for
// desk-scale scenes.
Eigen::MatrixXd summed_area_table(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd sat = Eigen::MatrixXd::Zero(m.rows() + 1, m.cols() + 1);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double row_sum = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row_sum += m(r, c);
      sat(r + 1, c + 1) = sat(r, c + 1) + row_sum;
    }
  }
  return sat;
}

inline double window_sum(const Eigen::MatrixXd& sat, int r, int c, int w) {
  return sat(r + w, c + w) - sat(r, c + w) - sat(r + w, c) + sat(r, c);
}

}  // namespace

CovarianceMatrix estimate_covariance(const SlcStack& stack, int row, int col, int window) {
  check_window(window);
  const int half = window / 2;
  require(row - half >= 0 && col - half >= 0 && row + half < stack.rows &&
              col + half < stack.cols,
          "covariance window out of bounds");

  const int order = stack.num_channels();
  CovarianceMatrix cov;
  cov.window = window;
  cov.values = Eigen::MatrixXcd::Zero(order, order);

  Eigen::VectorXcd u(order);
  for (int r = row - half; r <= row + half; ++r)
    for (int c = col - half; c <= col + half; ++c) {
      for (int k = 0; k < order; ++k) u[k] = stack.channels[k](r, c);
      cov.values.selfadjointView<Eigen::Lower>().rankUpdate(u, 1.0);
    }
  cov.values = cov.values.selfadjointView<Eigen::Lower>();
  cov.values /= double(window) * double(window);
  return cov;
}

Eigen::VectorXd extract_features(const CovarianceMatrix& cov) {
  cov.validate();
  const int order = cov.order();
  Eigen::VectorXd x(order + 2 * (order - 1));
  for (int k = 0; k < order; ++k) x[k] = cov.values(k, k).real();
  for (int k = 1; k < order; ++k) {
    x[order + 2 * (k - 1)] = cov.values(0, k).real();
    x[order + 2 * (k - 1) + 1] = cov.values(0, k).imag();
  }
  return x;
}

FeatureGrid build_feature_grid(const SlcStack& stack, int window, int threads) {
  check_window(window);
  stack.validate();
  require(stack.rows >= window && stack.cols >= window, "stack smaller than window");

  const int order = stack.num_channels();
  const int dim = feature_dimension(stack.geometry.num_baselines());

  FeatureGrid grid;
  grid.rows = stack.rows - window + 1;
  grid.cols = stack.cols - window + 1;
  grid.dim = dim;
  grid.valid_offset = (window - 1) / 2;
  grid.window = window;
  grid.values.resize(grid.pixel_count(), dim);

  const double norm = 1.0 / (double(window) * double(window));

  // Each feature is a boxcar mean of one per-pixel channel product, so the
  // whole grid reduces to one summed-area table per feature. Features are
  // processed by a single worker each, keeping results thread-count
  // independent.
  parallel_for(dim, threads, [&](std::int64_t j) {
    Eigen::MatrixXd product(stack.rows, stack.cols);
    if (j < order) {
      product = stack.channels[j].cwiseAbs2();
    } else {
      const int k = int(j - order) / 2 + 1;
      const bool real_part = ((j - order) % 2) == 0;
      Eigen::MatrixXcd cross = stack.channels[0].cwiseProduct(stack.channels[k].conjugate());
      if (real_part)
        product = cross.real();
      else
        product = cross.imag();
    }
    Eigen::MatrixXd sat = summed_area_table(product);
    for (int r = 0; r < grid.rows; ++r)
      for (int c = 0; c < grid.cols; ++c)
        grid.values(grid.index(r, c), j) = static_cast<float>(window_sum(sat, r, c, window) * norm);
  });

  return grid;
}

HeightRaster average_raster(const HeightRaster& raster, int window) {
  check_window(window);
  raster.validate();
  require(raster.rows >= window && raster.cols >= window, "raster smaller than window");

  HeightRaster out;
  out.rows = raster.rows - window + 1;
  out.cols = raster.cols - window + 1;
  out.kind = raster.kind;
  out.valid_offset = raster.valid_offset + (window - 1) / 2;
  out.values.resize(out.rows, out.cols);

  const double norm = 1.0 / (double(window) * double(window));
  Eigen::MatrixXd sat = summed_area_table(raster.values);
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c)
      out.values(r, c) = window_sum(sat, r, c, window) * norm;

  if (out.kind == RasterKind::Chm && out.values.size() > 0) {
    // Boxcar means of non-negative values stay non-negative; clip the
    // round-off of the table subtraction.
    out.values = out.values.cwiseMax(0.0);
  }
  snap_to_float32(out);
  return out;
}

}  // namespace tomoboost
