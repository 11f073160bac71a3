#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tomoboost {

// Row-major float matrix used for per-pixel feature storage (pixel-major,
// feature-minor, matching the on-disk layout).
using MatrixXfRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Half-open pixel rectangle [row0, row0+rows) x [col0, col0+cols).
struct PixelRect {
  int row0 = 0;
  int col0 = 0;
  int rows = 0;
  int cols = 0;

  bool inside(int grid_rows, int grid_cols) const {
    return row0 >= 0 && col0 >= 0 && rows > 0 && cols > 0 &&
           row0 + rows <= grid_rows && col0 + cols <= grid_cols;
  }
  std::int64_t count() const { return std::int64_t(rows) * cols; }
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

[[noreturn]] inline void fail(const std::string& message) {
  throw std::runtime_error(message);
}

}  // namespace tomoboost
