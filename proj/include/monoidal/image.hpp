#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "monoidal/error.hpp"

namespace monoidal {

/// One image per row, pixels row-major within the row.
using PixelMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// An N_y x N_x grid of intensities, row-major. Row index i runs along the
/// vertical axis, column index j along the horizontal one.
class Image {
 public:
  Image(std::size_t rows, std::size_t cols, std::vector<double> pixels)
      : rows_(rows), cols_(cols), pixels_(std::move(pixels)) {
    if (rows_ == 0 || cols_ == 0) throw InvalidArgument("Image: dimensions must be positive");
    if (pixels_.size() != rows_ * cols_) {
      throw InvalidArgument("Image: expected " + std::to_string(rows_ * cols_) +
                            " pixels, got " + std::to_string(pixels_.size()));
    }
  }

  static Image zeros(std::size_t rows, std::size_t cols) {
    return Image(rows, cols, std::vector<double>(rows * cols, 0.0));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t i, std::size_t j) const { return pixels_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return pixels_[i * cols_ + j]; }

  std::span<const double> pixels() const noexcept { return pixels_; }

  bool is_normalized() const {
    return std::all_of(pixels_.begin(), pixels_.end(),
                       [](double p) { return p >= 0.0 && p <= 1.0; });
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> pixels_;
};

}  // namespace monoidal
