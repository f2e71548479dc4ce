#pragma once

// Fixed real 2D Fourier features.
//
// A real N_y x N_x image has N_y * N_x real degrees of freedom in its DFT.
// Frequencies that are their own conjugate contribute a cos feature only;
// every other conjugate pair contributes one cos and one sin feature on its
// canonical representative. With the weights below the features are the
// coefficients of the image in an orthonormal basis.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <string>
#include <tuple>
#include <vector>

#include "monoidal/error.hpp"
#include "monoidal/image.hpp"

namespace monoidal {

enum class Phase { cos, sin };

struct FeatureDescriptor {
  std::size_t fy = 0;
  std::size_t fx = 0;
  Phase phase = Phase::cos;

  friend bool operator==(const FeatureDescriptor&, const FeatureDescriptor&) = default;
};

/// min(u, N - u): distance of a frequency index from zero on the DFT circle.
inline std::size_t wrap_frequency(std::size_t u, std::size_t n) { return std::min(u, n - u); }

class SpectrumLayout {
 public:
  SpectrumLayout(std::size_t rows, std::size_t cols, std::vector<FeatureDescriptor> features)
      : rows_(rows), cols_(cols), features_(std::move(features)) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return features_.size(); }
  const FeatureDescriptor& operator[](std::size_t i) const { return features_[i]; }
  const std::vector<FeatureDescriptor>& features() const noexcept { return features_; }

  bool self_conjugate(std::size_t fy, std::size_t fx) const {
    return (2 * fy) % rows_ == 0 && (2 * fx) % cols_ == 0;
  }

  /// Basis weight: 1/sqrt(N) for self-conjugate frequencies, sqrt(2/N) otherwise.
  double weight(const FeatureDescriptor& f) const {
    const double unitary = 1.0 / std::sqrt(static_cast<double>(rows_ * cols_));
    return self_conjugate(f.fy, f.fx) ? unitary : std::numbers::sqrt2 * unitary;
  }

  std::size_t magnitude2(const FeatureDescriptor& f) const {
    const std::size_t wy = wrap_frequency(f.fy, rows_);
    const std::size_t wx = wrap_frequency(f.fx, cols_);
    return wy * wy + wx * wx;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<FeatureDescriptor> features_;
};

/// Full layout ordered by ascending |f|^2, ties broken by
/// (wrap(fy), wrap(fx), cos before sin, fy, fx). The first entry is DC.
inline SpectrumLayout build_layout(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw InvalidArgument("build_layout: dimensions must be positive");
  std::vector<FeatureDescriptor> features;
  features.reserve(rows * cols);
  for (std::size_t fy = 0; fy < rows; ++fy) {
    for (std::size_t fx = 0; fx < cols; ++fx) {
      const std::size_t cy = (rows - fy) % rows;
      const std::size_t cx = (cols - fx) % cols;
      if (std::tie(cy, cx) < std::tie(fy, fx)) continue;  // conjugate already listed
      features.push_back({fy, fx, Phase::cos});
      if (cy != fy || cx != fx) features.push_back({fy, fx, Phase::sin});
    }
  }
  const SpectrumLayout unsorted(rows, cols, {});
  auto key = [&](const FeatureDescriptor& f) {
    return std::make_tuple(unsorted.magnitude2(f), wrap_frequency(f.fy, rows),
                           wrap_frequency(f.fx, cols), f.phase == Phase::sin, f.fy, f.fx);
  };
  std::sort(features.begin(), features.end(),
            [&](const FeatureDescriptor& a, const FeatureDescriptor& b) { return key(a) < key(b); });
  return SpectrumLayout(rows, cols, std::move(features));
}

struct FeatureVector {
  Eigen::VectorXd values;
  std::shared_ptr<const SpectrumLayout> layout;
};

/// Separable DFT feature extractor for one layout. The row pass and column
/// pass are dense products against cos/sin tables.
class DftFeatureExtractor {
 public:
  explicit DftFeatureExtractor(std::shared_ptr<const SpectrumLayout> layout)
      : layout_(std::move(layout)) {
    const std::size_t ny = layout_->rows();
    const std::size_t nx = layout_->cols();
    cx_.resize(nx, nx);
    sx_.resize(nx, nx);
    for (std::size_t j = 0; j < nx; ++j) {
      for (std::size_t f = 0; f < nx; ++f) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>((f * j) % nx) /
                         static_cast<double>(nx);
        cx_(j, f) = std::cos(a);
        sx_(j, f) = std::sin(a);
      }
    }
    cy_.resize(ny, ny);
    sy_.resize(ny, ny);
    for (std::size_t f = 0; f < ny; ++f) {
      for (std::size_t i = 0; i < ny; ++i) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>((f * i) % ny) /
                         static_cast<double>(ny);
        cy_(f, i) = std::cos(a);
        sy_(f, i) = std::sin(a);
      }
    }
  }

  const std::shared_ptr<const SpectrumLayout>& layout() const noexcept { return layout_; }

  FeatureVector extract(const Image& img, std::size_t count) const {
    check_count(count);
    if (img.rows() != layout_->rows() || img.cols() != layout_->cols()) {
      throw InvalidArgument("dft2d_features: image shape does not match layout");
    }
    const Eigen::Map<const PixelMatrix> p(img.pixels().data(),
                                          static_cast<Eigen::Index>(img.rows()),
                                          static_cast<Eigen::Index>(img.cols()));
    return {select(p, count), layout_};
  }

  /// Features for every image in `images` (one image per row), first `count`
  /// layout entries.
  PixelMatrix extract_all(const PixelMatrix& images, std::size_t count) const {
    check_count(count);
    const auto ny = static_cast<Eigen::Index>(layout_->rows());
    const auto nx = static_cast<Eigen::Index>(layout_->cols());
    if (images.cols() != ny * nx) throw InvalidArgument("extract_all: wrong pixel count");
    PixelMatrix out(images.rows(), static_cast<Eigen::Index>(count));
    for (Eigen::Index n = 0; n < images.rows(); ++n) {
      const Eigen::Map<const PixelMatrix> p(images.row(n).data(), ny, nx);
      out.row(n) = select(p, count).transpose();
    }
    return out;
  }

 private:
  void check_count(std::size_t count) const {
    if (count > layout_->size()) {
      throw InvalidArgument("requested " + std::to_string(count) + " features, layout has " +
                            std::to_string(layout_->size()));
    }
  }

  Eigen::VectorXd select(const Eigen::Map<const PixelMatrix>& p, std::size_t count) const {
    // T = P (Cx + i Sx);  F = (Cy + i Sy) T
    const Eigen::MatrixXd tre = p * cx_;
    const Eigen::MatrixXd tim = p * sx_;
    const Eigen::MatrixXd fre = cy_ * tre - sy_ * tim;
    const Eigen::MatrixXd fim = sy_ * tre + cy_ * tim;
    Eigen::VectorXd v(static_cast<Eigen::Index>(count));
    for (std::size_t n = 0; n < count; ++n) {
      const auto& f = (*layout_)[n];
      const auto fy = static_cast<Eigen::Index>(f.fy);
      const auto fx = static_cast<Eigen::Index>(f.fx);
      const double raw = f.phase == Phase::cos ? fre(fy, fx) : fim(fy, fx);
      v[static_cast<Eigen::Index>(n)] = layout_->weight(f) * raw;
    }
    return v;
  }

  std::shared_ptr<const SpectrumLayout> layout_;
  Eigen::MatrixXd cx_, sx_, cy_, sy_;
};

/// Full feature vector of `img` under `layout`.
inline FeatureVector dft2d_features(const Image& img,
                                    const std::shared_ptr<const SpectrumLayout>& layout) {
  return DftFeatureExtractor(layout).extract(img, layout->size());
}

/// First `count` features in layout order.
inline FeatureVector truncate(const FeatureVector& features, std::size_t count) {
  if (count > static_cast<std::size_t>(features.values.size())) {
    throw InvalidArgument("truncate: requested " + std::to_string(count) + " features, only " +
                          std::to_string(features.values.size()) + " available");
  }
  return {features.values.head(static_cast<Eigen::Index>(count)), features.layout};
}

/// Inverse transform: sum of feature * basis function over the features
/// present. Exact reconstruction when all layout features are supplied.
inline Image reconstruct(const FeatureVector& features) {
  const SpectrumLayout& layout = *features.layout;
  const std::size_t ny = layout.rows();
  const std::size_t nx = layout.cols();
  std::vector<double> pixels(ny * nx, 0.0);
  for (Eigen::Index n = 0; n < features.values.size(); ++n) {
    const auto& f = layout[static_cast<std::size_t>(n)];
    const double coef = features.values[n] * layout.weight(f);
    for (std::size_t i = 0; i < ny; ++i) {
      for (std::size_t j = 0; j < nx; ++j) {
        const double a = 2.0 * std::numbers::pi *
                         (static_cast<double>(f.fy * i % ny) / static_cast<double>(ny) +
                          static_cast<double>(f.fx * j % nx) / static_cast<double>(nx));
        pixels[i * nx + j] += coef * (f.phase == Phase::cos ? std::cos(a) : std::sin(a));
      }
    }
  }
  return Image(ny, nx, std::move(pixels));
}

}  // namespace monoidal
