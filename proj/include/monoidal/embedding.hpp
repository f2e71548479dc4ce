#pragma once

// Learnable 2D image embedding.
//
//     E = sum_{i,j} p_ij R_y^i R_x^j e
//
// Because R_x and R_y share the block partition, block k of E is the complex
// number  eps_k * sum_{i,j} p_ij exp(i (j theta^x_k + i theta^y_k))  where
// eps_k = e_{2k} + i e_{2k+1} is block k of the pixel basis vector. Everything
// below works on that complex form; output vectors interleave (re, im) per
// block.

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "monoidal/algebra.hpp"
#include "monoidal/error.hpp"
#include "monoidal/image.hpp"
#include "monoidal/rng.hpp"

namespace monoidal {

using cplx = std::complex<double>;

/// d/2 angles per axis plus the fixed pixel basis vector e.
class ImageEmbedder {
 public:
  /// Basis e = (1, 0) in every block, so block k is exactly the raw
  /// (cos, sin) projection of the image.
  ImageEmbedder(RotationAngles theta_x, RotationAngles theta_y)
      : ImageEmbedder(theta_x, theta_y, unit_basis(theta_x.dim(), 1.0)) {}

  ImageEmbedder(RotationAngles theta_x, RotationAngles theta_y, Eigen::VectorXd basis)
      : theta_x_(std::move(theta_x)), theta_y_(std::move(theta_y)), basis_(std::move(basis)) {
    if (theta_x_.size() != theta_y_.size()) {
      throw InvalidArgument("ImageEmbedder: theta_x and theta_y must have the same length");
    }
    if (static_cast<std::size_t>(basis_.size()) != dim()) {
      throw InvalidArgument("ImageEmbedder: basis length must equal d");
    }
    for (std::size_t k = 0; k < blocks(); ++k) {
      if (basis_[2 * k] == 0.0 && basis_[2 * k + 1] == 0.0) {
        throw InvalidArgument("ImageEmbedder: basis block " + std::to_string(k) + " is zero");
      }
    }
  }

  /// Angles uniform on [0, 2*pi), basis (scale, 0) per block.
  static ImageEmbedder random(std::size_t dim, std::uint64_t seed, double basis_scale = 1.0) {
    if (dim == 0 || dim % 2 != 0) {
      throw InvalidArgument("ImageEmbedder: embedding dimension must be even and positive, got " +
                            std::to_string(dim));
    }
    Rng rng(seed);
    auto tx = RotationAngles::uniform(dim / 2, rng);
    auto ty = RotationAngles::uniform(dim / 2, rng);
    return ImageEmbedder(std::move(tx), std::move(ty), unit_basis(dim, basis_scale));
  }

  static Eigen::VectorXd unit_basis(std::size_t dim, double scale) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    for (std::size_t k = 0; k < dim / 2; ++k) e[2 * k] = scale;
    return e;
  }

  std::size_t dim() const noexcept { return theta_x_.dim(); }
  std::size_t blocks() const noexcept { return theta_x_.size(); }
  const RotationAngles& theta_x() const noexcept { return theta_x_; }
  const RotationAngles& theta_y() const noexcept { return theta_y_; }
  const Eigen::VectorXd& basis() const noexcept { return basis_; }
  cplx basis_block(std::size_t k) const { return {basis_[2 * k], basis_[2 * k + 1]}; }

  AxisOperator x_operator() const { return AxisOperator(theta_x_); }
  AxisOperator y_operator() const { return AxisOperator(theta_y_); }

  /// Replaces both angle sets, reducing them mod 2*pi.
  void set_angles(std::span<const double> tx, std::span<const double> ty) {
    if (tx.size() != blocks() || ty.size() != blocks()) {
      throw InvalidArgument("ImageEmbedder::set_angles: wrong number of angles");
    }
    std::vector<double> ax(tx.size());
    std::vector<double> ay(ty.size());
    for (std::size_t k = 0; k < blocks(); ++k) {
      ax[k] = wrap_angle(tx[k]);
      ay[k] = wrap_angle(ty[k]);
    }
    theta_x_ = RotationAngles(std::move(ax));
    theta_y_ = RotationAngles(std::move(ay));
  }

 private:
  RotationAngles theta_x_;
  RotationAngles theta_y_;
  Eigen::VectorXd basis_;
};

/// cos(t theta_k), sin(t theta_k) for t < length, one column per block, plus
/// the t-weighted copies needed by the backward pass.
class PhaseTable {
 public:
  PhaseTable(const RotationAngles& angles, std::size_t length)
      : cos_(length, angles.size()),
        sin_(length, angles.size()),
        tcos_(length, angles.size()),
        tsin_(length, angles.size()) {
    for (std::size_t k = 0; k < angles.size(); ++k) {
      for (std::size_t t = 0; t < length; ++t) {
        const double phi = static_cast<double>(t) * angles[k];
        const double c = std::cos(phi);
        const double s = std::sin(phi);
        cos_(t, k) = c;
        sin_(t, k) = s;
        tcos_(t, k) = static_cast<double>(t) * c;
        tsin_(t, k) = static_cast<double>(t) * s;
      }
    }
  }

  std::size_t length() const noexcept { return static_cast<std::size_t>(cos_.rows()); }
  std::size_t blocks() const noexcept { return static_cast<std::size_t>(cos_.cols()); }

  cplx phase(std::size_t t, std::size_t k) const { return {cos_(t, k), sin_(t, k)}; }

  const Eigen::MatrixXd& cos() const noexcept { return cos_; }
  const Eigen::MatrixXd& sin() const noexcept { return sin_; }
  const Eigen::MatrixXd& weighted_cos() const noexcept { return tcos_; }
  const Eigen::MatrixXd& weighted_sin() const noexcept { return tsin_; }

 private:
  Eigen::MatrixXd cos_;
  Eigen::MatrixXd sin_;
  Eigen::MatrixXd tcos_;
  Eigen::MatrixXd tsin_;
};

struct AngleGradient {
  Eigen::VectorXd d_theta_x;
  Eigen::VectorXd d_theta_y;
};

namespace detail {

inline Eigen::VectorXd interleave(std::span<const cplx> blocks) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(2 * blocks.size()));
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    out[2 * k] = blocks[k].real();
    out[2 * k + 1] = blocks[k].imag();
  }
  return out;
}

}  // namespace detail

/// Embedder bound to one image size: phase tables are computed once and
/// reused for every image in a batch. Rebuild after the angles change.
class EmbeddingPlan {
 public:
  EmbeddingPlan(const ImageEmbedder& emb, std::size_t rows, std::size_t cols)
      : emb_(&emb), rows_(rows), cols_(cols), px_(emb.theta_x(), cols), py_(emb.theta_y(), rows) {
    if (rows == 0 || cols == 0) throw InvalidArgument("EmbeddingPlan: empty image size");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  const ImageEmbedder& embedder() const noexcept { return *emb_; }

  /// Row pass then column pass. The row pass builds the N_y x d intermediate
  /// whose row i is sum_j p_ij R_x^j e; the column pass folds those rows with
  /// powers of R_y.
  Eigen::VectorXd embed(const Image& img) const {
    check_shape(img);
    const std::size_t kb = emb_->blocks();
    std::vector<cplx> intermediate(rows_ * kb);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t k = 0; k < kb; ++k) {
        cplx acc = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) acc += img(i, j) * px_.phase(j, k);
        intermediate[i * kb + k] = acc * emb_->basis_block(k);
      }
    }
    std::vector<cplx> out(kb, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t k = 0; k < kb; ++k) out[k] += py_.phase(i, k) * intermediate[i * kb + k];
    }
    return detail::interleave(out);
  }

  /// d loss / d theta for one image, given d loss / d embedding.
  AngleGradient gradient(const Image& img, const Eigen::VectorXd& upstream) const {
    check_shape(img);
    if (static_cast<std::size_t>(upstream.size()) != emb_->dim()) {
      throw InvalidArgument("embedding_gradient: upstream length must equal d");
    }
    const std::size_t kb = emb_->blocks();
    AngleGradient g{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kb)),
                    Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kb))};
    const cplx iu(0.0, 1.0);
    for (std::size_t k = 0; k < kb; ++k) {
      const cplx up(upstream[2 * k], upstream[2 * k + 1]);
      if (up == cplx(0.0)) continue;
      cplx dx = 0.0;
      cplx dy = 0.0;
      for (std::size_t i = 0; i < rows_; ++i) {
        cplx row = 0.0;
        cplx row_j = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) {
          const cplx term = img(i, j) * px_.phase(j, k);
          row += term;
          row_j += static_cast<double>(j) * term;
        }
        const cplx py = py_.phase(i, k);
        dx += py * row_j;
        dy += static_cast<double>(i) * py * row;
      }
      const cplx scale = std::conj(up) * emb_->basis_block(k) * iu;
      g.d_theta_x[static_cast<Eigen::Index>(k)] = (scale * dx).real();
      g.d_theta_y[static_cast<Eigen::Index>(k)] = (scale * dy).real();
    }
    return g;
  }

  /// Intermediate state of a batched forward pass, kept for the backward pass.
  struct BatchForward {
    Eigen::MatrixXd row_re;  // (B * N_y) x K: real part of sum_j p_ij e^{i j theta^x}
    Eigen::MatrixXd row_im;
    Eigen::MatrixXd output;  // B x d
  };

  /// Batched forward pass over B images stored one per row (row-major,
  /// N_y * N_x columns). The row pass is a pair of dense products.
  BatchForward forward(const PixelMatrix& images) const {
    const auto b = check_batch(images);
    const Eigen::Map<const PixelMatrix> stacked(images.data(), b * rows_i(), cols_i());
    BatchForward f;
    f.row_re.noalias() = stacked * px_.cos();
    f.row_im.noalias() = stacked * px_.sin();
    f.output = fold_columns(f.row_re, f.row_im, b, false);
    return f;
  }

  /// Sum over the batch of d loss / d theta given d loss / d output (B x d).
  AngleGradient backward(const PixelMatrix& images, const BatchForward& f,
                         const Eigen::MatrixXd& upstream) const {
    const auto b = check_batch(images);
    const auto kb = static_cast<Eigen::Index>(emb_->blocks());
    if (upstream.rows() != b || upstream.cols() != 2 * kb) {
      throw InvalidArgument("EmbeddingPlan::backward: upstream must be B x d");
    }
    const Eigen::Map<const PixelMatrix> stacked(images.data(), b * rows_i(), cols_i());
    const Eigen::MatrixXd rowj_re = stacked * px_.weighted_cos();
    const Eigen::MatrixXd rowj_im = stacked * px_.weighted_sin();
    // Both partials are i * eps_k * (fold of a weighted row intermediate).
    const Eigen::MatrixXd dx = fold_columns(rowj_re, rowj_im, b, false);
    const Eigen::MatrixXd dy = fold_columns(f.row_re, f.row_im, b, true);

    AngleGradient g{Eigen::VectorXd::Zero(kb), Eigen::VectorXd::Zero(kb)};
    const cplx iu(0.0, 1.0);
    for (Eigen::Index k = 0; k < kb; ++k) {
      double gx = 0.0;
      double gy = 0.0;
      for (Eigen::Index n = 0; n < b; ++n) {
        const cplx up(upstream(n, 2 * k), upstream(n, 2 * k + 1));
        const cplx ddx = iu * cplx(dx(n, 2 * k), dx(n, 2 * k + 1));
        const cplx ddy = iu * cplx(dy(n, 2 * k), dy(n, 2 * k + 1));
        gx += (std::conj(up) * ddx).real();
        gy += (std::conj(up) * ddy).real();
      }
      g.d_theta_x[k] = gx;
      g.d_theta_y[k] = gy;
    }
    return g;
  }

 private:
  Eigen::Index rows_i() const { return static_cast<Eigen::Index>(rows_); }
  Eigen::Index cols_i() const { return static_cast<Eigen::Index>(cols_); }

  void check_shape(const Image& img) const {
    if (img.rows() != rows_ || img.cols() != cols_) {
      throw InvalidArgument("EmbeddingPlan: image is " + std::to_string(img.rows()) + "x" +
                            std::to_string(img.cols()) + ", plan expects " +
                            std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  Eigen::Index check_batch(const PixelMatrix& images) const {
    if (static_cast<std::size_t>(images.cols()) != rows_ * cols_) {
      throw InvalidArgument("EmbeddingPlan: batch rows must hold N_y * N_x pixels");
    }
    return images.rows();
  }

  // out[n, block k] = eps_k * sum_i w(i) e^{i i theta^y_k} (re + i im)[n*N_y + i, k]
  // with w(i) = i when weight_by_row, else 1.
  Eigen::MatrixXd fold_columns(const Eigen::MatrixXd& re, const Eigen::MatrixXd& im,
                               Eigen::Index batch, bool weight_by_row) const {
    const auto kb = static_cast<Eigen::Index>(emb_->blocks());
    const Eigen::MatrixXd& cy = weight_by_row ? py_.weighted_cos() : py_.cos();
    const Eigen::MatrixXd& sy = weight_by_row ? py_.weighted_sin() : py_.sin();
    Eigen::MatrixXd out(batch, 2 * kb);
    for (Eigen::Index k = 0; k < kb; ++k) {
      const cplx eps = emb_->basis_block(static_cast<std::size_t>(k));
      for (Eigen::Index n = 0; n < batch; ++n) {
        double acc_re = 0.0;
        double acc_im = 0.0;
        const Eigen::Index base = n * rows_i();
        for (Eigen::Index i = 0; i < rows_i(); ++i) {
          const double r = re(base + i, k);
          const double m = im(base + i, k);
          acc_re += cy(i, k) * r - sy(i, k) * m;
          acc_im += sy(i, k) * r + cy(i, k) * m;
        }
        const cplx v = cplx(acc_re, acc_im) * eps;
        out(n, 2 * k) = v.real();
        out(n, 2 * k + 1) = v.imag();
      }
    }
    return out;
  }

  const ImageEmbedder* emb_;
  std::size_t rows_;
  std::size_t cols_;
  PhaseTable px_;
  PhaseTable py_;
};

/// Separable embedding of one image.
inline Eigen::VectorXd embed_image(const ImageEmbedder& emb, const Image& img) {
  return EmbeddingPlan(emb, img.rows(), img.cols()).embed(img);
}

/// Same embedding aggregated in the other order: each column is folded with
/// powers of R_y first, then the column results are folded with powers of R_x.
inline Eigen::VectorXd embed_image_columns_first(const ImageEmbedder& emb, const Image& img) {
  const AxisOperator rx = emb.x_operator();
  const AxisOperator ry = emb.y_operator();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(emb.dim()));
  for (std::size_t j = 0; j < img.cols(); ++j) {
    Eigen::VectorXd column = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(emb.dim()));
    for (std::size_t i = 0; i < img.rows(); ++i) column += img(i, j) * ry.apply_power(i, emb.basis());
    sum += rx.apply_power(j, column);
  }
  return sum;
}

/// Literal double sum sum_i sum_j p_ij R_y^i R_x^j e. Quadratic in image size
/// times d; meant as a test oracle.
inline Eigen::VectorXd embed_image_oracle(const ImageEmbedder& emb, const Image& img) {
  const AxisOperator rx = emb.x_operator();
  const AxisOperator ry = emb.y_operator();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(emb.dim()));
  for (std::size_t i = 0; i < img.rows(); ++i) {
    const AxisOperator ry_i = operator_power(ry, i);
    for (std::size_t j = 0; j < img.cols(); ++j) {
      const AxisOperator rx_j = operator_power(rx, j);
      sum += img(i, j) * apply_operator(ry_i, apply_operator(rx_j, emb.basis()));
    }
  }
  return sum;
}

/// (sum p_ij cos(j tx + i ty), sum p_ij sin(j tx + i ty)).
inline Eigen::Vector2d block_feature(const Image& img, double theta_x_k, double theta_y_k) {
  Eigen::Vector2d f = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < img.rows(); ++i) {
    for (std::size_t j = 0; j < img.cols(); ++j) {
      const double phi =
          static_cast<double>(j) * theta_x_k + static_cast<double>(i) * theta_y_k;
      f[0] += img(i, j) * std::cos(phi);
      f[1] += img(i, j) * std::sin(phi);
    }
  }
  return f;
}

inline AngleGradient embedding_gradient(const ImageEmbedder& emb, const Image& img,
                                        const Eigen::VectorXd& upstream) {
  return EmbeddingPlan(emb, img.rows(), img.cols()).gradient(img, upstream);
}

inline std::vector<Eigen::VectorXd> batch_embed(const ImageEmbedder& emb,
                                                std::span<const Image> imgs) {
  std::vector<Eigen::VectorXd> out;
  if (imgs.empty()) return out;
  const std::size_t rows = imgs.front().rows();
  const std::size_t cols = imgs.front().cols();
  for (const auto& img : imgs) {
    if (img.rows() != rows || img.cols() != cols) {
      throw InvalidArgument("batch_embed: images in a batch must share dimensions");
    }
  }
  const EmbeddingPlan plan(emb, rows, cols);
  out.reserve(imgs.size());
  for (const auto& img : imgs) out.push_back(plan.embed(img));
  return out;
}

}  // namespace monoidal
