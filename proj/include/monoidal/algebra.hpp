#pragma once

// Monoidal elements and block-rotation axis operators.
//
// An axis operator R is a direct sum of d/2 planar rotations R(theta_k).
// Composition along axis i:
//
//     (a, n) o_i (b, m) = (a + R_i^{n_i} b, n + m)   with n_j == m_j for j != i
//
// Operators built from the same 2x2 block partition commute, which is what
// makes the interchange law hold for the two image axes.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "monoidal/error.hpp"
#include "monoidal/rng.hpp"

namespace monoidal {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduces an angle into [0, 2*pi).
inline double wrap_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a tiny negative value can round back up to exactly 2*pi
  return r >= kTwoPi ? 0.0 : r;
}

/// The d/2 rotation angles of one axis operator.
class RotationAngles {
 public:
  explicit RotationAngles(std::vector<double> angles) : angles_(std::move(angles)) {
    if (angles_.empty()) throw InvalidArgument("RotationAngles: need at least one angle");
    for (double a : angles_) {
      if (!std::isfinite(a)) throw InvalidArgument("RotationAngles: non-finite angle");
    }
  }

  /// All-zero angles for a d-dimensional operator (the identity).
  static RotationAngles zeros(std::size_t dim) {
    if (dim == 0 || dim % 2 != 0) {
      throw InvalidArgument("RotationAngles: dimension must be even and positive, got " +
                            std::to_string(dim));
    }
    return RotationAngles(std::vector<double>(dim / 2, 0.0));
  }

  /// Independent uniform draws on [0, 2*pi).
  static RotationAngles uniform(std::size_t blocks, Rng& rng) {
    std::vector<double> a(blocks);
    for (auto& x : a) x = rng.uniform(0.0, kTwoPi);
    return RotationAngles(std::move(a));
  }

  std::size_t size() const noexcept { return angles_.size(); }
  std::size_t dim() const noexcept { return 2 * angles_.size(); }
  double operator[](std::size_t k) const { return angles_[k]; }
  std::span<const double> values() const noexcept { return angles_; }

  friend bool operator==(const RotationAngles&, const RotationAngles&) = default;

 private:
  std::vector<double> angles_;
};

/// [[cos phi, -sin phi], [sin phi, cos phi]].
inline Eigen::Matrix2d block_rotation(double phi) {
  if (!std::isfinite(phi)) throw InvalidArgument("block_rotation: non-finite angle");
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

/// A d x d orthogonal operator stored as d/2 block angles.
class AxisOperator {
 public:
  explicit AxisOperator(RotationAngles angles) : angles_(std::move(angles)) {}

  static AxisOperator identity(std::size_t dim) { return AxisOperator(RotationAngles::zeros(dim)); }

  std::size_t dim() const noexcept { return angles_.dim(); }
  std::size_t blocks() const noexcept { return angles_.size(); }
  const RotationAngles& angles() const noexcept { return angles_; }

  /// Dense block-diagonal matrix. Off-block entries are exactly zero.
  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim(), dim());
    for (std::size_t k = 0; k < blocks(); ++k) {
      m.block<2, 2>(2 * k, 2 * k) = block_rotation(angles_[k]);
    }
    return m;
  }

  /// R^n v without materializing R^n.
  Eigen::VectorXd apply_power(std::size_t n, const Eigen::VectorXd& v) const {
    check_dim(v);
    Eigen::VectorXd out(v.size());
    const double scale = static_cast<double>(n);
    for (std::size_t k = 0; k < blocks(); ++k) {
      const double phi = scale * angles_[k];
      const double c = std::cos(phi);
      const double s = std::sin(phi);
      const double x = v[2 * k];
      const double y = v[2 * k + 1];
      out[2 * k] = c * x - s * y;
      out[2 * k + 1] = s * x + c * y;
    }
    return out;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return apply_power(1, v); }

 private:
  void check_dim(const Eigen::VectorXd& v) const {
    if (static_cast<std::size_t>(v.size()) != dim()) {
      throw InvalidArgument("AxisOperator: vector length " + std::to_string(v.size()) +
                            " does not match operator dimension " + std::to_string(dim()));
    }
  }

  RotationAngles angles_;
};

/// R^n as an operator: every block angle scaled by n, reduced mod 2*pi.
inline AxisOperator operator_power(const AxisOperator& op, std::size_t n) {
  std::vector<double> a(op.blocks());
  for (std::size_t k = 0; k < a.size(); ++k) {
    a[k] = wrap_angle(static_cast<double>(n) * op.angles()[k]);
  }
  return AxisOperator(RotationAngles(std::move(a)));
}

inline Eigen::VectorXd apply_operator(const AxisOperator& op, const Eigen::VectorXd& v) {
  return op.apply(v);
}

/// Anything that can act on d-vectors through integer powers. AxisOperator is
/// the production model; DenseOperator exists so the law checks can be run
/// against operators that are not block aligned.
template <class Op>
concept AxisAction = requires(const Op& op, std::size_t n, const Eigen::VectorXd& v) {
  { op.dim() } -> std::convertible_to<std::size_t>;
  { op.apply_power(n, v) } -> std::convertible_to<Eigen::VectorXd>;
};

/// General square matrix operator; powers by repeated multiplication.
class DenseOperator {
 public:
  explicit DenseOperator(Eigen::MatrixXd m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0) {
      throw InvalidArgument("DenseOperator: matrix must be square and non-empty");
    }
  }

  /// Haar-ish random orthogonal matrix from the QR factorization of a
  /// seeded Gaussian matrix. Generically shares no invariant 2-planes with
  /// any block-rotation operator.
  static DenseOperator random_orthogonal(std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd g(dim, dim);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.normal();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    return DenseOperator(std::move(q));
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  const Eigen::MatrixXd& matrix() const noexcept { return m_; }

  Eigen::VectorXd apply_power(std::size_t n, const Eigen::VectorXd& v) const {
    if (v.size() != m_.rows()) throw InvalidArgument("DenseOperator: dimension mismatch");
    Eigen::VectorXd out = v;
    for (std::size_t i = 0; i < n; ++i) out = m_ * out;
    return out;
  }

 private:
  Eigen::MatrixXd m_;
};

/// Type-erased axis action, for mixing operator kinds in one operator list.
class AnyOperator {
 public:
  template <AxisAction Op>
  AnyOperator(Op op)  // NOLINT(google-explicit-constructor)
      : dim_(op.dim()),
        apply_([op = std::move(op)](std::size_t n, const Eigen::VectorXd& v) {
          return Eigen::VectorXd(op.apply_power(n, v));
        }) {}

  std::size_t dim() const noexcept { return dim_; }
  Eigen::VectorXd apply_power(std::size_t n, const Eigen::VectorXd& v) const {
    return apply_(n, v);
  }

 private:
  std::size_t dim_;
  std::function<Eigen::VectorXd(std::size_t, const Eigen::VectorXd&)> apply_;
};

/// Content vector plus one extent per axis.
struct MonoidalElement {
  Eigen::VectorXd content;
  std::vector<std::size_t> extents;

  static MonoidalElement identity(std::size_t dim, std::size_t axes) {
    return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)),
            std::vector<std::size_t>(axes, 0)};
  }

  /// A single cell: extent 1 along every axis.
  static MonoidalElement unit_cell(Eigen::VectorXd content, std::size_t axes) {
    return {std::move(content), std::vector<std::size_t>(axes, 1)};
  }

  /// All extents zero: occupies no cells and composes with anything.
  bool is_empty() const {
    return std::all_of(extents.begin(), extents.end(), [](std::size_t e) { return e == 0; });
  }
};

/// x o_axis y.
///
/// Off-axis extents must agree. An empty operand (all extents zero) is
/// compatible with anything and the result takes the other operand's extents;
/// its content is still added, so the identity element is the empty element
/// with zero content.
template <AxisAction Op>
MonoidalElement compose_axis(const MonoidalElement& x, const MonoidalElement& y, std::size_t axis,
                             std::span<const Op> ops) {
  const std::size_t axes = ops.size();
  if (axis >= axes) {
    throw InvalidArgument("compose_axis: axis " + std::to_string(axis) + " out of range for " +
                          std::to_string(axes) + " operators");
  }
  if (x.extents.size() != axes || y.extents.size() != axes) {
    throw InvalidArgument("compose_axis: element extent count does not match operator count");
  }
  const auto dim = static_cast<Eigen::Index>(ops[axis].dim());
  if (x.content.size() != dim || y.content.size() != dim) {
    throw InvalidArgument("compose_axis: content dimension does not match operator dimension");
  }

  MonoidalElement out;
  if (x.is_empty()) {
    out.extents = y.extents;
  } else if (y.is_empty()) {
    out.extents = x.extents;
  } else {
    for (std::size_t j = 0; j < axes; ++j) {
      if (j != axis && x.extents[j] != y.extents[j]) {
        throw CompositionError(
            j, "compose_axis: extents differ on axis " + std::to_string(j) + " (" +
                   std::to_string(x.extents[j]) + " vs " + std::to_string(y.extents[j]) +
                   ") while composing along axis " + std::to_string(axis));
      }
    }
    out.extents = x.extents;
    out.extents[axis] = x.extents[axis] + y.extents[axis];
  }
  out.content = x.content + ops[axis].apply_power(x.extents[axis], y.content);
  return out;
}

template <AxisAction Op>
MonoidalElement compose_axis(const MonoidalElement& x, const MonoidalElement& y, std::size_t axis,
                             const std::vector<Op>& ops) {
  return compose_axis(x, y, axis, std::span<const Op>(ops));
}

/// sum_t R^t v_t.
inline Eigen::VectorXd embed_sequence(std::span<const Eigen::VectorXd> elements,
                                      const AxisOperator& op) {
  if (elements.empty()) throw InvalidArgument("embed_sequence: empty sequence");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(op.dim()));
  for (std::size_t t = 0; t < elements.size(); ++t) {
    sum += op.apply_power(t, elements[t]);
  }
  return sum;
}

struct InterchangeReport {
  bool passed = false;
  bool extents_match = true;
  double max_deviation = 0.0;
};

inline constexpr double kInterchangeTolerance = 1e-9;

/// Evaluates (x o_0 y) o_1 (z o_0 w) against (x o_1 z) o_0 (y o_1 w), with
/// op_a acting along axis 0 and op_b along axis 1, on seeded random quadruples
/// whose extents make both sides defined.
template <AxisAction OpA, AxisAction OpB>
InterchangeReport check_interchange(const OpA& op_a, const OpB& op_b, std::size_t samples,
                                    std::uint64_t seed) {
  if (op_a.dim() != op_b.dim()) throw InvalidArgument("check_interchange: dimension mismatch");
  const std::vector<AnyOperator> ops{AnyOperator(op_a), AnyOperator(op_b)};
  const auto dim = static_cast<Eigen::Index>(op_a.dim());
  Rng rng(seed);

  auto random_content = [&] {
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.normal();
    return v;
  };
  auto random_extent = [&] { return static_cast<std::size_t>(1 + rng.below(6)); };

  InterchangeReport report;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t a = random_extent();
    const std::size_t b = random_extent();
    const std::size_t c = random_extent();
    const std::size_t c2 = random_extent();
    const MonoidalElement x{random_content(), {a, c}};
    const MonoidalElement y{random_content(), {b, c}};
    const MonoidalElement z{random_content(), {a, c2}};
    const MonoidalElement w{random_content(), {b, c2}};

    const auto lhs = compose_axis(compose_axis(x, y, 0, ops), compose_axis(z, w, 0, ops), 1, ops);
    const auto rhs = compose_axis(compose_axis(x, z, 1, ops), compose_axis(y, w, 1, ops), 0, ops);

    report.extents_match = report.extents_match && lhs.extents == rhs.extents;
    report.max_deviation =
        std::max(report.max_deviation, (lhs.content - rhs.content).cwiseAbs().maxCoeff());
  }
  report.passed = report.extents_match && report.max_deviation < kInterchangeTolerance;
  return report;
}

}  // namespace monoidal
