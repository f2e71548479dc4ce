#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "monoidal/error.hpp"
#include "monoidal/rng.hpp"

namespace monoidal {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LossAndGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// -log softmax(logits)[label] and its gradient softmax - onehot(label).
inline LossAndGrad softmax_cross_entropy(const Eigen::VectorXd& logits, std::size_t label) {
  if (label >= static_cast<std::size_t>(logits.size())) {
    throw InvalidArgument("softmax_cross_entropy: label " + std::to_string(label) +
                          " out of range for " + std::to_string(logits.size()) + " classes");
  }
  const double top = logits.maxCoeff();
  const Eigen::VectorXd shifted = logits.array() - top;
  const Eigen::VectorXd ex = shifted.array().exp();
  const double z = ex.sum();
  LossAndGrad out;
  out.loss = std::log(z) - shifted[static_cast<Eigen::Index>(label)];
  out.grad = ex / z;
  out.grad[static_cast<Eigen::Index>(label)] -= 1.0;
  return out;
}

struct BatchLoss {
  double mean_loss = 0.0;
  Eigen::MatrixXd grad;  // d mean_loss / d logits, B x C
};

/// Mean cross-entropy over the rows of `logits`.
inline BatchLoss cross_entropy_batch(const Eigen::MatrixXd& logits,
                                     std::span<const std::uint8_t> labels) {
  const Eigen::Index b = logits.rows();
  if (static_cast<std::size_t>(b) != labels.size()) {
    throw InvalidArgument("cross_entropy_batch: logits/labels count mismatch");
  }
  BatchLoss out;
  out.grad.resize(b, logits.cols());
  double total = 0.0;
  for (Eigen::Index n = 0; n < b; ++n) {
    const auto lg = softmax_cross_entropy(logits.row(n).transpose(), labels[n]);
    total += lg.loss;
    out.grad.row(n) = lg.grad.transpose();
  }
  const double inv = b > 0 ? 1.0 / static_cast<double>(b) : 0.0;
  out.mean_loss = total * inv;
  out.grad *= inv;
  return out;
}

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
inline double accuracy(const Eigen::MatrixXd& logits, std::span<const std::uint8_t> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw InvalidArgument("accuracy: logits/labels count mismatch");
  }
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (Eigen::Index n = 0; n < logits.rows(); ++n) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(n, c) > logits(n, best)) best = c;
    }
    if (static_cast<std::size_t>(best) == labels[static_cast<std::size_t>(n)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

namespace detail {

inline void fill_uniform(Eigen::Ref<Eigen::MatrixXd> m, double bound, Rng& rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
  }
}

}  // namespace detail

/// Affine map to class logits. Weights uniform in +-1/sqrt(fan_in), biases zero.
struct LinearHead {
  Eigen::MatrixXd weight;  // classes x in
  Eigen::VectorXd bias;

  static LinearHead init(std::size_t in, std::size_t classes, Rng& rng) {
    LinearHead h;
    h.weight.resize(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(in));
    detail::fill_uniform(h.weight, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    h.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(classes));
    return h;
  }

  std::size_t in() const noexcept { return static_cast<std::size_t>(weight.cols()); }

  template <class Derived>
  Eigen::MatrixXd forward(const Eigen::MatrixBase<Derived>& x) const {
    Eigen::MatrixXd out = x * weight.transpose();
    out.rowwise() += bias.transpose();
    return out;
  }

  struct Grad {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
    Eigen::MatrixXd input;  // d loss / d x
  };

  template <class Derived>
  Grad backward(const Eigen::MatrixBase<Derived>& x, const Eigen::MatrixXd& dlogits) const {
    Grad g;
    g.weight.noalias() = dlogits.transpose() * x;
    g.bias = dlogits.colwise().sum().transpose();
    g.input.noalias() = dlogits * weight;
    return g;
  }
};

/// One hidden ReLU layer.
struct MlpModel {
  Eigen::MatrixXd w1;  // hidden x in
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // classes x hidden
  Eigen::VectorXd b2;

  static constexpr std::size_t kInputs = 784;
  static constexpr std::size_t kHidden = 128;

  static MlpModel init(std::size_t in, std::size_t hidden, std::size_t classes, Rng& rng) {
    MlpModel m;
    const auto i = static_cast<Eigen::Index>(in);
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto c = static_cast<Eigen::Index>(classes);
    m.w1.resize(h, i);
    detail::fill_uniform(m.w1, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    m.b1 = Eigen::VectorXd::Zero(h);
    m.w2.resize(c, h);
    detail::fill_uniform(m.w2, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
    m.b2 = Eigen::VectorXd::Zero(c);
    return m;
  }

  struct Cache {
    Eigen::MatrixXd hidden;  // post-activation, B x hidden
    Eigen::MatrixXd logits;
  };

  template <class Derived>
  Cache forward(const Eigen::MatrixBase<Derived>& x) const {
    Cache c;
    c.hidden.noalias() = x * w1.transpose();
    c.hidden.rowwise() += b1.transpose();
    c.hidden = c.hidden.cwiseMax(0.0);
    c.logits.noalias() = c.hidden * w2.transpose();
    c.logits.rowwise() += b2.transpose();
    return c;
  }

  struct Grad {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;
  };

  template <class Derived>
  Grad backward(const Eigen::MatrixBase<Derived>& x, const Cache& c,
                const Eigen::MatrixXd& dlogits) const {
    Grad g;
    g.w2.noalias() = dlogits.transpose() * c.hidden;
    g.b2 = dlogits.colwise().sum().transpose();
    Eigen::MatrixXd dh = dlogits * w2;
    dh = (c.hidden.array() > 0.0).select(dh, 0.0);
    g.w1.noalias() = dh.transpose() * x;
    g.b1 = dh.colwise().sum().transpose();
    return g;
  }
};

/// Bias-corrected Adam over a fixed list of parameter blocks.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;

  AdamState(std::vector<std::size_t> block_sizes, double lr) : learning_rate(lr) {
    for (auto n : block_sizes) {
      first.emplace_back(n, 0.0);
      second.emplace_back(n, 0.0);
    }
  }
};

inline void adam_step(AdamState& state, std::span<const std::span<double>> params,
                      std::span<const std::span<const double>> grads) {
  if (params.size() != state.first.size() || grads.size() != state.first.size()) {
    throw InvalidArgument("adam_step: parameter block count does not match optimizer state");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != state.first[b].size() || grads[b].size() != state.first[b].size()) {
      throw InvalidArgument("adam_step: shape mismatch in block " + std::to_string(b));
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.first[b];
    auto& v = state.second[b];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = grads[b][i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      params[b][i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

template <class Derived>
std::span<double> as_span(Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

template <class Derived>
std::span<const double> as_span(const Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

}  // namespace monoidal
