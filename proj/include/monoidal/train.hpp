#pragma once

// End-to-end training for the three experiment arms. All arms share one
// protocol: Adam on minibatch mean cross-entropy, one validation pass per
// epoch, and the test score taken from the epoch with the best validation
// accuracy (earliest on ties).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "monoidal/data.hpp"
#include "monoidal/embedding.hpp"
#include "monoidal/error.hpp"
#include "monoidal/nn.hpp"
#include "monoidal/rng.hpp"

namespace monoidal {

enum class Method { monoidal, dft, mlp };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::monoidal: return "monoidal";
    case Method::dft: return "dft";
    case Method::mlp: return "mlp";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(const std::string& s) {
  if (s == "monoidal") return Method::monoidal;
  if (s == "dft") return Method::dft;
  if (s == "mlp") return Method::mlp;
  return std::nullopt;
}

struct TrainConfig {
  Method method = Method::monoidal;
  std::size_t embed_dim = 32;
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double validation_fraction = 1.0 / 6.0;
  std::uint64_t split_seed = 0;

  void validate() const {
    if (epochs < 1) throw InvalidArgument("epochs must be at least 1");
    if (batch_size < 1) throw InvalidArgument("batch size must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw InvalidArgument("learning rate must be positive");
    }
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
      throw InvalidArgument("validation fraction must lie in (0, 1)");
    }
    if (embed_dim < 1) throw InvalidArgument("embedding dimension must be positive");
    if (method == Method::monoidal && embed_dim % 2 != 0) {
      throw InvalidArgument("monoidal embedding dimension must be even, got " +
                            std::to_string(embed_dim));
    }
  }
};

struct EpochMetrics {
  double train_loss = 0.0;  // mean over the epoch's minibatches
  double validation_accuracy = 0.0;
};

struct TrainRun {
  TrainConfig config;
  double initial_train_loss = 0.0;  // training split, before the first update
  std::vector<EpochMetrics> history;
  std::size_t selected_epoch = 0;  // 1-based index into history
  double test_accuracy = 0.0;
};

using EpochCallback = std::function<void(std::size_t epoch, const EpochMetrics&)>;

inline PixelMatrix gather_rows(const PixelMatrix& src, std::span<const std::size_t> idx) {
  PixelMatrix out(static_cast<Eigen::Index>(idx.size()), src.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = src.row(static_cast<Eigen::Index>(idx[k]));
  }
  return out;
}

inline std::vector<std::uint8_t> gather_labels(std::span<const std::uint8_t> src,
                                               std::span<const std::size_t> idx) {
  std::vector<std::uint8_t> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(src[i]);
  return out;
}

/// Monoidal image embedding followed by a linear head.
struct MonoidalClassifier {
  ImageEmbedder embedder;
  LinearHead head;
  std::size_t rows = 0;
  std::size_t cols = 0;

  /// Basis (s, 0) per block with s = 1 / sqrt(rows * cols), the same scale the
  /// DFT features use.
  static MonoidalClassifier init(std::size_t dim, std::size_t rows, std::size_t cols,
                                 std::uint64_t seed) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows * cols));
    Rng head_rng(derive_seed(seed, 1));
    return {ImageEmbedder::random(dim, derive_seed(seed, 0), scale),
            LinearHead::init(dim, kNumClasses, head_rng), rows, cols};
  }

  Eigen::MatrixXd logits(const PixelMatrix& images) const {
    const EmbeddingPlan plan(embedder, rows, cols);
    return head.forward(plan.forward(images).output);
  }
};

namespace detail {

// Evaluate `logits_of` over `x` in fixed-size chunks.
template <class LogitsFn>
double chunked_accuracy(const PixelMatrix& x, std::span<const std::uint8_t> labels,
                        LogitsFn&& logits_of) {
  constexpr Eigen::Index kChunk = 2000;
  std::size_t correct = 0;
  for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, x.rows() - start);
    const PixelMatrix chunk = x.middleRows(start, len);
    const auto part = labels.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(len));
    correct += static_cast<std::size_t>(
        std::llround(accuracy(logits_of(chunk), part) * static_cast<double>(len)));
  }
  return labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
}

template <class LogitsFn>
double chunked_mean_loss(const PixelMatrix& x, std::span<const std::uint8_t> labels,
                         LogitsFn&& logits_of) {
  constexpr Eigen::Index kChunk = 2000;
  double total = 0.0;
  for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, x.rows() - start);
    const PixelMatrix chunk = x.middleRows(start, len);
    const auto part = labels.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(len));
    total += cross_entropy_batch(logits_of(chunk), part).mean_loss * static_cast<double>(len);
  }
  return labels.empty() ? 0.0 : total / static_cast<double>(labels.size());
}

// Shared epoch loop. `Arm` provides:
//   parameters() -> std::vector<std::span<double>>
//   step(x_batch, labels) -> (mean loss, grads as std::vector<std::vector<double>>)
//   after_update()
//   logits(x) -> Eigen::MatrixXd
// and is copyable (the best-validation snapshot is a copy).
template <class Arm>
TrainRun fit(const TrainConfig& cfg, Arm arm, const PixelMatrix& train_x,
             std::span<const std::uint8_t> train_y, const PixelMatrix& val_x,
             std::span<const std::uint8_t> val_y, const PixelMatrix& test_x,
             std::span<const std::uint8_t> test_y, const EpochCallback& on_epoch) {
  TrainRun run;
  run.config = cfg;
  auto logits_of = [&](const PixelMatrix& x) { return arm.logits(x); };
  run.initial_train_loss = chunked_mean_loss(train_x, train_y, logits_of);

  std::vector<std::size_t> sizes;
  for (const auto& p : arm.parameters()) sizes.push_back(p.size());
  AdamState adam(sizes, cfg.learning_rate);

  std::optional<Arm> best;
  double best_val = -1.0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = batches(train_y.size(), cfg.batch_size, derive_seed(cfg.seed, 1000 + epoch));
    double loss_sum = 0.0;
    for (const auto& idx : order) {
      const PixelMatrix xb = gather_rows(train_x, idx);
      const auto yb = gather_labels(train_y, idx);
      auto [loss, grads] = arm.step(xb, yb);
      loss_sum += loss;
      std::vector<std::span<const double>> grad_spans(grads.begin(), grads.end());
      const auto params = arm.parameters();
      adam_step(adam, params, grad_spans);
      arm.after_update();
    }
    EpochMetrics m;
    m.train_loss = order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size());
    m.validation_accuracy =
        chunked_accuracy(val_x, val_y, [&](const PixelMatrix& x) { return arm.logits(x); });
    run.history.push_back(m);
    if (m.validation_accuracy > best_val) {
      best_val = m.validation_accuracy;
      best = arm;
      run.selected_epoch = epoch;
    }
    if (on_epoch) on_epoch(epoch, m);
  }
  run.test_accuracy =
      chunked_accuracy(test_x, test_y, [&](const PixelMatrix& x) { return best->logits(x); });
  return run;
}

inline std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

struct MonoidalArm {
  MonoidalClassifier model;
  std::vector<double> theta_x;
  std::vector<double> theta_y;

  explicit MonoidalArm(MonoidalClassifier m)
      : model(std::move(m)),
        theta_x(to_vector(model.embedder.theta_x().values())),
        theta_y(to_vector(model.embedder.theta_y().values())) {}

  std::vector<std::span<double>> parameters() {
    return {theta_x, theta_y, as_span(model.head.weight), as_span(model.head.bias)};
  }

  std::pair<double, std::vector<std::vector<double>>> step(const PixelMatrix& x,
                                                          std::span<const std::uint8_t> y) const {
    const EmbeddingPlan plan(model.embedder, model.rows, model.cols);
    const auto fwd = plan.forward(x);
    const Eigen::MatrixXd logits = model.head.forward(fwd.output);
    const auto ce = cross_entropy_batch(logits, y);
    const auto hg = model.head.backward(fwd.output, ce.grad);
    const auto ag = plan.backward(x, fwd, hg.input);
    return {ce.mean_loss,
            {to_vector(as_span(ag.d_theta_x)), to_vector(as_span(ag.d_theta_y)),
             to_vector(as_span(hg.weight)), to_vector(as_span(hg.bias))}};
  }

  void after_update() {
    model.embedder.set_angles(theta_x, theta_y);
    // in place: parameters() hands out spans into these vectors
    std::ranges::copy(model.embedder.theta_x().values(), theta_x.begin());
    std::ranges::copy(model.embedder.theta_y().values(), theta_y.begin());
  }

  Eigen::MatrixXd logits(const PixelMatrix& x) const { return model.logits(x); }
};

struct LinearArm {
  LinearHead head;

  std::vector<std::span<double>> parameters() { return {as_span(head.weight), as_span(head.bias)}; }

  std::pair<double, std::vector<std::vector<double>>> step(const PixelMatrix& x,
                                                          std::span<const std::uint8_t> y) const {
    const auto ce = cross_entropy_batch(head.forward(x), y);
    const auto g = head.backward(x, ce.grad);
    return {ce.mean_loss, {to_vector(as_span(g.weight)), to_vector(as_span(g.bias))}};
  }

  void after_update() {}

  Eigen::MatrixXd logits(const PixelMatrix& x) const { return head.forward(x); }
};

struct MlpArm {
  MlpModel model;

  std::vector<std::span<double>> parameters() {
    return {as_span(model.w1), as_span(model.b1), as_span(model.w2), as_span(model.b2)};
  }

  std::pair<double, std::vector<std::vector<double>>> step(const PixelMatrix& x,
                                                          std::span<const std::uint8_t> y) const {
    const auto cache = model.forward(x);
    const auto ce = cross_entropy_batch(cache.logits, y);
    const auto g = model.backward(x, cache, ce.grad);
    return {ce.mean_loss,
            {to_vector(as_span(g.w1)), to_vector(as_span(g.b1)), to_vector(as_span(g.w2)),
             to_vector(as_span(g.b2))}};
  }

  void after_update() {}

  Eigen::MatrixXd logits(const PixelMatrix& x) const { return model.forward(x).logits; }
};

inline void require_normalized(const SplitData& data) {
  if (!data.train.normalized || !data.validation.normalized || !data.test.normalized) {
    throw InvalidArgument("training data must be normalized to [0, 1] first");
  }
}

}  // namespace detail

/// Learns both angle sets and the linear head jointly.
inline TrainRun train_monoidal(const TrainConfig& cfg, const SplitData& data,
                               const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (cfg.method != Method::monoidal) throw InvalidArgument("train_monoidal: method must be monoidal");
  detail::require_normalized(data);
  detail::MonoidalArm arm(
      MonoidalClassifier::init(cfg.embed_dim, data.train.rows, data.train.cols, cfg.seed));
  return detail::fit(cfg, std::move(arm), data.train.pixels, data.train.labels,
                     data.validation.pixels, data.validation.labels, data.test.pixels,
                     data.test.labels, on_epoch);
}

/// Precomputed feature matrices (one sample per row) for each partition.
struct FeatureSplit {
  PixelMatrix train_x;
  std::vector<std::uint8_t> train_y;
  PixelMatrix validation_x;
  std::vector<std::uint8_t> validation_y;
  PixelMatrix test_x;
  std::vector<std::uint8_t> test_y;
};

/// Logistic regression (linear head only) on fixed features.
inline TrainRun train_on_features(const TrainConfig& cfg, const FeatureSplit& f,
                                  const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (cfg.method != Method::dft) throw InvalidArgument("train_on_features: method must be dft");
  auto check = [](const PixelMatrix& x, const std::vector<std::uint8_t>& y, const char* name) {
    if (static_cast<std::size_t>(x.rows()) != y.size()) {
      throw InvalidArgument(std::string("train_on_features: ") + name +
                            " feature/label count mismatch");
    }
  };
  check(f.train_x, f.train_y, "train");
  check(f.validation_x, f.validation_y, "validation");
  check(f.test_x, f.test_y, "test");
  if (f.validation_x.cols() != f.train_x.cols() || f.test_x.cols() != f.train_x.cols()) {
    throw InvalidArgument("train_on_features: feature dimension differs between partitions");
  }
  Rng rng(derive_seed(cfg.seed, 1));
  detail::LinearArm arm{LinearHead::init(static_cast<std::size_t>(f.train_x.cols()), kNumClasses, rng)};
  return detail::fit(cfg, std::move(arm), f.train_x, f.train_y, f.validation_x, f.validation_y,
                     f.test_x, f.test_y, on_epoch);
}

/// One-hidden-layer ReLU network on raw pixels.
inline TrainRun train_mlp(const TrainConfig& cfg, const SplitData& data,
                          const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (cfg.method != Method::mlp) throw InvalidArgument("train_mlp: method must be mlp");
  detail::require_normalized(data);
  Rng rng(derive_seed(cfg.seed, 1));
  detail::MlpArm arm{MlpModel::init(data.train.pixel_count(), MlpModel::kHidden, kNumClasses, rng)};
  return detail::fit(cfg, std::move(arm), data.train.pixels, data.train.labels,
                     data.validation.pixels, data.validation.labels, data.test.pixels,
                     data.test.labels, on_epoch);
}

inline double evaluate(const MonoidalClassifier& model, const Dataset& ds) {
  return detail::chunked_accuracy(ds.pixels, ds.labels,
                                  [&](const PixelMatrix& x) { return model.logits(x); });
}

inline double evaluate(const LinearHead& head, const PixelMatrix& features,
                       std::span<const std::uint8_t> labels) {
  return detail::chunked_accuracy(features, labels,
                                  [&](const PixelMatrix& x) { return head.forward(x); });
}

inline double evaluate(const MlpModel& model, const Dataset& ds) {
  return detail::chunked_accuracy(ds.pixels, ds.labels,
                                  [&](const PixelMatrix& x) { return model.forward(x).logits; });
}

}  // namespace monoidal
