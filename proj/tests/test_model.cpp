#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "monoidal/experiment.hpp"
#include "monoidal/gradcheck.hpp"
#include "monoidal/nn.hpp"
#include "monoidal/train.hpp"
#include "support.hpp"

using namespace monoidal;

namespace {

const double kLn10 = std::log(10.0);

PixelMatrix random_rows(Eigen::Index n, Eigen::Index cols, Rng& rng) {
  PixelMatrix x(n, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  return x;
}

std::vector<std::uint8_t> random_labels(std::size_t n, Rng& rng) {
  std::vector<std::uint8_t> y(n);
  for (auto& l : y) l = static_cast<std::uint8_t>(rng.below(10));
  return y;
}

// Central differences on `coords` seeded coordinates of every parameter block,
// against the analytic gradient from arm.step. Returns the worst relative error
// per block.
template <class Arm>
std::vector<double> fd_worst_per_block(Arm& arm, const PixelMatrix& x,
                                       const std::vector<std::uint8_t>& y, std::size_t coords,
                                       Rng& rng) {
  const auto grads = arm.step(x, y).second;
  auto params = arm.parameters();
  std::vector<double> worst(params.size(), 0.0);
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t c = 0; c < coords; ++c) {
      const std::size_t i = rng.below(params[b].size());
      const double saved = params[b][i];
      auto loss_at = [&](double v) {
        params[b][i] = v;
        arm.after_update();
        return arm.step(x, y).first;
      };
      const double numeric = (loss_at(saved + 1e-5) - loss_at(saved - 1e-5)) / 2e-5;
      params[b][i] = saved;
      arm.after_update();
      worst[b] = std::max(worst[b], relative_error(grads[b][i], numeric));
    }
  }
  return worst;
}

// A small, linearly separable-ish synthetic split: class c lights up pixel block c.
SplitData synthetic_split(std::size_t train, std::size_t val, std::size_t test, std::uint64_t seed) {
  Rng rng(seed);
  auto make = [&](std::size_t n) {
    Dataset ds;
    ds.rows = 6;
    ds.cols = 6;
    ds.normalized = true;
    ds.pixels = PixelMatrix::Zero(static_cast<Eigen::Index>(n), 36);
    for (std::size_t k = 0; k < n; ++k) {
      const auto label = static_cast<std::uint8_t>(rng.below(10));
      ds.labels.push_back(label);
      for (Eigen::Index p = 0; p < 36; ++p) ds.pixels(static_cast<Eigen::Index>(k), p) = 0.2 * rng.uniform();
      ds.pixels(static_cast<Eigen::Index>(k), 3 * label) = 1.0;
      ds.pixels(static_cast<Eigen::Index>(k), 3 * label + 1) = 1.0;
    }
    return ds;
  };
  return {make(train), make(val), make(test)};
}

}  // namespace

TEST(SoftmaxCrossEntropy, ZeroLogitsGiveLn10) {
  const auto r = softmax_cross_entropy(Eigen::VectorXd::Zero(10), 3);
  EXPECT_NEAR(r.loss, 2.302585, 1e-6);
  EXPECT_NEAR(r.grad[3], 0.1 - 1.0, 1e-15);
  EXPECT_NEAR(r.grad[0], 0.1, 1e-15);
}

TEST(SoftmaxCrossEntropy, SaturatedCorrectPrediction) {
  Eigen::VectorXd logits = Eigen::VectorXd::Zero(10);
  logits[6] = 1e6;
  const auto r = softmax_cross_entropy(logits, 6);
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
  EXPECT_LT(r.grad.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_TRUE(std::isfinite(softmax_cross_entropy(logits, 2).loss));
}

TEST(SoftmaxCrossEntropy, GradientMatchesFiniteDifferences) {
  Rng rng(1);
  for (int s = 0; s < 20; ++s) {
    Eigen::VectorXd logits(10);
    for (auto& v : logits) v = 3.0 * rng.normal();
    const std::size_t label = rng.below(10);
    const auto r = softmax_cross_entropy(logits, label);
    for (Eigen::Index k = 0; k < 10; ++k) {
      const double numeric = central_difference(
          [&](double v) {
            Eigen::VectorXd l = logits;
            l[k] = v;
            return softmax_cross_entropy(l, label).loss;
          },
          logits[k]);
      EXPECT_NEAR(r.grad[k], numeric, 1e-6);
    }
  }
}

TEST(SoftmaxCrossEntropy, LabelOutOfRangeThrows) {
  EXPECT_THROW(softmax_cross_entropy(Eigen::VectorXd::Zero(10), 10), InvalidArgument);
}

TEST(CrossEntropyBatch, MeanOfPerSampleLosses) {
  Rng rng(2);
  Eigen::MatrixXd logits(4, 10);
  for (auto& v : logits.reshaped()) v = rng.normal();
  const std::vector<std::uint8_t> y{1, 5, 9, 0};
  const auto b = cross_entropy_batch(logits, y);
  double total = 0.0;
  for (Eigen::Index n = 0; n < 4; ++n) {
    const auto r = softmax_cross_entropy(logits.row(n).transpose(), y[static_cast<std::size_t>(n)]);
    total += r.loss;
    EXPECT_LT((b.grad.row(n).transpose() - r.grad / 4.0).cwiseAbs().maxCoeff(), 1e-15);
  }
  EXPECT_NEAR(b.mean_loss, total / 4.0, 1e-14);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  std::vector<double> p{0.5, -1.5, 2.0};
  const std::vector<double> g(3, 0.0);
  AdamState st({3}, 1e-3);
  const std::vector<std::span<double>> ps{p};
  const std::vector<std::span<const double>> gs{g};
  for (int t = 0; t < 5; ++t) adam_step(st, ps, gs);
  EXPECT_EQ(p, (std::vector<double>{0.5, -1.5, 2.0}));
  EXPECT_EQ(st.step, 5u);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  for (double grad : {5.0, -0.01, 1e4}) {
    std::vector<double> p{1.0};
    const std::vector<double> g{grad};
    AdamState st({1}, 0.001);
    adam_step(st, std::vector<std::span<double>>{p}, std::vector<std::span<const double>>{g});
    EXPECT_NEAR(std::abs(p[0] - 1.0), 0.001, 1e-9);
    EXPECT_LT((p[0] - 1.0) * grad, 0.0);
  }
}

TEST(Adam, ThreeStepTraceMatchesHandRecurrence) {
  // m_t = 0.9 m + 0.1 g, v_t = 0.999 v + 0.001 g^2 with g = 1:
  //   m = 0.1, 0.19, 0.271;  v = 0.001, 0.001999, 0.002997001
  // Bias correction makes m_hat = v_hat = 1 at every step.
  std::vector<double> p{0.0};
  const std::vector<double> g{1.0};
  AdamState st({1}, 0.001);
  const double expected_m[] = {0.1, 0.19, 0.271};
  const double expected_v[] = {0.001, 0.001999, 0.002997001};
  for (int t = 0; t < 3; ++t) {
    adam_step(st, std::vector<std::span<double>>{p}, std::vector<std::span<const double>>{g});
    EXPECT_NEAR(st.first[0][0], expected_m[t], 1e-15);
    EXPECT_NEAR(st.second[0][0], expected_v[t], 1e-15);
    EXPECT_NEAR(p[0], -(t + 1) * 0.001 / (1.0 + 1e-8), 1e-15);
  }
  EXPECT_EQ(st.step, 3u);
}

TEST(Adam, ShapeMismatchThrows) {
  std::vector<double> p{0.0, 1.0};
  const std::vector<double> g{1.0};
  AdamState st({2}, 0.001);
  EXPECT_THROW(adam_step(st, std::vector<std::span<double>>{p}, std::vector<std::span<const double>>{g}),
               InvalidArgument);
  EXPECT_THROW(adam_step(st, std::vector<std::span<double>>{}, std::vector<std::span<const double>>{}),
               InvalidArgument);
  EXPECT_EQ(st.step, 0u);
}

TEST(Init, UniformFanInBoundsAndZeroBiases) {
  Rng rng(3);
  const auto head = LinearHead::init(32, 10, rng);
  EXPECT_EQ(head.weight.rows(), 10);
  EXPECT_EQ(head.weight.cols(), 32);
  EXPECT_LE(head.weight.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(32.0));
  EXPECT_EQ(head.bias, Eigen::VectorXd::Zero(10));
  const auto mlp = MlpModel::init(784, 128, 10, rng);
  EXPECT_EQ(mlp.w1.rows(), 128);
  EXPECT_EQ(mlp.w1.cols(), 784);
  EXPECT_EQ(mlp.w2.rows(), 10);
  EXPECT_EQ(mlp.w2.cols(), 128);
  EXPECT_LE(mlp.w1.cwiseAbs().maxCoeff(), 1.0 / 28.0);
  EXPECT_LE(mlp.w2.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(128.0));
  EXPECT_EQ(mlp.b1, Eigen::VectorXd::Zero(128));
  EXPECT_EQ(mlp.b2, Eigen::VectorXd::Zero(10));
}

TEST(GradientIntegrity, MonoidalAnglesWeightsBias) {
  Rng rng(4);
  detail::MonoidalArm arm(MonoidalClassifier::init(8, 6, 5, 11));
  const auto x = random_rows(9, 30, rng);
  const auto y = random_labels(9, rng);
  const auto worst = fd_worst_per_block(arm, x, y, 20, rng);
  ASSERT_EQ(worst.size(), 4u);
  const char* names[] = {"theta_x", "theta_y", "W", "b"};
  for (std::size_t b = 0; b < 4; ++b) EXPECT_LT(worst[b], 1e-4) << names[b];
}

TEST(GradientIntegrity, MlpAllGroupsOnFiveSampleBatch) {
  Rng rng(5);
  detail::MlpArm arm{MlpModel::init(20, 16, 10, rng)};
  const auto x = random_rows(5, 20, rng);
  const auto y = random_labels(5, rng);
  const auto worst = fd_worst_per_block(arm, x, y, 20, rng);
  ASSERT_EQ(worst.size(), 4u);
  const char* names[] = {"W1", "b1", "W2", "b2"};
  for (std::size_t b = 0; b < 4; ++b) EXPECT_LT(worst[b], 1e-4) << names[b];
}

TEST(GradientIntegrity, LinearHead) {
  Rng rng(6);
  detail::LinearArm arm{LinearHead::init(12, 10, rng)};
  const auto x = random_rows(7, 12, rng);
  const auto y = random_labels(7, rng);
  for (double w : fd_worst_per_block(arm, x, y, 20, rng)) EXPECT_LT(w, 1e-4);
}

TEST(Mlp, ZeroOutputLayerReducesToLogisticRegressionOnHidden) {
  Rng rng(7);
  MlpModel m = MlpModel::init(15, 8, 10, rng);
  m.w2.setZero();
  const auto x = random_rows(6, 15, rng);
  const auto y = random_labels(6, rng);
  const auto cache = m.forward(x);
  const auto ce = cross_entropy_batch(cache.logits, y);
  const auto g = m.backward(x, cache, ce.grad);
  LinearHead head{m.w2, m.b2};
  const auto hg = head.backward(cache.hidden, cross_entropy_batch(head.forward(cache.hidden), y).grad);
  EXPECT_LT((g.w2 - hg.weight).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((g.b2 - hg.bias).cwiseAbs().maxCoeff(), 1e-15);
  // With W2 = 0 nothing flows back into the frozen first layer.
  EXPECT_EQ(g.w1.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.b1.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Evaluate, SingleCorrectAndSingleWrong) {
  LinearHead head{Eigen::MatrixXd::Identity(10, 10), Eigen::VectorXd::Zero(10)};
  PixelMatrix x = PixelMatrix::Zero(1, 10);
  x(0, 4) = 1.0;
  EXPECT_EQ(evaluate(head, x, std::vector<std::uint8_t>{4}), 1.0);
  EXPECT_EQ(evaluate(head, x, std::vector<std::uint8_t>{5}), 0.0);
}

TEST(Evaluate, TenSamplesAgainstHandArgmaxTable) {
  // Rows are logits; ties resolve to the lowest index.
  Eigen::MatrixXd logits(10, 10);
  logits.setZero();
  const int winner[10] = {0, 3, 9, 2, 2, 7, 0, 5, 1, 8};
  for (int n = 0; n < 10; ++n) logits(n, winner[n]) = 1.0 + n;
  logits(0, 0) = 0.0;   // all zero: argmax 0
  logits(4, 6) = 5.0;   // tie between 2 and 6 at 5.0: argmax 2
  logits(6, 0) = -1.0;  // all others 0, so argmax is 1
  const std::vector<std::uint8_t> labels{0, 3, 9, 2, 6, 7, 1, 5, 1, 0};
  // hand argmax: 0,3,9,2,2,7,1,5,1,8 -> correct at 0,1,2,3,5,6,7,8
  EXPECT_DOUBLE_EQ(accuracy(logits, labels), 0.8);
}

TEST(TrainConfig, ValidationRules) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.embed_dim = 7;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.method = Method::dft;
  EXPECT_NO_THROW(c.validate());
  c.epochs = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.epochs = 1;
  c.validation_fraction = 1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.validation_fraction = 0.2;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_EQ(parse_method("mlp"), Method::mlp);
  EXPECT_FALSE(parse_method("cnn").has_value());
}

TEST(Training, MethodMismatchRejected) {
  const auto data = synthetic_split(20, 10, 10, 1);
  TrainConfig c;
  c.method = Method::dft;
  EXPECT_THROW(train_monoidal(c, data), InvalidArgument);
  EXPECT_THROW(train_mlp(c, data), InvalidArgument);
  FeatureSplit f{PixelMatrix::Zero(3, 2), {1, 2}, PixelMatrix::Zero(1, 2), {1},
                 PixelMatrix::Zero(1, 2), {1}};
  EXPECT_THROW(train_on_features(c, f), InvalidArgument);
}

TEST(Training, SmokeOneEpochOnHundredImagesLowersLoss) {
  const auto data = synthetic_split(100, 30, 30, 2);
  TrainConfig cfg;
  cfg.embed_dim = 8;
  cfg.epochs = 1;
  cfg.batch_size = 10;
  const auto run = train_monoidal(cfg, data);
  ASSERT_EQ(run.history.size(), 1u);
  EXPECT_EQ(run.selected_epoch, 1u);

  // Same model, stepped by hand: the training loss after the epoch is below
  // the loss before it.
  detail::MonoidalArm arm(MonoidalClassifier::init(8, 6, 6, cfg.seed));
  auto loss_now = [&] { return cross_entropy_batch(arm.logits(data.train.pixels), data.train.labels).mean_loss; };
  const double before = loss_now();
  EXPECT_NEAR(before, run.initial_train_loss, 1e-12);
  std::vector<std::size_t> sizes;
  for (const auto& p : arm.parameters()) sizes.push_back(p.size());
  AdamState adam(sizes, cfg.learning_rate);
  for (const auto& idx : batches(100, cfg.batch_size, derive_seed(cfg.seed, 1001))) {
    auto [loss, grads] = arm.step(gather_rows(data.train.pixels, idx), gather_labels(data.train.labels, idx));
    std::vector<std::span<const double>> gs(grads.begin(), grads.end());
    adam_step(adam, arm.parameters(), gs);
    arm.after_update();
  }
  EXPECT_LT(loss_now(), before);
}

TEST(Training, DeterministicGivenSeed) {
  const auto data = synthetic_split(200, 50, 50, 3);
  for (Method m : {Method::monoidal, Method::mlp}) {
    TrainConfig cfg;
    cfg.method = m;
    cfg.embed_dim = 6;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.seed = 5;
    const auto a = m == Method::mlp ? train_mlp(cfg, data) : train_monoidal(cfg, data);
    const auto b = m == Method::mlp ? train_mlp(cfg, data) : train_monoidal(cfg, data);
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
      EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
      EXPECT_EQ(a.history[e].validation_accuracy, b.history[e].validation_accuracy);
    }
    EXPECT_EQ(a.test_accuracy, b.test_accuracy);
    EXPECT_EQ(a.selected_epoch, b.selected_epoch);
  }
}

TEST(Training, SelectedEpochMaximizesValidationEarliestOnTies) {
  const auto data = synthetic_split(300, 40, 40, 4);
  for (Method m : {Method::monoidal, Method::mlp}) {
    TrainConfig cfg;
    cfg.method = m;
    cfg.embed_dim = 4;
    cfg.epochs = 8;
    cfg.batch_size = 32;
    const auto run = m == Method::mlp ? train_mlp(cfg, data) : train_monoidal(cfg, data);
    std::size_t expected = 1;
    for (std::size_t e = 1; e <= run.history.size(); ++e) {
      if (run.history[e - 1].validation_accuracy > run.history[expected - 1].validation_accuracy) expected = e;
    }
    EXPECT_EQ(run.selected_epoch, expected);
  }
}

TEST(Training, FeatureArmLearnsSeparableData) {
  const auto data = synthetic_split(500, 100, 100, 5);
  TrainConfig cfg;
  cfg.method = Method::dft;
  cfg.embed_dim = 36;
  cfg.epochs = 10;
  cfg.batch_size = 20;
  cfg.learning_rate = 1e-2;
  const FeatureSplit f{data.train.pixels, data.train.labels, data.validation.pixels,
                       data.validation.labels, data.test.pixels, data.test.labels};
  EXPECT_GT(train_on_features(cfg, f).test_accuracy, 0.9);
}

// Initial training loss of each table arm on real MNIST, before any update.
class LossSanity : public ::testing::TestWithParam<std::pair<Method, std::size_t>> {};

TEST_P(LossSanity, InitialLossWithinFivePercentOfLn10) {
  const auto dir = monoidal::test::mnist_dir();
  if (dir.empty()) GTEST_SKIP() << "MNIST not available; set MONOIDAL_DATA_DIR";
  static ExperimentRunner runner(load_mnist(dir, 0, 1.0 / 6.0));
  TrainConfig cfg;
  cfg.method = GetParam().first;
  cfg.embed_dim = GetParam().second;
  cfg.epochs = 1;
  cfg.seed = 1;
  const auto rec = runner.run(cfg);
  EXPECT_LT(std::abs(rec.run.initial_train_loss - kLn10) / kLn10, 0.05)
      << to_string(cfg.method) << "-" << cfg.embed_dim << " initial loss " << rec.run.initial_train_loss;
}

INSTANTIATE_TEST_SUITE_P(
    TableArms, LossSanity,
    ::testing::Values(std::pair{Method::dft, std::size_t{784}}, std::pair{Method::monoidal, std::size_t{32}},
                      std::pair{Method::dft, std::size_t{32}}, std::pair{Method::monoidal, std::size_t{8}},
                      std::pair{Method::dft, std::size_t{8}}, std::pair{Method::monoidal, std::size_t{2}},
                      std::pair{Method::dft, std::size_t{2}}, std::pair{Method::mlp, std::size_t{784}}),
    [](const auto& info) { return to_string(info.param.first) + std::to_string(info.param.second); });
