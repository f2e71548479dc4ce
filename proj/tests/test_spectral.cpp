#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <tuple>
#include <vector>

#include "monoidal/spectral.hpp"
#include "support.hpp"

using namespace monoidal;
using monoidal::test::random_image;

namespace {

std::shared_ptr<const SpectrumLayout> layout_ptr(std::size_t rows, std::size_t cols) {
  return std::make_shared<const SpectrumLayout>(build_layout(rows, cols));
}

// Feature value straight from the definition, with the orthonormal weight:
// 1/sqrt(N) when (fy, fx) is its own conjugate, sqrt(2/N) otherwise.
double naive_feature(const Image& img, const FeatureDescriptor& f) {
  const double ny = static_cast<double>(img.rows());
  const double nx = static_cast<double>(img.cols());
  const bool self = (2 * f.fy) % img.rows() == 0 && (2 * f.fx) % img.cols() == 0;
  const double w = (self ? 1.0 : std::sqrt(2.0)) / std::sqrt(ny * nx);
  double acc = 0.0;
  for (std::size_t i = 0; i < img.rows(); ++i) {
    for (std::size_t j = 0; j < img.cols(); ++j) {
      const double a = 2 * std::numbers::pi * (f.fy * i / ny + f.fx * j / nx);
      acc += img(i, j) * (f.phase == Phase::cos ? std::cos(a) : std::sin(a));
    }
  }
  return w * acc;
}

}  // namespace

TEST(BuildLayout, FourByFourHandEnumerated) {
  using P = Phase;
  const std::vector<FeatureDescriptor> expected{
      {0, 0, P::cos},                                                   // |f|^2 = 0
      {0, 1, P::cos}, {0, 1, P::sin}, {1, 0, P::cos}, {1, 0, P::sin},   // 1
      {1, 1, P::cos}, {1, 3, P::cos}, {1, 1, P::sin}, {1, 3, P::sin},   // 2
      {0, 2, P::cos}, {2, 0, P::cos},                                   // 4
      {1, 2, P::cos}, {1, 2, P::sin}, {2, 1, P::cos}, {2, 1, P::sin},   // 5
      {2, 2, P::cos},                                                   // 8
  };
  EXPECT_EQ(build_layout(4, 4).features(), expected);
}

TEST(BuildLayout, FourByFourSelfConjugateEntries) {
  const auto layout = build_layout(4, 4);
  ASSERT_EQ(layout.size(), 16u);
  std::vector<std::pair<std::size_t, std::size_t>> cos_only;
  for (const auto& f : layout.features()) {
    const bool has_sin = std::ranges::any_of(layout.features(), [&](const FeatureDescriptor& g) {
      return g.fy == f.fy && g.fx == f.fx && g.phase == Phase::sin;
    });
    if (f.phase == Phase::cos && !has_sin) cos_only.emplace_back(f.fy, f.fx);
  }
  std::ranges::sort(cos_only);
  const std::vector<std::pair<std::size_t, std::size_t>> expected{{0, 0}, {0, 2}, {2, 0}, {2, 2}};
  EXPECT_EQ(cos_only, expected);
}

TEST(BuildLayout, TwentyEightSquareHas784WithDcFirst) {
  const auto layout = build_layout(28, 28);
  EXPECT_EQ(layout.size(), 784u);
  EXPECT_EQ(layout[0], (FeatureDescriptor{0, 0, Phase::cos}));
}

TEST(BuildLayout, OneByOneIsDcOnly) {
  const auto layout = build_layout(1, 1);
  ASSERT_EQ(layout.size(), 1u);
  EXPECT_EQ(layout[0], (FeatureDescriptor{0, 0, Phase::cos}));
}

TEST(BuildLayout, OddAndRectangularShapesCountEveryDegreeOfFreedom) {
  for (auto [r, c] : {std::pair{3, 5}, {6, 4}, {7, 7}, {2, 9}}) {
    EXPECT_EQ(build_layout(r, c).size(), static_cast<std::size_t>(r * c));
  }
  EXPECT_THROW(build_layout(0, 3), InvalidArgument);
}

TEST(BuildLayout, SortedByMagnitudeThenWrapThenPhase) {
  const auto layout = build_layout(28, 28);
  auto key = [&](const FeatureDescriptor& f) {
    const std::size_t wy = std::min(f.fy, 28 - f.fy);
    const std::size_t wx = std::min(f.fx, 28 - f.fx);
    return std::make_tuple(wy * wy + wx * wx, wy, wx, f.phase == Phase::sin);
  };
  for (std::size_t n = 1; n < layout.size(); ++n) EXPECT_LE(key(layout[n - 1]), key(layout[n])) << n;
}

TEST(BuildLayout, DeterministicAcrossCalls) {
  EXPECT_EQ(build_layout(28, 28).features(), build_layout(28, 28).features());
}

TEST(Dft2d, ConstantImageHasOnlyDc) {
  const auto layout = layout_ptr(28, 28);
  Image img = Image::zeros(28, 28);
  for (std::size_t i = 0; i < 28; ++i) {
    for (std::size_t j = 0; j < 28; ++j) img(i, j) = 0.6;
  }
  const auto fv = dft2d_features(img, layout);
  EXPECT_NEAR(fv.values[0], 0.6 * 28, 1e-9);
  EXPECT_LT(fv.values.tail(783).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Dft2d, HotPixelAtOriginHasZeroPhase) {
  const auto layout = layout_ptr(28, 28);
  Image img = Image::zeros(28, 28);
  img(0, 0) = 1.0;
  const auto fv = dft2d_features(img, layout);
  const double s = 1.0 / 28.0;
  for (std::size_t n = 0; n < layout->size(); ++n) {
    const auto& f = (*layout)[n];
    const auto v = fv.values[static_cast<Eigen::Index>(n)];
    if (f.phase == Phase::sin) {
      EXPECT_NEAR(v, 0.0, 1e-12);
    } else if (layout->self_conjugate(f.fy, f.fx)) {
      EXPECT_NEAR(v, s, 1e-12);
    } else {
      EXPECT_NEAR(v, std::sqrt(2.0) * s, 1e-12);
    }
  }
}

TEST(Dft2d, MatchesNaiveOnFourByFour) {
  Rng rng(1);
  const auto layout = layout_ptr(4, 4);
  const auto img = random_image(4, 4, rng);
  const auto fv = dft2d_features(img, layout);
  for (std::size_t n = 0; n < 16; ++n) {
    EXPECT_NEAR(fv.values[static_cast<Eigen::Index>(n)], naive_feature(img, (*layout)[n]), 1e-9);
  }
}

TEST(Dft2d, SeparableEqualsNaiveOnFiftyCases) {
  Rng rng(2);
  for (int s = 0; s < 50; ++s) {
    const auto layout = layout_ptr(1 + rng.below(8), 1 + rng.below(8));
    const auto img = random_image(layout->rows(), layout->cols(), rng);
    const auto fv = dft2d_features(img, layout);
    for (std::size_t n = 0; n < layout->size(); ++n) {
      EXPECT_NEAR(fv.values[static_cast<Eigen::Index>(n)], naive_feature(img, (*layout)[n]), 1e-9);
    }
  }
}

TEST(Dft2d, ShapeMismatchThrows) {
  EXPECT_THROW(dft2d_features(Image::zeros(4, 5), layout_ptr(4, 4)), InvalidArgument);
}

TEST(Dft2d, EnergyPreservedOnTwentyEightSquare) {
  Rng rng(3);
  const auto layout = layout_ptr(28, 28);
  for (int s = 0; s < 10; ++s) {
    const auto img = random_image(28, 28, rng);
    double energy = 0.0;
    for (double p : img.pixels()) energy += p * p;
    const auto fv = dft2d_features(img, layout);
    EXPECT_LT(std::abs(fv.values.squaredNorm() - energy) / energy, 1e-8);
  }
}

TEST(Dft2d, FullReconstructionRecoversPixels) {
  Rng rng(4);
  for (auto [r, c] : {std::pair{28, 28}, {5, 7}, {4, 4}}) {
    const auto layout = layout_ptr(r, c);
    const auto img = random_image(r, c, rng);
    const auto back = reconstruct(dft2d_features(img, layout));
    for (std::size_t k = 0; k < img.pixels().size(); ++k) {
      EXPECT_NEAR(back.pixels()[k], img.pixels()[k], 1e-8);
    }
  }
}

TEST(Dft2d, BatchExtractionMatchesSingleImage) {
  Rng rng(5);
  const auto layout = layout_ptr(6, 5);
  const DftFeatureExtractor ex(layout);
  PixelMatrix batch(3, 30);
  std::vector<Image> imgs;
  for (Eigen::Index n = 0; n < 3; ++n) {
    imgs.push_back(random_image(6, 5, rng));
    for (Eigen::Index p = 0; p < 30; ++p) batch(n, p) = imgs.back().pixels()[static_cast<std::size_t>(p)];
  }
  const auto all = ex.extract_all(batch, 12);
  for (Eigen::Index n = 0; n < 3; ++n) {
    const auto one = ex.extract(imgs[static_cast<std::size_t>(n)], 12);
    EXPECT_LT((all.row(n).transpose() - one.values).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Truncate, FullLengthIsIdentity) {
  Rng rng(6);
  const auto fv = dft2d_features(random_image(28, 28, rng), layout_ptr(28, 28));
  EXPECT_EQ(truncate(fv, 784).values, fv.values);
}

TEST(Truncate, OneKeepsDcOnly) {
  Rng rng(7);
  const auto img = random_image(28, 28, rng);
  const auto t = truncate(dft2d_features(img, layout_ptr(28, 28)), 1);
  ASSERT_EQ(t.values.size(), 1);
  double sum = 0.0;
  for (double p : img.pixels()) sum += p;
  EXPECT_NEAR(t.values[0], sum / 28.0, 1e-9);
}

TEST(Truncate, TwoOnTwentyEightIsDcPlusLowestCos) {
  // Sort-and-take over every (fy, fx, phase) canonical representative.
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t, int, std::size_t, std::size_t>> keys;
  for (std::size_t fy = 0; fy < 28; ++fy) {
    for (std::size_t fx = 0; fx < 28; ++fx) {
      const std::size_t wy = std::min(fy, 28 - fy);
      const std::size_t wx = std::min(fx, 28 - fx);
      keys.emplace_back(wy * wy + wx * wx, wy, wx, 0, fy, fx);
    }
  }
  std::ranges::sort(keys);
  EXPECT_EQ(std::get<4>(keys[1]), 0u);
  EXPECT_EQ(std::get<5>(keys[1]), 1u);

  const auto layout = layout_ptr(28, 28);
  Rng rng(8);
  const auto img = random_image(28, 28, rng);
  const auto t = truncate(dft2d_features(img, layout), 2);
  EXPECT_EQ((*layout)[1], (FeatureDescriptor{0, 1, Phase::cos}));
  EXPECT_NEAR(t.values[1], naive_feature(img, {0, 1, Phase::cos}), 1e-9);
}

TEST(Truncate, BeyondAvailableThrows) {
  const auto fv = dft2d_features(Image::zeros(4, 4), layout_ptr(4, 4));
  EXPECT_THROW(truncate(fv, 17), InvalidArgument);
  EXPECT_THROW(DftFeatureExtractor(layout_ptr(4, 4)).extract(Image::zeros(4, 4), 17), InvalidArgument);
}
