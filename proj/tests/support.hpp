#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "monoidal/algebra.hpp"
#include "monoidal/image.hpp"
#include "monoidal/rng.hpp"

namespace monoidal::test {

inline Image random_image(std::size_t rows, std::size_t cols, Rng& rng) {
  Image img = Image::zeros(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) img(i, j) = rng.uniform();
  }
  return img;
}

inline Eigen::VectorXd random_vector(std::size_t n, Rng& rng) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = rng.normal();
  return v;
}

// MNIST directory from the environment or the configure-time default; empty
// when neither points at an existing directory.
inline std::filesystem::path mnist_dir() {
  if (const char* env = std::getenv("MONOIDAL_DATA_DIR"); env && std::filesystem::is_directory(env)) {
    return env;
  }
  const std::filesystem::path configured = MONOIDAL_TEST_DATA_DIR;
  if (!configured.empty() && std::filesystem::is_directory(configured)) return configured;
  return {};
}

}  // namespace monoidal::test
