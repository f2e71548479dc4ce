#pragma once

// One experiment arm end to end: configuration in, ExperimentRecord out.
// Shared by the CLI and the acceptance suite.

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "monoidal/data.hpp"
#include "monoidal/spectral.hpp"
#include "monoidal/train.hpp"

namespace monoidal {

inline constexpr const char* kCsvHeader =
    "method,dim,seed,test_accuracy_pct,selected_epoch,wall_seconds";

struct ExperimentRecord {
  Method method = Method::monoidal;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  double test_accuracy_pct = 0.0;
  std::size_t selected_epoch = 0;
  double wall_seconds = 0.0;
  TrainRun run;
};

inline std::string format_accuracy(double pct) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", pct);
  return buf;
}

inline std::string csv_row(const ExperimentRecord& r) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f", r.wall_seconds);
  return to_string(r.method) + "," + std::to_string(r.dim) + "," + std::to_string(r.seed) + "," +
         format_accuracy(r.test_accuracy_pct) + "," + std::to_string(r.selected_epoch) + "," + buf;
}

/// Per-epoch history for the structured sidecar file.
inline nlohmann::json history_json(const ExperimentRecord& r) {
  const TrainConfig& c = r.run.config;
  nlohmann::json j;
  j["method"] = to_string(r.method);
  j["dim"] = r.dim;
  j["seed"] = r.seed;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["validation_fraction"] = c.validation_fraction;
  j["split_seed"] = c.split_seed;
  j["initial_train_loss"] = r.run.initial_train_loss;
  j["selected_epoch"] = r.selected_epoch;
  j["test_accuracy_pct"] = r.test_accuracy_pct;
  j["wall_seconds"] = r.wall_seconds;
  auto& h = j["history"] = nlohmann::json::array();
  for (std::size_t e = 0; e < r.run.history.size(); ++e) {
    h.push_back({{"epoch", e + 1},
                 {"train_loss", r.run.history[e].train_loss},
                 {"validation_accuracy", r.run.history[e].validation_accuracy}});
  }
  return j;
}

/// Holds the loaded data and lazily computed DFT features, so several arms
/// can run against one load.
class ExperimentRunner {
 public:
  explicit ExperimentRunner(SplitData data) : data_(std::move(data)) {}

  const SplitData& data() const noexcept { return data_; }

  /// Embedding/feature dimension an arm reports. The MLP always sees raw pixels.
  std::size_t reported_dim(const TrainConfig& cfg) const {
    return cfg.method == Method::mlp ? data_.train.pixel_count() : cfg.embed_dim;
  }

  ExperimentRecord run(TrainConfig cfg, const EpochCallback& on_epoch = {}) {
    if (cfg.method == Method::dft && cfg.embed_dim > data_.train.pixel_count()) {
      throw InvalidArgument("dft dimension " + std::to_string(cfg.embed_dim) + " exceeds the " +
                            std::to_string(data_.train.pixel_count()) + " available features");
    }
    if (cfg.method == Method::mlp) cfg.embed_dim = data_.train.pixel_count();
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    TrainRun run;
    switch (cfg.method) {
      case Method::monoidal: run = train_monoidal(cfg, data_, on_epoch); break;
      case Method::mlp: run = train_mlp(cfg, data_, on_epoch); break;
      case Method::dft: run = train_on_features(cfg, features(cfg.embed_dim), on_epoch); break;
    }
    const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
    ExperimentRecord rec;
    rec.method = cfg.method;
    rec.dim = reported_dim(cfg);
    rec.seed = cfg.seed;
    rec.test_accuracy_pct = 100.0 * run.test_accuracy;
    rec.selected_epoch = run.selected_epoch;
    rec.wall_seconds = wall.count();
    rec.run = std::move(run);
    return rec;
  }

 private:
  // The full layout is computed once; a truncation is a column prefix.
  FeatureSplit features(std::size_t dim) {
    if (!full_) {
      auto layout = std::make_shared<const SpectrumLayout>(
          build_layout(data_.train.rows, data_.train.cols));
      const DftFeatureExtractor ex(layout);
      const std::size_t n = layout->size();
      full_ = std::make_unique<FeatureSplit>(
          FeatureSplit{ex.extract_all(data_.train.pixels, n), data_.train.labels,
                       ex.extract_all(data_.validation.pixels, n), data_.validation.labels,
                       ex.extract_all(data_.test.pixels, n), data_.test.labels});
    }
    const auto d = static_cast<Eigen::Index>(dim);
    return {full_->train_x.leftCols(d),      full_->train_y, full_->validation_x.leftCols(d),
            full_->validation_y,             full_->test_x.leftCols(d), full_->test_y};
  }

  SplitData data_;
  std::unique_ptr<FeatureSplit> full_;
};

struct TableArm {
  Method method;
  std::size_t dim;
};

/// Rows of the results table, in output order.
inline std::vector<TableArm> table_arms(bool include_full_monoidal) {
  std::vector<TableArm> arms{{Method::dft, 784}};
  if (include_full_monoidal) arms.push_back({Method::monoidal, 784});
  for (std::size_t d : {32, 8, 2}) {
    arms.push_back({Method::monoidal, d});
    arms.push_back({Method::dft, d});
  }
  arms.push_back({Method::mlp, 784});
  return arms;
}

struct SeedSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; NaN for a single seed
};

inline SeedSummary summarize(const std::vector<double>& values) {
  SeedSummary s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2) {
    s.stddev = std::nan("");
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return s;
}

}  // namespace monoidal
