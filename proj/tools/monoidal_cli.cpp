// monoidal: run experiment arms, reproduce the results table, run law checks.
//
// Exit codes: 0 success, 1 property failure, 2 usage error, 3 data error.

#include <curl/curl.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "monoidal/checks.hpp"
#include "monoidal/data.hpp"
#include "monoidal/experiment.hpp"

namespace fs = std::filesystem;
using namespace monoidal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

struct CommonFlags {
  std::size_t epochs = 20;
  std::size_t batch = 128;
  double lr = 1e-3;
  std::uint64_t split_seed = 0;
  std::string data_dir;
  std::string out;
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--epochs", f.epochs, "Training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--batch", f.batch, "Minibatch size")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", f.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--split-seed", f.split_seed, "Seed of the train/validation split");
  cmd->add_option("--data-dir", f.data_dir, "MNIST directory (default: $MONOIDAL_DATA_DIR)");
  cmd->add_option("--out", f.out, "Write CSV here (plus <out>.history.json) instead of stdout");
  cmd->add_flag("-v,--verbose", f.verbose, "Per-epoch progress on stderr");
}

fs::path resolve_data_dir(const CommonFlags& f) {
  if (!f.data_dir.empty()) return f.data_dir;
  if (const char* env = std::getenv("MONOIDAL_DATA_DIR")) return env;
  return {};
}

TrainConfig make_config(const CommonFlags& f, Method method, std::size_t dim, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.method = method;
  cfg.embed_dim = dim;
  cfg.epochs = f.epochs;
  cfg.batch_size = f.batch;
  cfg.learning_rate = f.lr;
  cfg.seed = seed;
  cfg.split_seed = f.split_seed;
  return cfg;
}

EpochCallback progress(const CommonFlags& f, const std::string& label) {
  if (!f.verbose) return {};
  return [label](std::size_t epoch, const EpochMetrics& m) {
    std::fprintf(stderr, "[%s] epoch %zu  loss %.4f  val %.2f%%\n", label.c_str(), epoch,
                 m.train_loss, 100.0 * m.validation_accuracy);
  };
}

void emit(const CommonFlags& f, const std::string& csv, const nlohmann::json& history) {
  if (f.out.empty()) {
    std::cout << csv << std::flush;
    return;
  }
  std::ofstream out(f.out);
  if (!out) throw IoError("cannot write " + f.out);
  out << csv;
  std::ofstream side(f.out + ".history.json");
  if (!side) throw IoError("cannot write " + f.out + ".history.json");
  side << history.dump(2) << "\n";
}

int cmd_run(const CommonFlags& f, const std::string& method_name, std::size_t dim,
            std::uint64_t seed) {
  const auto method = parse_method(method_name);
  if (!method) {
    std::cerr << "run: unknown method '" << method_name << "'\n";
    return kExitUsage;
  }
  if (*method == Method::monoidal && dim % 2 != 0) {
    std::cerr << "run: monoidal embedding dimension must be even, got " << dim << "\n";
    return kExitUsage;
  }
  TrainConfig cfg = make_config(f, *method, dim, seed);
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    std::cerr << "run: " << e.what() << "\n";
    return kExitUsage;
  }
  ExperimentRunner runner(load_mnist(resolve_data_dir(f), f.split_seed, cfg.validation_fraction));
  const auto rec =
      runner.run(cfg, progress(f, method_name + "-" + std::to_string(runner.reported_dim(cfg))));
  emit(f, std::string(kCsvHeader) + "\n" + csv_row(rec) + "\n", history_json(rec));
  return kExitOk;
}

int cmd_table(const CommonFlags& f, std::size_t seeds, std::uint64_t base_seed, bool full) {
  if (seeds < 1) {
    std::cerr << "table: --seeds must be at least 1\n";
    return kExitUsage;
  }
  ExperimentRunner runner(load_mnist(resolve_data_dir(f), f.split_seed, 1.0 / 6.0));
  std::ostringstream csv;
  csv << kCsvHeader << ",mean_accuracy_pct,std_accuracy_pct\n";
  nlohmann::json history = nlohmann::json::array();
  for (const auto& arm : table_arms(full)) {
    std::vector<ExperimentRecord> recs;
    std::vector<double> accs;
    double wall = 0.0;
    for (std::uint64_t s = base_seed; s < base_seed + seeds; ++s) {
      const std::string label = to_string(arm.method) + "-" + std::to_string(arm.dim) + "-s" +
                                std::to_string(s);
      recs.push_back(runner.run(make_config(f, arm.method, arm.dim, s), progress(f, label)));
      accs.push_back(recs.back().test_accuracy_pct);
      wall += recs.back().wall_seconds;
      history.push_back(history_json(recs.back()));
    }
    ExperimentRecord row = recs.front();
    row.wall_seconds = wall;
    const auto summary = summarize(accs);
    csv << csv_row(row) << "," << format_accuracy(summary.mean) << ","
        << (seeds > 1 ? format_accuracy(summary.stddev) : std::string()) << "\n";
  }
  emit(f, csv.str(), history);
  return kExitOk;
}

int cmd_check(std::size_t samples, std::uint64_t seed, const std::string& inject) {
  CheckOptions o;
  o.samples = samples;
  o.seed = seed;
  if (!inject.empty()) {
    if (inject != "non-commuting") {
      std::cerr << "check: unknown --inject value '" << inject << "'\n";
      return kExitUsage;
    }
    o.inject_non_commuting = true;
  }
  const auto report = run_law_checks(o);
  std::cout << report.to_text();
  if (!report.passed()) {
    for (const auto& r : report.results) {
      if (!r.passed) std::cerr << "failing property: " << r.name << "\n";
    }
    return kExitPropertyFailure;
  }
  return kExitOk;
}

struct PublishedFile {
  const char* name;
  std::uintmax_t gz_size;
  std::uintmax_t raw_size;
};

constexpr PublishedFile kMnistFiles[] = {
    {"train-images-idx3-ubyte", 9912422, 47040016},
    {"train-labels-idx1-ubyte", 28881, 60008},
    {"t10k-images-idx3-ubyte", 1648877, 7840016},
    {"t10k-labels-idx1-ubyte", 4542, 10008},
};

std::size_t write_to_stream(char* data, std::size_t size, std::size_t n, void* stream) {
  static_cast<std::ofstream*>(stream)->write(data, static_cast<std::streamsize>(size * n));
  return size * n;
}

bool download(const std::string& url, const fs::path& dest) {
  std::ofstream out(dest, std::ios::binary);
  if (!out) return false;
  CURL* curl = curl_easy_init();
  if (!curl) return false;
  curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, write_to_stream);
  curl_easy_setopt(curl, CURLOPT_WRITEDATA, &out);
  const CURLcode rc = curl_easy_perform(curl);
  curl_easy_cleanup(curl);
  out.close();
  if (rc != CURLE_OK) {
    std::cerr << "fetch: " << url << ": " << curl_easy_strerror(rc) << "\n";
    std::error_code ec;
    fs::remove(dest, ec);
    return false;
  }
  return true;
}

// Downloads whatever is missing, then checks every file against its published size.
int cmd_fetch(const std::string& dir_flag, const std::string& base_url) {
  CommonFlags f;
  f.data_dir = dir_flag;
  const fs::path dir = resolve_data_dir(f);
  if (dir.empty()) {
    std::cerr << "fetch: no --data-dir given and MONOIDAL_DATA_DIR is unset\n";
    return kExitUsage;
  }
  fs::create_directories(dir);
  curl_global_init(CURL_GLOBAL_DEFAULT);
  bool ok = true;
  for (const auto& file : kMnistFiles) {
    const std::string name = file.name;
    const std::string dotted = name.substr(0, name.find("-idx")) + "." + name.substr(name.find("idx"));
    fs::path present;
    for (const auto& candidate : {name, dotted, name + ".gz", dotted + ".gz"}) {
      if (present.empty() && fs::exists(dir / candidate)) present = dir / candidate;
    }
    if (present.empty()) {
      std::cerr << "fetch: downloading " << name << ".gz\n";
      present = dir / (name + ".gz");
      download(base_url + name + ".gz", present);
    }
    const auto expected = present.extension() == ".gz" ? file.gz_size : file.raw_size;
    if (!fs::exists(present) || fs::file_size(present) != expected) {
      std::cerr << "fetch: " << present.string() << " missing or not " << expected << " bytes\n";
      ok = false;
    } else {
      std::cout << present.string() << " OK (" << expected << " bytes)\n";
    }
  }
  curl_global_cleanup();
  return ok ? kExitOk : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monoidal spectral embeddings: MNIST experiments and law checks"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  std::string method;
  std::size_t dim = 32;
  std::uint64_t run_seed = 1;
  auto* run = app.add_subcommand("run", "Train and evaluate one experiment arm");
  run->add_option("--method", method, "monoidal | dft | mlp")->required();
  run->add_option("--dim", dim, "Embedding / feature dimension")->check(CLI::PositiveNumber);
  run->add_option("--seed", run_seed, "Training seed");
  add_common(run, run_flags);

  CommonFlags table_flags;
  std::size_t seeds = 1;
  std::uint64_t table_seed = 1;
  bool full = false;
  auto* table = app.add_subcommand("table", "Run every results-table arm, one CSV row each");
  table->add_option("--seeds", seeds, "Seeds per arm (seed, seed+1, ...)");
  table->add_option("--seed", table_seed, "First training seed");
  table->add_flag("--include-full-monoidal", full, "Add the slow d=784 monoidal arm");
  add_common(table, table_flags);

  std::size_t samples = 200;
  std::uint64_t check_seed = 1;
  std::string inject;
  auto* check = app.add_subcommand("check", "Run the algebraic-law and gradient checks");
  check->add_option("--samples", samples, "Random cases per law")->check(CLI::PositiveNumber);
  check->add_option("--seed", check_seed, "Seed for the random cases");
  check->add_option("--inject", inject, "Add a deliberately broken case: non-commuting");

  std::string fetch_dir;
  std::string base_url = "https://ossci-datasets.s3.amazonaws.com/mnist/";
  auto* fetch = app.add_subcommand("fetch", "Download MNIST and verify published file sizes");
  fetch->add_option("--data-dir", fetch_dir, "Target directory (default: $MONOIDAL_DATA_DIR)");
  fetch->add_option("--url", base_url, "Base URL of the gzip files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run) return cmd_run(run_flags, method, dim, run_seed);
    if (*table) return cmd_table(table_flags, seeds, table_seed, full);
    if (*check) return cmd_check(samples, check_seed, inject);
    if (*fetch) return cmd_fetch(fetch_dir, base_url);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
