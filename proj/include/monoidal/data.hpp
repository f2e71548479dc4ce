#pragma once

// MNIST ingestion. IDX containers are big-endian:
//   images: 0x00000803, count, rows, cols, then count*rows*cols unsigned bytes
//   labels: 0x00000801, count, then count unsigned bytes
// Either file may be gzip-compressed; the 0x1F8B prefix is detected.

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "monoidal/error.hpp"
#include "monoidal/image.hpp"
#include "monoidal/rng.hpp"

namespace monoidal {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::size_t kNumClasses = 10;

/// Images (one per row of `pixels`) with their class labels.
struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  PixelMatrix pixels;
  std::vector<std::uint8_t> labels;
  bool normalized = false;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t pixel_count() const noexcept { return rows * cols; }

  Image image(std::size_t n) const {
    const auto row = pixels.row(static_cast<Eigen::Index>(n));
    return Image(rows, cols, std::vector<double>(row.data(), row.data() + row.size()));
  }
};

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

inline std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& data,
                                        const std::string& name) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw IoError("zlib init failed for " + name);
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk{};
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IoError("corrupt or truncated gzip stream: " + name);
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
  }
  inflateEnd(&zs);
  return out;
}

inline std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B) {
    return gunzip(bytes, path.string());
  }
  return bytes;
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t offset) {
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

inline void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 24));
  b.push_back(static_cast<std::uint8_t>(v >> 16));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace detail

/// Parses an image/label IDX pair. Pixels keep their raw byte values (0..255);
/// call normalize() exactly once before training.
inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  const auto img = detail::read_maybe_gzip(images_path);
  const auto lab = detail::read_maybe_gzip(labels_path);

  if (img.size() < 4) throw IoError("truncated image header: " + images_path.string());
  if (detail::read_be32(img, 0) != kIdxImageMagic) {
    throw FormatError("bad image magic in " + images_path.string());
  }
  if (lab.size() < 4) throw IoError("truncated label header: " + labels_path.string());
  if (detail::read_be32(lab, 0) != kIdxLabelMagic) {
    throw FormatError("bad label magic in " + labels_path.string());
  }
  if (img.size() < 16) throw IoError("truncated image header: " + images_path.string());
  if (lab.size() < 8) throw IoError("truncated label header: " + labels_path.string());

  const std::size_t count = detail::read_be32(img, 4);
  const std::size_t rows = detail::read_be32(img, 8);
  const std::size_t cols = detail::read_be32(img, 12);
  const std::size_t label_count = detail::read_be32(lab, 4);
  if (rows == 0 || cols == 0) throw FormatError("zero image dimension in " + images_path.string());
  if (img.size() < 16 + count * rows * cols) {
    throw IoError("truncated image data: " + images_path.string());
  }
  if (lab.size() < 8 + label_count) throw IoError("truncated label data: " + labels_path.string());
  if (count != label_count) {
    throw ConsistencyError("image count " + std::to_string(count) + " != label count " +
                           std::to_string(label_count));
  }

  Dataset ds;
  ds.rows = rows;
  ds.cols = cols;
  const auto n = static_cast<Eigen::Index>(count);
  const auto p = static_cast<Eigen::Index>(rows * cols);
  ds.pixels.resize(n, p);
  const std::uint8_t* src = img.data() + 16;
  double* dst = ds.pixels.data();
  for (std::size_t k = 0; k < count * rows * cols; ++k) dst[k] = static_cast<double>(src[k]);
  ds.labels.assign(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(count));
  for (auto l : ds.labels) {
    if (l >= kNumClasses) throw FormatError("label out of range in " + labels_path.string());
  }
  return ds;
}

/// Writes an IDX image file (raw, not compressed).
inline void write_idx_images(const std::filesystem::path& path, std::size_t count,
                             std::size_t rows, std::size_t cols,
                             std::span<const std::uint8_t> pixels) {
  if (pixels.size() != count * rows * cols) {
    throw InvalidArgument("write_idx_images: pixel count does not match header");
  }
  std::vector<std::uint8_t> bytes;
  bytes.reserve(16 + pixels.size());
  detail::put_be32(bytes, kIdxImageMagic);
  detail::put_be32(bytes, static_cast<std::uint32_t>(count));
  detail::put_be32(bytes, static_cast<std::uint32_t>(rows));
  detail::put_be32(bytes, static_cast<std::uint32_t>(cols));
  bytes.insert(bytes.end(), pixels.begin(), pixels.end());
  detail::write_file(path, bytes);
}

inline void write_idx_labels(const std::filesystem::path& path,
                             std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> bytes;
  detail::put_be32(bytes, kIdxLabelMagic);
  detail::put_be32(bytes, static_cast<std::uint32_t>(labels.size()));
  bytes.insert(bytes.end(), labels.begin(), labels.end());
  detail::write_file(path, bytes);
}

/// Divides every pixel by 255.
inline Dataset normalize(Dataset ds) {
  ds.pixels /= 255.0;
  ds.normalized = true;
  return ds;
}

/// Rows `indices` of `ds`, in that order.
inline Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out;
  out.rows = ds.rows;
  out.cols = ds.cols;
  out.normalized = ds.normalized;
  out.pixels.resize(static_cast<Eigen::Index>(indices.size()), ds.pixels.cols());
  out.labels.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    out.pixels.row(static_cast<Eigen::Index>(k)) =
        ds.pixels.row(static_cast<Eigen::Index>(indices[k]));
    out.labels.push_back(ds.labels[indices[k]]);
  }
  return out;
}

struct SplitSpec {
  std::uint64_t seed = 0;
  double validation_fraction = 1.0 / 6.0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded shuffle of 0..n-1; the first n - round(f n) indices go to train.
inline SplitSpec split_indices(std::size_t n, std::uint64_t seed, double validation_fraction) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw InvalidArgument("split: validation fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  const auto n_val =
      static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  SplitSpec spec;
  spec.seed = seed;
  spec.validation_fraction = validation_fraction;
  spec.train.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_val));
  spec.validation.assign(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
  return spec;
}

inline std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  return {subset(ds, spec.train), subset(ds, spec.validation)};
}

/// One epoch of minibatches: a seeded permutation cut into runs of
/// `batch_size`, the last one possibly short.
inline std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                                     std::uint64_t epoch_seed) {
  if (batch_size == 0) throw InvalidArgument("batches: batch size must be at least 1");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(epoch_seed);
  rng.shuffle(std::span<std::size_t>(idx));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                     idx.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return out;
}

struct MnistFiles {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};

/// Locates the four MNIST files in `dir`. Accepts both the canonical
/// "train-images-idx3-ubyte" names and the "train-images.idx3-ubyte"
/// variant, each optionally with a ".gz" suffix.
inline MnistFiles find_mnist_files(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (dir.empty() || !fs::is_directory(dir)) {
    throw IoError("MNIST directory not found: " + (dir.empty() ? "<unset>" : dir.string()));
  }
  auto locate = [&](const std::string& stem, const std::string& kind) -> fs::path {
    for (const char* sep : {"-", "."}) {
      for (const char* ext : {"", ".gz"}) {
        const fs::path p = dir / (stem + sep + kind + "-ubyte" + ext);
        if (fs::is_regular_file(p)) return p;
      }
    }
    throw IoError("missing MNIST file " + stem + "-" + kind + "-ubyte in " + dir.string());
  };
  return {locate("train-images", "idx3"), locate("train-labels", "idx1"),
          locate("t10k-images", "idx3"), locate("t10k-labels", "idx1")};
}

/// Train/validation/test partitions, normalized.
struct SplitData {
  Dataset train;
  Dataset validation;
  Dataset test;
};

inline SplitData load_mnist(const std::filesystem::path& dir, std::uint64_t split_seed,
                            double validation_fraction) {
  const MnistFiles files = find_mnist_files(dir);
  Dataset full = normalize(load_idx(files.train_images, files.train_labels));
  Dataset test = normalize(load_idx(files.test_images, files.test_labels));
  const SplitSpec spec = split_indices(full.size(), split_seed, validation_fraction);
  auto [train, validation] = split(full, spec);
  return {std::move(train), std::move(validation), std::move(test)};
}

}  // namespace monoidal
