#pragma once

// Benchmark dataset ingestion (IDX for MNIST/FashionMNIST, the binary batch
// format for CIFAR-10/100), shuffled batching, subsampling and the two input
// corruption models used by the denoising evaluation.
//
// Expected layout under the data directory ($KAE_DATA_DIR unless overridden):
//
//   mnist/          train-images-idx3-ubyte  train-labels-idx1-ubyte
//                   t10k-images-idx3-ubyte   t10k-labels-idx1-ubyte
//   fashion-mnist/  same four names as mnist/
//   cifar-10-batches-bin/  data_batch_1.bin .. data_batch_5.bin, test_batch.bin
//   cifar-100-binary/      train.bin, test.bin

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kae/error.hpp"
#include "kae/ndcore.hpp"

namespace kae {

enum class Split { Train, Test };

inline std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

struct Dataset {
  Matrix X;                 // n x d, entries in [0, 1]
  std::vector<int> labels;  // length n
  std::string name;
  Split split = Split::Train;
  int num_classes = 10;

  std::size_t size() const noexcept { return X.rows(); }
  std::size_t dim() const noexcept { return X.cols(); }
};

namespace detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline std::uint32_t be32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Reads an IDX image file and its label file. Pixels are scaled by 1/255 and
/// flattened row-major.
inline Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                        std::string name = "idx", Split split = Split::Train, int num_classes = 10) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);

  if (img.size() < 16) throw Error(ErrorKind::PayloadMismatch, images_path.string() + ": shorter than IDX header");
  if (detail::be32(img.data()) != kIdxImagesMagic)
    throw Error(ErrorKind::BadMagic, images_path.string() + ": expected image magic 0x00000803");
  if (lab.size() < 8) throw Error(ErrorKind::PayloadMismatch, labels_path.string() + ": shorter than IDX header");
  if (detail::be32(lab.data()) != kIdxLabelsMagic)
    throw Error(ErrorKind::BadMagic, labels_path.string() + ": expected label magic 0x00000801");

  const std::size_t n = detail::be32(img.data() + 4);
  const std::size_t rows = detail::be32(img.data() + 8);
  const std::size_t cols = detail::be32(img.data() + 12);
  const std::size_t n_labels = detail::be32(lab.data() + 4);
  const std::size_t d = rows * cols;

  if (img.size() - 16 != n * d)
    throw Error(ErrorKind::PayloadMismatch, images_path.string() + ": header declares " + std::to_string(n) +
                                                " images of " + std::to_string(d) + " bytes, payload has " +
                                                std::to_string(img.size() - 16) + " bytes");
  if (lab.size() - 8 != n_labels)
    throw Error(ErrorKind::PayloadMismatch, labels_path.string() + ": header declares " + std::to_string(n_labels) +
                                                " labels, payload has " + std::to_string(lab.size() - 8));
  if (n != n_labels)
    throw Error(ErrorKind::CountMismatch, std::to_string(n) + " images but " + std::to_string(n_labels) + " labels");

  Dataset ds;
  ds.name = std::move(name);
  ds.split = split;
  ds.num_classes = num_classes;
  ds.X = Matrix(n, d);
  for (std::size_t i = 0; i < n * d; ++i) ds.X[i] = img[16 + i] / 255.0;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = lab[8 + i];
    if (ds.labels[i] >= num_classes)
      throw Error(ErrorKind::PayloadMismatch, labels_path.string() + ": label " + std::to_string(ds.labels[i]) +
                                                  " outside [0, " + std::to_string(num_classes) + ")");
  }
  return ds;
}

enum class CifarVariant { Cifar10, Cifar100 };

inline constexpr std::size_t kCifarPixels = 3072;

inline std::size_t cifar_record_size(CifarVariant v) { return (v == CifarVariant::Cifar10 ? 1 : 2) + kCifarPixels; }

/// Decodes CIFAR binary batch files in order. Pixels stay channel-major
/// (R plane, G plane, B plane) as stored; CIFAR-100 uses the fine label.
inline Dataset load_cifar_files(const std::vector<std::filesystem::path>& files, CifarVariant variant,
                                std::string name, Split split) {
  const std::size_t rec = cifar_record_size(variant);
  const std::size_t label_bytes = rec - kCifarPixels;
  std::vector<std::vector<unsigned char>> blobs;
  std::size_t n = 0;
  for (const auto& f : files) {
    if (!std::filesystem::exists(f)) throw Error(ErrorKind::Io, "missing CIFAR batch file " + f.string());
    auto b = detail::read_file(f);
    if (b.empty() || b.size() % rec != 0)
      throw Error(ErrorKind::BadStride, f.string() + ": size " + std::to_string(b.size()) +
                                            " is not a multiple of the " + std::to_string(rec) + "-byte record");
    n += b.size() / rec;
    blobs.push_back(std::move(b));
  }
  Dataset ds;
  ds.name = std::move(name);
  ds.split = split;
  ds.num_classes = variant == CifarVariant::Cifar10 ? 10 : 100;
  ds.X = Matrix(n, kCifarPixels);
  ds.labels.resize(n);
  std::size_t row = 0;
  for (const auto& b : blobs)
    for (std::size_t off = 0; off < b.size(); off += rec, ++row) {
      ds.labels[row] = b[off + label_bytes - 1];
      if (ds.labels[row] >= ds.num_classes)
        throw Error(ErrorKind::PayloadMismatch, "CIFAR label " + std::to_string(ds.labels[row]) + " out of range");
      auto dst = ds.X.row(row);
      for (std::size_t k = 0; k < kCifarPixels; ++k) dst[k] = b[off + label_bytes + k] / 255.0;
    }
  return ds;
}

inline Dataset load_cifar(const std::filesystem::path& dir, CifarVariant variant, Split split) {
  std::vector<std::filesystem::path> files;
  if (variant == CifarVariant::Cifar10) {
    if (split == Split::Train)
      for (int i = 1; i <= 5; ++i) files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
    else
      files.push_back(dir / "test_batch.bin");
  } else {
    files.push_back(dir / (split == Split::Train ? "train.bin" : "test.bin"));
  }
  return load_cifar_files(files, variant, variant == CifarVariant::Cifar10 ? "cifar10" : "cifar100", split);
}

/// Directory from $KAE_DATA_DIR, or `fallback` when unset.
inline std::filesystem::path data_dir_from_env(const std::filesystem::path& fallback = "data") {
  if (const char* e = std::getenv("KAE_DATA_DIR"); e && *e) return e;
  return fallback;
}

/// Loads a named benchmark split: mnist, fashion-mnist, cifar10, cifar100.
inline Dataset load_named(std::string_view name, Split split, const std::filesystem::path& data_dir) {
  const bool train = split == Split::Train;
  if (name == "mnist" || name == "fashion-mnist") {
    const auto dir = data_dir / std::string(name);
    const std::string prefix = train ? "train" : "t10k";
    return load_idx(dir / (prefix + "-images-idx3-ubyte"), dir / (prefix + "-labels-idx1-ubyte"), std::string(name),
                    split);
  }
  if (name == "cifar10") return load_cifar(data_dir / "cifar-10-batches-bin", CifarVariant::Cifar10, split);
  if (name == "cifar100") return load_cifar(data_dir / "cifar-100-binary", CifarVariant::Cifar100, split);
  throw Error(ErrorKind::Usage, "unknown dataset '" + std::string(name) +
                                    "' (expected mnist, fashion-mnist, cifar10, cifar100)");
}

// ---- batching and sampling ---------------------------------------------------------

/// A seeded permutation of 0..n-1 cut into consecutive batches; the last
/// batch may be short.
inline std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                           RngStream& stream) {
  if (batch_size == 0) throw Error(ErrorKind::InvalidArgument, "batch_size must be >= 1");
  const auto perm = permutation(stream, n);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size)
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(i),
                     perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  return out;
}

inline std::vector<Matrix> batches(const Dataset& ds, std::size_t batch_size, RngStream& stream) {
  std::vector<Matrix> out;
  for (const auto& idx : batch_indices(ds.size(), batch_size, stream)) out.push_back(gather_rows(ds.X, idx));
  return out;
}

/// k rows without replacement (the first k of a seeded permutation).
inline std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t k, RngStream& stream) {
  if (k > n)
    throw Error(ErrorKind::InvalidArgument, "subsample: k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
  auto perm = permutation(stream, n);
  perm.resize(k);
  return perm;
}

inline Dataset subsample(const Dataset& ds, std::size_t k, RngStream& stream) {
  const auto idx = subsample_indices(ds.size(), k, stream);
  Dataset out;
  out.X = gather_rows(ds.X, idx);
  out.labels.reserve(k);
  for (auto i : idx) out.labels.push_back(ds.labels[i]);
  out.name = ds.name;
  out.split = ds.split;
  out.num_classes = ds.num_classes;
  return out;
}

// ---- corruption ---------------------------------------------------------------------

/// X + N(0, sigma^2) entrywise. No clipping.
inline Matrix add_gaussian_noise(const Matrix& X, double sigma, RngStream& stream) {
  if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "gaussian noise sigma must be >= 0");
  return add(X, rng_normal(stream, 0.0, sigma, X.rows(), X.cols()));
}

/// Each entry is independently replaced with probability `prob`; a replaced
/// entry becomes 0 or 1 with equal chance.
inline Matrix add_salt_pepper(const Matrix& X, double prob, RngStream& stream) {
  if (!(prob >= 0.0 && prob <= 1.0)) throw Error(ErrorKind::InvalidArgument, "salt-and-pepper prob must be in [0,1]");
  Matrix out = X;
  for (auto& v : out.data())
    if (stream.next_unit() < prob) v = stream.next_unit() < 0.5 ? 0.0 : 1.0;
  return out;
}

inline Matrix clip_unit(const Matrix& X) {
  Matrix out = X;
  for (auto& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace kae
