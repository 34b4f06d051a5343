#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "kae/kae.hpp"

namespace kae::test {

// Independent of kae::RngStream so oracles do not share code with the library.
inline Matrix random_matrix(std::mt19937& g, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix m(r, c);
  for (auto& v : m.data()) v = d(g);
  return m;
}

// Naive triple loop.
inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

struct GradCheck {
  double max_abs_err = 0.0;
  std::size_t failures = 0;
  std::size_t checked = 0;
};

// Central differences of f with respect to every entry of x, compared with
// `analytic` under |num - ana| <= atol + rtol * max(|num|, |ana|).
inline GradCheck finite_difference_check(Matrix& x, const Matrix& analytic, const std::function<double()>& f,
                                         double h = 1e-6, double rtol = 1e-4, double atol = 1e-7) {
  GradCheck out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f();
    x[i] = orig - h;
    const double fm = f();
    x[i] = orig;
    const double num = (fp - fm) / (2.0 * h);
    const double err = std::abs(num - analytic[i]);
    out.max_abs_err = std::max(out.max_abs_err, err);
    if (err > atol + rtol * std::max(std::abs(num), std::abs(analytic[i]))) ++out.failures;
    ++out.checked;
  }
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("kae_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void push_be32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>((v >> s) & 0xff));
}

inline std::vector<unsigned char> idx_images(const std::vector<std::vector<unsigned char>>& imgs, std::uint32_t rows,
                                             std::uint32_t cols) {
  std::vector<unsigned char> b;
  push_be32(b, 0x803);
  push_be32(b, static_cast<std::uint32_t>(imgs.size()));
  push_be32(b, rows);
  push_be32(b, cols);
  for (const auto& im : imgs) b.insert(b.end(), im.begin(), im.end());
  return b;
}

inline std::vector<unsigned char> idx_labels(const std::vector<unsigned char>& labels) {
  std::vector<unsigned char> b;
  push_be32(b, 0x801);
  push_be32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

// Writes an MNIST-layout directory <root>/<name>/ with images whose class is
// encoded by a bright block, so trained models have structure to find.
inline void write_synthetic_idx(const std::filesystem::path& root, const std::string& name, std::size_t n_train,
                                std::size_t n_test, std::uint32_t side = 8, unsigned seed = 7) {
  std::mt19937 g(seed);
  auto make = [&](std::size_t n, const std::string& prefix) {
    std::vector<std::vector<unsigned char>> imgs;
    std::vector<unsigned char> labels;
    std::uniform_int_distribution<int> noise(0, 40);
    for (std::size_t i = 0; i < n; ++i) {
      const int label = static_cast<int>(i % 10);
      std::vector<unsigned char> im(side * side);
      for (auto& px : im) px = static_cast<unsigned char>(noise(g));
      const std::uint32_t r0 = static_cast<std::uint32_t>(label / 5) * (side / 2);
      const std::uint32_t c0 = static_cast<std::uint32_t>(label % 5) * (side / 5 > 0 ? side / 5 : 1);
      for (std::uint32_t r = r0; r < std::min(side, r0 + side / 2); ++r)
        for (std::uint32_t c = c0; c < std::min(side, c0 + 2); ++c) im[r * side + c] = 230;
      imgs.push_back(std::move(im));
      labels.push_back(static_cast<unsigned char>(label));
    }
    const auto dir = root / name;
    std::filesystem::create_directories(dir);
    write_bytes(dir / (prefix + "-images-idx3-ubyte"), idx_images(imgs, side, side));
    write_bytes(dir / (prefix + "-labels-idx1-ubyte"), idx_labels(labels));
  };
  make(n_train, "train");
  make(n_test, "t10k");
}

// CIFAR-10 batch bytes: label byte then 3072 pixel bytes per record.
inline std::vector<unsigned char> cifar10_records(std::size_t n, unsigned seed) {
  std::mt19937 g(seed);
  std::uniform_int_distribution<int> px(0, 255);
  std::vector<unsigned char> b;
  for (std::size_t i = 0; i < n; ++i) {
    b.push_back(static_cast<unsigned char>(i % 10));
    for (std::size_t k = 0; k < kCifarPixels; ++k) b.push_back(static_cast<unsigned char>(px(g)));
  }
  return b;
}

inline void write_synthetic_cifar10(const std::filesystem::path& root, std::size_t per_batch, std::size_t n_test) {
  const auto dir = root / "cifar-10-batches-bin";
  std::filesystem::create_directories(dir);
  for (int i = 1; i <= 5; ++i)
    write_bytes(dir / ("data_batch_" + std::to_string(i) + ".bin"), cifar10_records(per_batch, 100 + i));
  write_bytes(dir / "test_batch.bin", cifar10_records(n_test, 200));
}

}  // namespace kae::test
