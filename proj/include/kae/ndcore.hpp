#pragma once

// Dense row-major matrices of doubles and seeded random streams. Every other
// module is written against these primitives. A row is one sample throughout,
// so a batched affine map is X * W^T.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kae/error.hpp"

namespace kae {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw Error(ErrorKind::Shape, "data length " + std::to_string(data_.size()) +
                                        " does not match " + shape_string(rows, cols));
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw Error(ErrorKind::Shape, "ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix row_vector(std::span<const double> v) {
    return Matrix(1, v.size(), std::vector<double>(v.begin(), v.end()));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape() const { return shape_string(rows_, cols_); }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

  static std::string shape_string(std::size_t r, std::size_t c) {
    return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMajor> view(const Matrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}
inline Eigen::Map<RowMajor> view(Matrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

inline void require_same_shape(const Matrix& a, const Matrix& b, std::string_view op) {
  if (!a.same_shape(b))
    throw Error(ErrorKind::Shape, std::string(op) + ": " + a.shape() + " vs " + b.shape());
}

}  // namespace detail

// ---- products ------------------------------------------------------------

/// a * b. Rejects a.cols != b.rows with both shapes in the message.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw Error(ErrorKind::Shape, "matmul: " + a.shape() + " * " + b.shape());
  Matrix out(a.rows(), b.cols());
  if (a.cols() == 0) return out;
  detail::view(out).noalias() = detail::view(a) * detail::view(b);
  return out;
}

/// a * b^T, the batched "X W^T" product.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw Error(ErrorKind::Shape, "matmul_nt: " + a.shape() + " * " + b.shape() + "^T");
  Matrix out(a.rows(), b.rows());
  if (a.cols() == 0) return out;
  detail::view(out).noalias() = detail::view(a) * detail::view(b).transpose();
  return out;
}

/// a^T * b, used for weight gradients dH^T X.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw Error(ErrorKind::Shape, "matmul_tn: " + a.shape() + "^T * " + b.shape());
  Matrix out(a.cols(), b.cols());
  if (a.rows() == 0) return out;
  detail::view(out).noalias() = detail::view(a).transpose() * detail::view(b);
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  return out;
}

// ---- elementwise -----------------------------------------------------------

/// Entrywise power; exponent 0 gives all ones (including 0^0).
inline Matrix elementwise_pow(const Matrix& a, unsigned exponent) {
  Matrix out(a.rows(), a.cols(), 1.0);
  if (exponent == 0) return out;
  auto& o = out.data();
  const auto& x = a.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    double acc = x[i];
    for (unsigned e = 1; e < exponent; ++e) acc *= x[i];
    o[i] = acc;
  }
  return out;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "add");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline Matrix subtract(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "subtract");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "hadamard");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

inline Matrix scale(const Matrix& a, double s) {
  Matrix out = a;
  for (auto& v : out.data()) v *= s;
  return out;
}

/// In-place a += s * b.
inline void axpy(Matrix& a, double s, const Matrix& b) {
  detail::require_same_shape(a, b, "axpy");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

/// Adds v to every row of a.
inline Matrix add_row_broadcast(const Matrix& a, std::span<const double> v) {
  if (v.size() != a.cols())
    throw Error(ErrorKind::Shape, "add_row_broadcast: vector of length " + std::to_string(v.size()) +
                                      " against " + a.shape());
  Matrix out = a;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += v[c];
  }
  return out;
}

/// Column sums as a 1 x cols matrix (bias gradients).
inline Matrix col_sums(const Matrix& a) {
  Matrix out(1, a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c];
  }
  return out;
}

/// Row sums as a 1 x rows matrix.
inline Matrix row_sums(const Matrix& a) {
  Matrix out(1, a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (double v : a.row(r)) s += v;
    out[r] = s;
  }
  return out;
}

inline double sum_all(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

inline double mean_all(const Matrix& a) {
  if (a.empty()) throw Error(ErrorKind::InvalidArgument, "mean_all: empty matrix");
  return sum_all(a) / static_cast<double>(a.size());
}

inline bool all_finite(const Matrix& a) {
  for (double v : a.data())
    if (!std::isfinite(v)) return false;
  return true;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Rows of a selected by index, in the given order.
inline Matrix gather_rows(const Matrix& a, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= a.rows()) throw Error(ErrorKind::InvalidArgument, "gather_rows: index out of range");
    auto src = a.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

/// Rows [begin, end) as a new matrix.
inline Matrix slice_rows(const Matrix& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.rows()) throw Error(ErrorKind::InvalidArgument, "slice_rows: bad range");
  std::vector<double> d(a.data().begin() + static_cast<std::ptrdiff_t>(begin * a.cols()),
                        a.data().begin() + static_cast<std::ptrdiff_t>(end * a.cols()));
  return Matrix(end - begin, a.cols(), std::move(d));
}

// ---- random streams ----------------------------------------------------------

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Single-owner deterministic random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard; conversions to doubles and bounded integers are done here rather
/// than through <random> distributions so that results are identical across
/// standard library implementations.
///
/// Streams for distinct concerns (init, shuffle, noise, subsample) are derived
/// from a master seed with derive(), which hashes the label with FNV-1a, xors it
/// into the seed and scrambles with splitmix64.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : engine_(seed) {}

  static RngStream derive(std::uint64_t master_seed, std::string_view label) {
    return RngStream(detail::splitmix64(master_seed ^ detail::fnv1a64(label)));
  }

  std::uint64_t next_u64() {
    ++draws_;
    return engine_();
  }

  /// Uniform on [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound) by rejection; bound must be positive.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) throw Error(ErrorKind::InvalidArgument, "next_below: bound must be positive");
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
  }

  /// Box-Muller, cosine branch only: two uniforms per normal.
  double next_normal() {
    const double u1 = 1.0 - next_unit();  // (0, 1]
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t draws_made() const noexcept { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

inline Matrix rng_uniform(RngStream& stream, double lo, double hi, std::size_t rows, std::size_t cols) {
  if (!(lo < hi)) throw Error(ErrorKind::InvalidArgument, "rng_uniform: lo must be < hi");
  Matrix out(rows, cols);
  const double width = hi - lo;
  for (auto& v : out.data()) v = lo + width * stream.next_unit();
  return out;
}

inline Matrix rng_normal(RngStream& stream, double mu, double sigma, std::size_t rows, std::size_t cols) {
  if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "rng_normal: sigma must be >= 0");
  Matrix out(rows, cols);
  for (auto& v : out.data()) v = mu + sigma * stream.next_normal();
  return out;
}

/// Uniformly random permutation of 0..n-1 (Fisher-Yates).
inline std::vector<std::size_t> permutation(RngStream& stream, std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(stream.next_below(i));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

}  // namespace kae
