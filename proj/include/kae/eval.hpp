#pragma once

// Downstream metrics: reconstruction error, Recall k@N similarity search,
// 1-NN classification accuracy and denoising error. Neighbor searches are
// exact brute force on squared Euclidean distance with ties broken by the
// lower row index.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kae/data.hpp"
#include "kae/error.hpp"
#include "kae/model.hpp"
#include "kae/ndcore.hpp"

namespace kae {

struct NeighborList {
  std::size_t query_index = 0;
  std::vector<std::size_t> neighbor_indices;  // ascending distance, self excluded
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

namespace detail {

// First `count` neighbors of row `query` (self excluded) in (distance, index) order.
inline std::vector<std::size_t> ranked_neighbors(const Matrix& points, std::size_t query, std::size_t count) {
  const std::size_t n = points.rows();
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(n - 1);
  const auto q = points.row(query);
  for (std::size_t i = 0; i < n; ++i)
    if (i != query) cand.emplace_back(squared_distance(q, points.row(i)), i);
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(count), cand.end());
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = cand[i].second;
  return out;
}

}  // namespace detail

inline NeighborList knn_exact(const Matrix& points, std::size_t query_row, std::size_t k) {
  if (query_row >= points.rows()) throw Error(ErrorKind::InvalidArgument, "knn_exact: query row out of range");
  if (k >= points.rows())
    throw Error(ErrorKind::InvalidArgument, "knn_exact: k=" + std::to_string(k) + " must be below n=" +
                                                std::to_string(points.rows()));
  return {query_row, detail::ranked_neighbors(points, query_row, k)};
}

/// Recall k@N for every N in `ns`: for each row as query, the fraction of its
/// k nearest input-space neighbors found among its N nearest latent-space
/// neighbors, averaged over queries in ascending index order.
inline std::vector<double> recall_curve(const Matrix& input_space, const Matrix& latent_space, std::size_t k,
                                        const std::vector<std::size_t>& ns) {
  const std::size_t n = input_space.rows();
  if (latent_space.rows() != n)
    throw Error(ErrorKind::Shape, "recall: input has " + std::to_string(n) + " rows, latent has " +
                                      std::to_string(latent_space.rows()));
  if (ns.empty()) return {};
  const std::size_t max_n = *std::max_element(ns.begin(), ns.end());
  for (auto N : ns) {
    if (N >= n)
      throw Error(ErrorKind::InvalidArgument, "recall: N=" + std::to_string(N) + " must be below n=" +
                                                  std::to_string(n));
    if (k > N || k == 0)
      throw Error(ErrorKind::InvalidArgument, "recall: need 1 <= k <= N (k=" + std::to_string(k) + ", N=" +
                                                  std::to_string(N) + ")");
  }
  std::vector<double> totals(ns.size(), 0.0);
  std::vector<std::size_t> rank_in_latent(n);
  for (std::size_t q = 0; q < n; ++q) {
    const auto truth = detail::ranked_neighbors(input_space, q, k);
    const auto retrieved = detail::ranked_neighbors(latent_space, q, max_n);
    // position of each retrieved row, to answer "within top-N" for every N
    std::fill(rank_in_latent.begin(), rank_in_latent.end(), n);
    for (std::size_t r = 0; r < retrieved.size(); ++r) rank_in_latent[retrieved[r]] = r;
    for (std::size_t t = 0; t < ns.size(); ++t) {
      std::size_t hits = 0;
      for (auto g : truth) hits += rank_in_latent[g] < ns[t] ? 1 : 0;
      totals[t] += static_cast<double>(hits) / static_cast<double>(k);
    }
  }
  for (auto& v : totals) v /= static_cast<double>(n);
  return totals;
}

inline double recall_at_n(const Matrix& input_space, const Matrix& latent_space, std::size_t k, std::size_t N) {
  return recall_curve(input_space, latent_space, k, {N}).front();
}

/// Index of the nearest training row for each test row (ties: lowest index).
inline std::vector<std::size_t> nearest_train_rows(const Matrix& train, const Matrix& test) {
  if (train.rows() == 0) throw Error(ErrorKind::InvalidArgument, "1-NN: empty training set");
  if (train.cols() != test.cols())
    throw Error(ErrorKind::Shape, "1-NN: train " + train.shape() + " vs test " + test.shape());
  std::vector<std::size_t> out(test.rows());
  const std::size_t d = train.cols();
  const double* tr = train.data().data();
  for (std::size_t q = 0; q < test.rows(); ++q) {
    const double* x = test.row(q).data();
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t i = 0; i < train.rows(); ++i) {
      const double* y = tr + i * d;
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = x[c] - y[c];
        s += diff * diff;
      }
      if (s < best) {
        best = s;
        arg = i;
      }
    }
    out[q] = arg;
  }
  return out;
}

/// Fraction of test rows whose nearest training row carries the same label.
inline double knn_classify(const Matrix& train_latents, std::span<const int> train_labels,
                           const Matrix& test_latents, std::span<const int> test_labels) {
  if (train_labels.size() != train_latents.rows() || test_labels.size() != test_latents.rows())
    throw Error(ErrorKind::Shape, "1-NN: label count does not match row count");
  if (test_latents.rows() == 0) throw Error(ErrorKind::InvalidArgument, "1-NN: empty test set");
  const auto nn = nearest_train_rows(train_latents, test_latents);
  std::size_t correct = 0;
  for (std::size_t q = 0; q < nn.size(); ++q) correct += train_labels[nn[q]] == test_labels[q] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(nn.size());
}

// ---- model-level metrics ---------------------------------------------------------------

inline constexpr std::size_t kEvalBatch = 1000;

/// Encodes X in chunks of kEvalBatch rows.
inline Matrix encode_all(const Autoencoder& m, const Matrix& X) {
  Matrix Z(X.rows(), m.config.d_latent);
  for (std::size_t b = 0; b < X.rows(); b += kEvalBatch) {
    const auto e = std::min(X.rows(), b + kEvalBatch);
    const Matrix z = encode(m, slice_rows(X, b, e));
    std::copy(z.data().begin(), z.data().end(), Z.data().begin() + static_cast<std::ptrdiff_t>(b * Z.cols()));
  }
  return Z;
}

/// mse(target, reconstruct(input)) accumulated over chunks of kEvalBatch rows.
inline double reconstruction_mse(const Autoencoder& m, const Matrix& input, const Matrix& target) {
  if (input.cols() != m.config.d_input)
    throw Error(ErrorKind::Shape, "reconstruction: data dimension " + std::to_string(input.cols()) +
                                      " but model d_input=" + std::to_string(m.config.d_input));
  if (!input.same_shape(target)) throw Error(ErrorKind::Shape, "reconstruction: input/target shapes differ");
  if (input.rows() == 0) throw Error(ErrorKind::InvalidArgument, "reconstruction: empty data");
  double sse = 0.0;
  for (std::size_t b = 0; b < input.rows(); b += kEvalBatch) {
    const auto e = std::min(input.rows(), b + kEvalBatch);
    const Matrix r = reconstruct(m, slice_rows(input, b, e));
    const double* t = target.data().data() + b * target.cols();
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double d = r[i] - t[i];
      sse += d * d;
    }
  }
  return sse / static_cast<double>(input.size());
}

inline double reconstruction_error(const Autoencoder& m, const Dataset& test) {
  return reconstruction_mse(m, test.X, test.X);
}

enum class NoiseKind { Gaussian, SaltPepper };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Gaussian;
  double strength = 0.1;  // sigma for gaussian, probability for salt-and-pepper
  bool clip = false;      // clip corrupted inputs to [0, 1]
};

inline NoiseSpec parse_noise(std::string_view kind, double strength) {
  if (kind == "gaussian") return {NoiseKind::Gaussian, strength};
  if (kind == "salt-pepper" || kind == "saltpepper" || kind == "salt_pepper") return {NoiseKind::SaltPepper, strength};
  throw Error(ErrorKind::InvalidArgument, "unknown noise kind '" + std::string(kind) + "'");
}

inline Matrix corrupt(const Matrix& X, const NoiseSpec& noise, RngStream& stream) {
  Matrix noisy = noise.kind == NoiseKind::Gaussian ? add_gaussian_noise(X, noise.strength, stream)
                                                   : add_salt_pepper(X, noise.strength, stream);
  return noise.clip ? clip_unit(noisy) : noisy;
}

/// mse(clean, reconstruct(corrupt(clean))).
inline double denoising_error(const Autoencoder& m, const Dataset& clean, const NoiseSpec& noise, RngStream& stream) {
  const Matrix noisy = corrupt(clean.X, noise, stream);
  return reconstruction_mse(m, noisy, clean.X);
}

}  // namespace kae
