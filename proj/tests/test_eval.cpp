// Metric tests: each metric against an exhaustive brute-force oracle written
// independently here (full sort of all pairwise distances, explicit loops).

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "support.hpp"

using kae::Matrix;

namespace {

// Full stable sort of every other row by (distance, index).
std::vector<std::size_t> oracle_neighbors(const Matrix& P, std::size_t q) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < P.rows(); ++i)
    if (i != q) idx.push_back(i);
  auto dist = [&](std::size_t i) {
    double s = 0;
    for (std::size_t c = 0; c < P.cols(); ++c) s += (P(i, c) - P(q, c)) * (P(i, c) - P(q, c));
    return s;
  };
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return dist(a) < dist(b); });
  return idx;
}

double oracle_recall(const Matrix& in, const Matrix& lat, std::size_t k, std::size_t N) {
  double total = 0;
  for (std::size_t q = 0; q < in.rows(); ++q) {
    const auto gt = oracle_neighbors(in, q);
    const auto ret = oracle_neighbors(lat, q);
    std::set<std::size_t> top(ret.begin(), ret.begin() + static_cast<long>(N));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += top.count(gt[i]);
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return total / static_cast<double>(in.rows());
}

double oracle_1nn(const Matrix& tr, const std::vector<int>& tl, const Matrix& te, const std::vector<int>& el) {
  std::size_t ok = 0;
  for (std::size_t q = 0; q < te.rows(); ++q) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < tr.rows(); ++i) {
      double s = 0;
      for (std::size_t c = 0; c < tr.cols(); ++c) s += (tr(i, c) - te(q, c)) * (tr(i, c) - te(q, c));
      d.emplace_back(s, i);
    }
    std::sort(d.begin(), d.end());
    ok += tl[d.front().second] == el[q] ? 1 : 0;
  }
  return static_cast<double>(ok) / static_cast<double>(te.rows());
}

// Rounded coordinates so that exact distance ties actually occur.
Matrix tie_prone(std::mt19937& g, std::size_t n, std::size_t d) {
  std::uniform_int_distribution<int> U(-3, 3);
  Matrix m(n, d);
  for (auto& v : m.data()) v = U(g);
  return m;
}

kae::Autoencoder tiny_model(std::size_t d, std::size_t latent, std::uint64_t seed) {
  kae::AutoencoderConfig c;
  c.d_input = d;
  c.d_latent = latent;
  c.master_seed = seed;
  return kae::build(c);
}

}  // namespace

TEST(KnnExact, CollinearExample) {
  const Matrix P{{0}, {1}, {10}};
  EXPECT_EQ(kae::knn_exact(P, 1, 1).neighbor_indices, (std::vector<std::size_t>{0}));
}

TEST(KnnExact, DuplicatePointsLowerIndexWins) {
  const Matrix P{{5}, {2}, {2}, {2}};
  EXPECT_EQ(kae::knn_exact(P, 0, 2).neighbor_indices, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(kae::knn_exact(P, 2, 2).neighbor_indices, (std::vector<std::size_t>{1, 3}));
}

TEST(KnnExact, KMustBeBelowN) { EXPECT_THROW(kae::knn_exact(Matrix(3, 1), 0, 3), kae::Error); }

TEST(KnnExact, AgreesWithFullSortOracle) {
  std::mt19937 g(1);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 64)(g);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 5)(g);
    const auto P = inst % 2 ? tie_prone(g, n, d) : kae::test::random_matrix(g, n, d);
    const std::size_t q = std::uniform_int_distribution<std::size_t>(0, n - 1)(g);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, n - 1)(g);
    const auto got = kae::knn_exact(P, q, k);
    auto want = oracle_neighbors(P, q);
    want.resize(k);
    ASSERT_EQ(got.neighbor_indices, want) << "instance " << inst;
    EXPECT_EQ(got.query_index, q);
    EXPECT_EQ(std::count(got.neighbor_indices.begin(), got.neighbor_indices.end(), q), 0);
  }
}

TEST(Recall, AgreesWithOracle) {
  std::mt19937 g(2);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(4, 64)(g);
    const auto in = inst % 2 ? tie_prone(g, n, 4) : kae::test::random_matrix(g, n, 4);
    const auto lat = inst % 3 ? tie_prone(g, n, 2) : kae::test::random_matrix(g, n, 2);
    const std::size_t N = std::uniform_int_distribution<std::size_t>(1, n - 1)(g);
    const std::size_t k = std::uniform_int_distribution<std::size_t>(1, N)(g);
    ASSERT_NEAR(kae::recall_at_n(in, lat, k, N), oracle_recall(in, lat, k, N), 1e-12) << "instance " << inst;
  }
}

TEST(Recall, IdenticalSpacesGiveOne) {
  std::mt19937 g(3);
  const auto P = kae::test::random_matrix(g, 30, 5);
  for (std::size_t N : {10, 15, 29}) EXPECT_DOUBLE_EQ(kae::recall_at_n(P, P, 10, N), 1.0);
}

TEST(Recall, EverythingRetrievedGivesOne) {
  std::mt19937 g(4);
  const auto a = kae::test::random_matrix(g, 25, 5), b = kae::test::random_matrix(g, 25, 2);
  EXPECT_DOUBLE_EQ(kae::recall_at_n(a, b, 10, 24), 1.0);
}

TEST(Recall, InvariantUnderRotation) {
  std::mt19937 g(5);
  const auto P = kae::test::random_matrix(g, 40, 2);
  const double th = 0.7;
  const Matrix R{{std::cos(th), -std::sin(th)}, {std::sin(th), std::cos(th)}};
  EXPECT_DOUBLE_EQ(kae::recall_at_n(P, kae::matmul(P, R), 5, 5), 1.0);
}

TEST(Recall, NonDecreasingInNAndBounded) {
  std::mt19937 g(6);
  for (int inst = 0; inst < 20; ++inst) {
    const auto a = kae::test::random_matrix(g, 60, 6), b = kae::test::random_matrix(g, 60, 2);
    std::vector<std::size_t> ns;
    for (std::size_t N = 10; N <= 59; ++N) ns.push_back(N);
    const auto curve = kae::recall_curve(a, b, 10, ns);
    for (std::size_t i = 0; i < curve.size(); ++i) {
      EXPECT_GE(curve[i], 0.0);
      EXPECT_LE(curve[i], 1.0);
      if (i) {
        EXPECT_GE(curve[i], curve[i - 1]);
      }
    }
  }
}

TEST(Recall, RejectsBadArguments) {
  const Matrix P(10, 2);
  EXPECT_THROW(kae::recall_at_n(P, P, 3, 10), kae::Error);
  EXPECT_THROW(kae::recall_at_n(P, P, 5, 4), kae::Error);
  EXPECT_THROW(kae::recall_at_n(P, Matrix(9, 2), 3, 5), kae::Error);
}

TEST(Classify, TestSubsetOfTrainGivesOne) {
  std::mt19937 g(7);
  const auto tr = kae::test::random_matrix(g, 30, 3);
  std::vector<int> tl(30);
  for (std::size_t i = 0; i < 30; ++i) tl[i] = static_cast<int>(i % 4);
  const std::vector<std::size_t> pick{3, 17, 29, 0};
  const auto te = kae::gather_rows(tr, pick);
  std::vector<int> el;
  for (auto i : pick) el.push_back(tl[i]);
  EXPECT_DOUBLE_EQ(kae::knn_classify(tr, tl, te, el), 1.0);
}

TEST(Classify, HalfPlaneSyntheticMatchesOracle) {
  std::mt19937 g(8);
  const auto P = kae::test::random_matrix(g, 20, 2);
  std::vector<int> labels(20);
  for (std::size_t i = 0; i < 20; ++i) labels[i] = P(i, 0) + 0.3 * P(i, 1) > 0 ? 1 : 0;
  const auto tr = kae::slice_rows(P, 0, 12), te = kae::slice_rows(P, 12, 20);
  const std::vector<int> tl(labels.begin(), labels.begin() + 12), el(labels.begin() + 12, labels.end());
  EXPECT_DOUBLE_EQ(kae::knn_classify(tr, tl, te, el), oracle_1nn(tr, tl, te, el));
}

TEST(Classify, AgreesWithOracle) {
  std::mt19937 g(9);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n_tr = std::uniform_int_distribution<std::size_t>(1, 64)(g);
    const std::size_t n_te = std::uniform_int_distribution<std::size_t>(1, 32)(g);
    const auto tr = inst % 2 ? tie_prone(g, n_tr, 3) : kae::test::random_matrix(g, n_tr, 3);
    const auto te = inst % 2 ? tie_prone(g, n_te, 3) : kae::test::random_matrix(g, n_te, 3);
    std::uniform_int_distribution<int> L(0, 4);
    std::vector<int> tl(n_tr), el(n_te);
    for (auto& l : tl) l = L(g);
    for (auto& l : el) l = L(g);
    ASSERT_DOUBLE_EQ(kae::knn_classify(tr, tl, te, el), oracle_1nn(tr, tl, te, el)) << "instance " << inst;
  }
}

TEST(Classify, EmptyTrainRejected) {
  EXPECT_THROW(kae::knn_classify(Matrix(0, 2), {}, Matrix(1, 2), std::vector<int>{0}), kae::Error);
}

TEST(Reconstruction, TwoPassOracleAcrossChunks) {
  std::mt19937 g(10);
  const auto m = tiny_model(9, 3, 11);
  kae::Dataset ds;
  ds.X = kae::test::random_matrix(g, 2345, 9, 0, 1);  // crosses the 1000-row evaluation chunk
  ds.labels.assign(2345, 0);
  const auto R = kae::reconstruct(m, ds.X);
  double sum = 0.0;
  for (std::size_t i = 0; i < R.size(); ++i) sum += (R[i] - ds.X[i]) * (R[i] - ds.X[i]);
  EXPECT_NEAR(kae::reconstruction_error(m, ds), sum / static_cast<double>(R.size()), 1e-12);
  EXPECT_NEAR(kae::reconstruction_error(m, ds), kae::mse(R, ds.X), 1e-12);
}

TEST(Reconstruction, WeightedMeanOfBatchMses) {
  std::mt19937 g(11);
  const auto m = tiny_model(9, 3, 12);
  kae::Dataset ds;
  ds.X = kae::test::random_matrix(g, 100, 9, 0, 1);
  ds.labels.assign(100, 0);
  double weighted = 0.0;
  for (std::size_t b = 0; b < 100; b += 32) {
    const auto e = std::min<std::size_t>(100, b + 32);
    const auto Xb = kae::slice_rows(ds.X, b, e);
    weighted += kae::mse(kae::reconstruct(m, Xb), Xb) * static_cast<double>(e - b);
  }
  EXPECT_NEAR(kae::reconstruction_error(m, ds), weighted / 100.0, 1e-12);
}

TEST(Reconstruction, ZeroInitSigmoidModelOnHalfInputsIsZero) {
  kae::AutoencoderConfig c;
  c.d_input = 8;
  c.d_latent = 2;
  c.output_sigmoid = true;
  auto m = kae::build(c);
  for (auto* t : kae::model_parameters(m)) t->fill(0.0);
  kae::Dataset ds;
  ds.X = Matrix(5, 8, 0.5);
  EXPECT_EQ(kae::reconstruction_error(m, ds), 0.0);
}

TEST(Reconstruction, DimensionMismatchRejected) {
  const auto m = tiny_model(9, 3, 1);
  kae::Dataset ds;
  ds.X = Matrix(4, 8);
  EXPECT_THROW(kae::reconstruction_error(m, ds), kae::Error);
}

TEST(Denoising, ZeroStrengthEqualsReconstruction) {
  std::mt19937 g(12);
  const auto m = tiny_model(9, 3, 2);
  kae::Dataset ds;
  ds.X = kae::test::random_matrix(g, 50, 9, 0, 1);
  kae::RngStream s1(1), s2(1);
  EXPECT_EQ(kae::denoising_error(m, ds, kae::parse_noise("gaussian", 0.0), s1), kae::reconstruction_error(m, ds));
  EXPECT_EQ(kae::denoising_error(m, ds, kae::parse_noise("salt-pepper", 0.0), s2), kae::reconstruction_error(m, ds));
}

TEST(Denoising, ContinuousAtZeroAndNonNegative) {
  std::mt19937 g(13);
  const auto m = tiny_model(9, 3, 3);
  kae::Dataset ds;
  ds.X = kae::test::random_matrix(g, 50, 9, 0, 1);
  kae::RngStream s(4);
  const double e = kae::denoising_error(m, ds, kae::parse_noise("gaussian", 1e-6), s);
  EXPECT_NEAR(e, kae::reconstruction_error(m, ds), 1e-6);
  kae::RngStream s2(5);
  EXPECT_GE(kae::denoising_error(m, ds, kae::parse_noise("gaussian", 0.3), s2), 0.0);
}

TEST(Denoising, TargetIsTheCleanImage) {
  std::mt19937 g(14);
  const auto m = tiny_model(9, 3, 4);
  kae::Dataset ds;
  ds.X = kae::test::random_matrix(g, 20, 9, 0, 1);
  kae::RngStream s1(6), s2(6);
  const auto noisy = kae::add_salt_pepper(ds.X, 0.2, s1);
  EXPECT_EQ(kae::denoising_error(m, ds, kae::parse_noise("salt-pepper", 0.2), s2),
            kae::mse(kae::reconstruct(m, noisy), ds.X));
}

TEST(Denoising, UnknownNoiseKindRejected) { EXPECT_THROW(kae::parse_noise("speckle", 0.1), kae::Error); }
