#pragma once

// The five layer families used by the autoencoders: affine (plain AE),
// polynomial (KAE), B-spline (KAN), Fourier and Mexican-hat wavelet. Each
// family has forward evaluation, exact reverse-mode backward, deterministic
// initialization and a closed-form parameter count.
//
// Parameters of every family are stored as an ordered list of matrices so
// that the optimizer and the checkpoint writer can treat all families the
// same way. Three-index coefficient arrays (out x in x basis) are stored as
// (out) x (in * basis) matrices with the basis index fastest.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kae/error.hpp"
#include "kae/ndcore.hpp"

namespace kae {

enum class LayerKind { Affine, Polynomial, BSpline, Fourier, Wavelet };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Affine: return "affine";
    case LayerKind::Polynomial: return "polynomial";
    case LayerKind::BSpline: return "bspline";
    case LayerKind::Fourier: return "fourier";
    case LayerKind::Wavelet: return "wavelet";
  }
  return "?";
}

inline std::optional<LayerKind> parse_layer_kind(std::string_view s) {
  if (s == "affine" || s == "ae") return LayerKind::Affine;
  if (s == "polynomial" || s == "kae") return LayerKind::Polynomial;
  if (s == "bspline" || s == "kan") return LayerKind::BSpline;
  if (s == "fourier" || s == "fourierkan") return LayerKind::Fourier;
  if (s == "wavelet" || s == "wavkan") return LayerKind::Wavelet;
  return std::nullopt;
}

/// How polynomial coefficients are initialized.
///  LinearStart: C1 ~ U(+-1/sqrt(d_in)), every other order and the bias zero,
///               so a fresh KAE layer is exactly a sigmoid affine layer.
///  UniformAll:  every C_i ~ U(+-1/(sqrt(d_in) * (p + 1))).
enum class InitScheme { LinearStart, UniformAll };

inline std::string_view to_string(InitScheme s) {
  return s == InitScheme::LinearStart ? "linear-start" : "uniform-all";
}

inline std::optional<InitScheme> parse_init_scheme(std::string_view s) {
  if (s == "linear-start") return InitScheme::LinearStart;
  if (s == "uniform-all") return InitScheme::UniformAll;
  return std::nullopt;
}

/// True for the families whose reference formulation wraps the layer in a
/// fixed sigmoid (affine, polynomial).
inline bool default_sigmoid(LayerKind k) { return k == LayerKind::Affine || k == LayerKind::Polynomial; }

struct LayerSpec {
  LayerKind kind = LayerKind::Affine;
  std::size_t d_in = 1;
  std::size_t d_out = 1;
  unsigned order_p = 3;       // polynomial
  unsigned grid_size = 5;     // bspline, fourier
  unsigned spline_order = 3;  // bspline
  double grid_lo = -1.0;      // bspline
  double grid_hi = 1.0;       // bspline
  bool apply_sigmoid = false;
  InitScheme init = InitScheme::LinearStart;  // polynomial

  static LayerSpec make(LayerKind kind, std::size_t d_in, std::size_t d_out) {
    LayerSpec s;
    s.kind = kind;
    s.d_in = d_in;
    s.d_out = d_out;
    s.apply_sigmoid = default_sigmoid(kind);
    return s;
  }

  /// Throws on hard violations; returns soft warnings (e.g. unusual order).
  std::vector<std::string> validate() const {
    if (d_in == 0 || d_out == 0) throw Error(ErrorKind::InvalidArgument, "layer dimensions must be positive");
    std::vector<std::string> warnings;
    switch (kind) {
      case LayerKind::Polynomial:
        if (order_p == 0) throw Error(ErrorKind::InvalidArgument, "polynomial order must be positive");
        if (order_p > 3) warnings.push_back("polynomial order " + std::to_string(order_p) + " outside {1,2,3}");
        break;
      case LayerKind::BSpline:
        if (grid_size == 0 || spline_order == 0)
          throw Error(ErrorKind::InvalidArgument, "bspline grid_size and spline_order must be positive");
        if (!(grid_lo < grid_hi)) throw Error(ErrorKind::InvalidArgument, "bspline grid range must be increasing");
        break;
      case LayerKind::Fourier:
        if (grid_size == 0) throw Error(ErrorKind::InvalidArgument, "fourier grid_size must be positive");
        break;
      default:
        break;
    }
    return warnings;
  }

  /// Number of basis functions per edge for the families that have them.
  std::size_t basis_count() const {
    switch (kind) {
      case LayerKind::BSpline: return grid_size + spline_order;
      case LayerKind::Fourier: return grid_size;
      default: return 0;
    }
  }

  // Compares only the fields that matter for the kind.
  friend bool operator==(const LayerSpec& a, const LayerSpec& b) {
    if (a.kind != b.kind || a.d_in != b.d_in || a.d_out != b.d_out || a.apply_sigmoid != b.apply_sigmoid)
      return false;
    switch (a.kind) {
      case LayerKind::Polynomial: return a.order_p == b.order_p && a.init == b.init;
      case LayerKind::BSpline:
        return a.grid_size == b.grid_size && a.spline_order == b.spline_order && a.grid_lo == b.grid_lo &&
               a.grid_hi == b.grid_hi;
      case LayerKind::Fourier: return a.grid_size == b.grid_size;
      default: return true;
    }
  }
};

/// Closed-form count of learnable scalars.
///  affine     d_out*d_in + d_out
///  polynomial (p+1)*d_out*d_in + d_out
///  bspline    d_out*d_in*(2 + grid_size + spline_order)   (base weight, scaler, coefficients)
///  fourier    2*grid_size*d_out*d_in + d_out
///  wavelet    3*d_out*d_in
inline std::size_t count_parameters(const LayerSpec& s) {
  const std::size_t edges = s.d_out * s.d_in;
  switch (s.kind) {
    case LayerKind::Affine: return edges + s.d_out;
    case LayerKind::Polynomial: return (s.order_p + 1) * edges + s.d_out;
    case LayerKind::BSpline: return edges * (2 + s.grid_size + s.spline_order);
    case LayerKind::Fourier: return 2 * s.grid_size * edges + s.d_out;
    case LayerKind::Wavelet: return 3 * edges;
  }
  return 0;
}

namespace detail {
inline std::uint64_t next_param_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

/// Learnable parameters of one layer, in the family's canonical order:
///  affine     [W, b]
///  polynomial [C_0, ..., C_p, b]
///  bspline    [base_W, spline_coeffs, spline_scaler]
///  fourier    [cos_coeffs, sin_coeffs, bias]
///  wavelet    [weight, translation, scale]
/// Biases are 1 x d_out row vectors.
///
/// Each instance carries an identity used to reject a forward cache produced
/// by a different parameter set. Copies get a fresh identity.
class LayerParams {
 public:
  LayerParams() : id_(detail::next_param_id()) {}
  LayerParams(LayerSpec spec, std::vector<Matrix> tensors)
      : spec_(std::move(spec)), tensors_(std::move(tensors)), id_(detail::next_param_id()) {
    check_shapes();
  }
  LayerParams(const LayerParams& o) : spec_(o.spec_), tensors_(o.tensors_), id_(detail::next_param_id()) {}
  LayerParams& operator=(const LayerParams& o) {
    spec_ = o.spec_;
    tensors_ = o.tensors_;
    id_ = detail::next_param_id();
    return *this;
  }
  LayerParams(LayerParams&&) noexcept = default;
  LayerParams& operator=(LayerParams&&) noexcept = default;

  /// All-zero parameters of the right shapes.
  static LayerParams zeros(const LayerSpec& spec) {
    std::vector<Matrix> t;
    for (const auto& [r, c] : shapes(spec)) t.emplace_back(r, c);
    return LayerParams(spec, std::move(t));
  }

  static std::vector<std::pair<std::size_t, std::size_t>> shapes(const LayerSpec& s) {
    const auto o = s.d_out, i = s.d_in;
    switch (s.kind) {
      case LayerKind::Affine: return {{o, i}, {1, o}};
      case LayerKind::Polynomial: {
        std::vector<std::pair<std::size_t, std::size_t>> v(s.order_p + 1, {o, i});
        v.emplace_back(1, o);
        return v;
      }
      case LayerKind::BSpline: return {{o, i}, {o, i * s.basis_count()}, {o, i}};
      case LayerKind::Fourier: return {{o, i * s.grid_size}, {o, i * s.grid_size}, {1, o}};
      case LayerKind::Wavelet: return {{o, i}, {o, i}, {o, i}};
    }
    return {};
  }

  static std::vector<std::string> names(const LayerSpec& s) {
    switch (s.kind) {
      case LayerKind::Affine: return {"W", "b"};
      case LayerKind::Polynomial: {
        std::vector<std::string> v;
        for (unsigned i = 0; i <= s.order_p; ++i) v.push_back("C" + std::to_string(i));
        v.emplace_back("b");
        return v;
      }
      case LayerKind::BSpline: return {"base_W", "spline_coeffs", "spline_scaler"};
      case LayerKind::Fourier: return {"cos_coeffs", "sin_coeffs", "bias"};
      case LayerKind::Wavelet: return {"weight", "translation", "scale"};
    }
    return {};
  }

  const LayerSpec& spec() const noexcept { return spec_; }
  std::vector<Matrix>& tensors() noexcept { return tensors_; }
  const std::vector<Matrix>& tensors() const noexcept { return tensors_; }
  Matrix& tensor(std::size_t i) { return tensors_.at(i); }
  const Matrix& tensor(std::size_t i) const { return tensors_.at(i); }
  std::uint64_t id() const noexcept { return id_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  friend bool operator==(const LayerParams& a, const LayerParams& b) {
    return a.spec_ == b.spec_ && a.tensors_ == b.tensors_;
  }

 private:
  void check_shapes() const {
    const auto sh = shapes(spec_);
    if (sh.size() != tensors_.size())
      throw Error(ErrorKind::Shape, "layer " + std::string(to_string(spec_.kind)) + " expects " +
                                        std::to_string(sh.size()) + " tensors, got " +
                                        std::to_string(tensors_.size()));
    for (std::size_t k = 0; k < sh.size(); ++k)
      if (tensors_[k].rows() != sh[k].first || tensors_[k].cols() != sh[k].second)
        throw Error(ErrorKind::Shape, "tensor " + std::to_string(k) + " has shape " + tensors_[k].shape() +
                                          ", expected " + Matrix::shape_string(sh[k].first, sh[k].second));
  }

  LayerSpec spec_;
  std::vector<Matrix> tensors_;
  std::uint64_t id_;
};

/// Gradients mirror LayerParams tensor-for-tensor.
struct LayerGrads {
  std::vector<Matrix> tensors;
};

inline constexpr double kMinWaveletScale = 1e-3;

/// Applies hard parameter constraints: wavelet scales are kept >= 1e-3.
inline void enforce_constraints(LayerParams& p) {
  if (p.spec().kind != LayerKind::Wavelet) return;
  for (auto& s : p.tensor(2).data()) s = std::max(s, kMinWaveletScale);
}

/// Deterministic initialization; consumes draws from `stream` in tensor order.
inline LayerParams init_layer(const LayerSpec& spec, RngStream& stream) {
  spec.validate();
  LayerParams p = LayerParams::zeros(spec);
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec.d_in));
  auto uniform_into = [&](Matrix& m, double b) { m = rng_uniform(stream, -b, b, m.rows(), m.cols()); };
  switch (spec.kind) {
    case LayerKind::Affine:
      uniform_into(p.tensor(0), bound);
      break;
    case LayerKind::Polynomial:
      if (spec.init == InitScheme::LinearStart) {
        uniform_into(p.tensor(1), bound);
      } else {
        for (unsigned i = 0; i <= spec.order_p; ++i) uniform_into(p.tensor(i), bound / (spec.order_p + 1));
      }
      break;
    case LayerKind::BSpline: {
      uniform_into(p.tensor(0), bound);
      auto& c = p.tensor(1);
      c = rng_normal(stream, 0.0, 0.1 / spec.grid_size, c.rows(), c.cols());
      uniform_into(p.tensor(2), bound);
      break;
    }
    case LayerKind::Fourier: {
      const double sd = 1.0 / (std::sqrt(static_cast<double>(spec.d_in)) * std::sqrt(double(spec.grid_size)));
      for (int t = 0; t < 2; ++t) {
        auto& c = p.tensor(t);
        c = rng_normal(stream, 0.0, sd, c.rows(), c.cols());
      }
      break;
    }
    case LayerKind::Wavelet:
      uniform_into(p.tensor(0), bound);
      p.tensor(2).fill(1.0);
      break;
  }
  return p;
}

/// What backward needs from the matching forward call.
struct LayerCache {
  std::uint64_t params_id = 0;
  LayerSpec spec;
  Matrix input;
  Matrix output;
  std::vector<Matrix> aux;  // family-specific intermediates
};

// ---- B-spline basis --------------------------------------------------------------

/// Knot vector: grid_range split into grid_size intervals and extended by
/// spline_order knots on each side.
inline std::vector<double> bspline_knots(const LayerSpec& s) {
  const double h = (s.grid_hi - s.grid_lo) / s.grid_size;
  std::vector<double> t(s.grid_size + 2 * s.spline_order + 1);
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = s.grid_lo + (static_cast<double>(i) - static_cast<double>(s.spline_order)) * h;
  return t;
}

/// Cox-de Boor evaluation of the grid_size + spline_order basis functions of
/// degree spline_order at x, plus their derivatives. Outside the extended knot
/// span every basis is zero.
inline void bspline_basis(double x, const std::vector<double>& t, unsigned order, double* value, double* deriv) {
  const std::size_t n0 = t.size() - 1;  // order-0 pieces
  thread_local std::vector<double> b;
  b.assign(n0, 0.0);
  for (std::size_t i = 0; i < n0; ++i) b[i] = (x >= t[i] && x < t[i + 1]) ? 1.0 : 0.0;
  thread_local std::vector<double> prev;  // degree order-1 values for the derivative
  for (unsigned k = 1; k <= order; ++k) {
    if (k == order) prev.assign(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(n0 - k + 1));
    for (std::size_t i = 0; i + k < n0; ++i) {
      const double left = (x - t[i]) / (t[i + k] - t[i]) * b[i];
      const double right = (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * b[i + 1];
      b[i] = left + right;
    }
  }
  const std::size_t n = n0 - order;
  for (std::size_t i = 0; i < n; ++i) {
    value[i] = b[i];
    deriv[i] = order * (prev[i] / (t[i + order] - t[i]) - prev[i + 1] / (t[i + order + 1] - t[i + 1]));
  }
}

// ---- wavelet ---------------------------------------------------------------------

inline const double kMexicanHatNorm = 2.0 / (std::sqrt(3.0) * std::pow(std::numbers::pi, 0.25));

/// psi(u) = (2 / (sqrt(3) pi^(1/4))) (1 - u^2) exp(-u^2 / 2)
inline double mexican_hat(double u) { return kMexicanHatNorm * (1.0 - u * u) * std::exp(-0.5 * u * u); }
inline double mexican_hat_deriv(double u) { return kMexicanHatNorm * u * (u * u - 3.0) * std::exp(-0.5 * u * u); }

inline double silu(double x) { return x * sigmoid(x); }

// ---- forward / backward ------------------------------------------------------------

namespace detail {

inline Matrix spline_effective(const LayerParams& p) {
  const auto& s = p.spec();
  const std::size_t nb = s.basis_count();
  Matrix eff = p.tensor(1);
  const auto& scaler = p.tensor(2);
  for (std::size_t k = 0; k < s.d_out; ++k)
    for (std::size_t j = 0; j < s.d_in; ++j)
      for (std::size_t m = 0; m < nb; ++m) eff(k, j * nb + m) *= scaler(k, j);
  return eff;
}

}  // namespace detail

/// Evaluates the layer on a batch (one sample per row). Fills `cache` with
/// what backward() needs.
inline Matrix forward(const LayerParams& p, const Matrix& X, LayerCache& cache) {
  const auto& s = p.spec();
  if (X.cols() != s.d_in)
    throw Error(ErrorKind::Shape, "layer forward: input " + X.shape() + " but d_in=" + std::to_string(s.d_in));
  cache = LayerCache{};
  cache.params_id = p.id();
  cache.spec = s;
  cache.input = X;
  const std::size_t batch = X.rows();
  Matrix H;

  switch (s.kind) {
    case LayerKind::Affine:
      H = add_row_broadcast(matmul_nt(X, p.tensor(0)), p.tensor(1).data());
      break;

    case LayerKind::Polynomial: {
      // sum_i X^i C_i^T; X^0 is all ones, so the C_0 term is its row sums.
      Matrix c0 = row_sums(p.tensor(0));
      H = Matrix(batch, s.d_out);
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t k = 0; k < s.d_out; ++k) H(r, k) = c0[k];
      cache.aux.push_back(X);  // X^1
      for (unsigned i = 1; i <= s.order_p; ++i) {
        if (i > 1) cache.aux.push_back(hadamard(cache.aux.back(), X));
        axpy(H, 1.0, matmul_nt(cache.aux.back(), p.tensor(i)));
      }
      H = add_row_broadcast(H, p.tensor(s.order_p + 1).data());
      break;
    }

    case LayerKind::BSpline: {
      const auto knots = bspline_knots(s);
      const std::size_t nb = s.basis_count();
      Matrix F(batch, s.d_in * nb), dF(batch, s.d_in * nb), act(batch, s.d_in);
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t j = 0; j < s.d_in; ++j) {
          const double x = X(r, j);
          act(r, j) = silu(x);
          bspline_basis(x, knots, s.spline_order, &F(r, j * nb), &dF(r, j * nb));
        }
      H = matmul_nt(act, p.tensor(0));
      axpy(H, 1.0, matmul_nt(F, detail::spline_effective(p)));
      cache.aux.push_back(std::move(F));
      cache.aux.push_back(std::move(dF));
      break;
    }

    case LayerKind::Fourier: {
      const std::size_t G = s.grid_size;
      Matrix C(batch, s.d_in * G), S(batch, s.d_in * G);
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t j = 0; j < s.d_in; ++j)
          for (std::size_t m = 0; m < G; ++m) {
            const double a = static_cast<double>(m + 1) * X(r, j);
            C(r, j * G + m) = std::cos(a);
            S(r, j * G + m) = std::sin(a);
          }
      H = matmul_nt(C, p.tensor(0));
      axpy(H, 1.0, matmul_nt(S, p.tensor(1)));
      H = add_row_broadcast(H, p.tensor(2).data());
      cache.aux.push_back(std::move(C));
      cache.aux.push_back(std::move(S));
      break;
    }

    case LayerKind::Wavelet: {
      const auto& w = p.tensor(0);
      const auto& tr = p.tensor(1);
      const auto& sc = p.tensor(2);
      H = Matrix(batch, s.d_out);
      for (std::size_t r = 0; r < batch; ++r) {
        auto x = X.row(r);
        for (std::size_t k = 0; k < s.d_out; ++k) {
          double acc = 0.0;
          for (std::size_t j = 0; j < s.d_in; ++j) acc += w(k, j) * mexican_hat((x[j] - tr(k, j)) / sc(k, j));
          H(r, k) = acc;
        }
      }
      break;
    }
  }

  if (s.apply_sigmoid)
    for (auto& v : H.data()) v = sigmoid(v);
  cache.output = H;
  return H;
}

inline Matrix forward(const LayerParams& p, const Matrix& X) {
  LayerCache cache;
  return forward(p, X, cache);
}

struct BackwardResult {
  Matrix dX;
  LayerGrads grads;
};

/// Exact gradients of the forward map contracted with dY.
inline BackwardResult backward(const LayerParams& p, const LayerCache& cache, const Matrix& dY) {
  const auto& s = p.spec();
  if (cache.params_id != p.id() || !(cache.spec == s))
    throw Error(ErrorKind::StaleCache, "backward: cache was produced by a different parameter set");
  if (dY.rows() != cache.output.rows() || dY.cols() != cache.output.cols())
    throw Error(ErrorKind::Shape, "backward: dY " + dY.shape() + " vs output " + cache.output.shape());

  const Matrix& X = cache.input;
  const std::size_t batch = X.rows();
  Matrix dH = dY;
  if (s.apply_sigmoid) {
    const auto& y = cache.output;
    for (std::size_t i = 0; i < dH.size(); ++i) dH[i] *= y[i] * (1.0 - y[i]);
  }

  BackwardResult out;
  auto& g = out.grads.tensors;

  switch (s.kind) {
    case LayerKind::Affine:
      g.push_back(matmul_tn(dH, X));
      g.push_back(col_sums(dH));
      out.dX = matmul(dH, p.tensor(0));
      break;

    case LayerKind::Polynomial: {
      const auto& pw = cache.aux;  // pw[i-1] = X^i
      const Matrix db = col_sums(dH);
      Matrix dC0(s.d_out, s.d_in);
      for (std::size_t k = 0; k < s.d_out; ++k)
        for (std::size_t j = 0; j < s.d_in; ++j) dC0(k, j) = db[k];
      g.push_back(std::move(dC0));
      out.dX = Matrix(batch, s.d_in);
      for (unsigned i = 1; i <= s.order_p; ++i) {
        g.push_back(matmul_tn(dH, pw[i - 1]));
        Matrix term = matmul(dH, p.tensor(i));  // batch x d_in
        if (i == 1) {
          axpy(out.dX, 1.0, term);
        } else {
          const auto& lower = pw[i - 2];
          for (std::size_t e = 0; e < term.size(); ++e) out.dX[e] += i * lower[e] * term[e];
        }
      }
      g.push_back(db);
      break;
    }

    case LayerKind::BSpline: {
      const std::size_t nb = s.basis_count();
      const auto& F = cache.aux[0];
      const auto& dF = cache.aux[1];
      Matrix act(batch, s.d_in), dact(batch, s.d_in);
      for (std::size_t e = 0; e < X.size(); ++e) {
        const double x = X[e];
        const double sg = sigmoid(x);
        act[e] = x * sg;
        dact[e] = sg * (1.0 + x * (1.0 - sg));
      }
      const Matrix eff = detail::spline_effective(p);
      g.push_back(matmul_tn(dH, act));
      const Matrix dEff = matmul_tn(dH, F);
      Matrix dCoeff(s.d_out, s.d_in * nb), dScaler(s.d_out, s.d_in);
      const auto& coeff = p.tensor(1);
      const auto& scaler = p.tensor(2);
      for (std::size_t k = 0; k < s.d_out; ++k)
        for (std::size_t j = 0; j < s.d_in; ++j) {
          double acc = 0.0;
          for (std::size_t m = 0; m < nb; ++m) {
            const std::size_t c = j * nb + m;
            dCoeff(k, c) = dEff(k, c) * scaler(k, j);
            acc += dEff(k, c) * coeff(k, c);
          }
          dScaler(k, j) = acc;
        }
      g.push_back(std::move(dCoeff));
      g.push_back(std::move(dScaler));

      out.dX = hadamard(matmul(dH, p.tensor(0)), dact);
      const Matrix dFeat = matmul(dH, eff);  // batch x d_in*nb
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t j = 0; j < s.d_in; ++j) {
          double acc = 0.0;
          for (std::size_t m = 0; m < nb; ++m) acc += dFeat(r, j * nb + m) * dF(r, j * nb + m);
          out.dX(r, j) += acc;
        }
      break;
    }

    case LayerKind::Fourier: {
      const std::size_t G = s.grid_size;
      const auto& C = cache.aux[0];
      const auto& S = cache.aux[1];
      g.push_back(matmul_tn(dH, C));
      g.push_back(matmul_tn(dH, S));
      g.push_back(col_sums(dH));
      const Matrix dC = matmul(dH, p.tensor(0));
      const Matrix dS = matmul(dH, p.tensor(1));
      out.dX = Matrix(batch, s.d_in);
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t j = 0; j < s.d_in; ++j) {
          double acc = 0.0;
          for (std::size_t m = 0; m < G; ++m) {
            const std::size_t c = j * G + m;
            const double freq = static_cast<double>(m + 1);
            acc += freq * (-S(r, c) * dC(r, c) + C(r, c) * dS(r, c));
          }
          out.dX(r, j) = acc;
        }
      break;
    }

    case LayerKind::Wavelet: {
      const auto& w = p.tensor(0);
      const auto& tr = p.tensor(1);
      const auto& sc = p.tensor(2);
      Matrix dw(s.d_out, s.d_in), dt(s.d_out, s.d_in), ds(s.d_out, s.d_in);
      out.dX = Matrix(batch, s.d_in);
      for (std::size_t r = 0; r < batch; ++r) {
        auto x = X.row(r);
        auto dx = out.dX.row(r);
        for (std::size_t k = 0; k < s.d_out; ++k) {
          const double gk = dH(r, k);
          if (gk == 0.0) continue;
          for (std::size_t j = 0; j < s.d_in; ++j) {
            const double inv = 1.0 / sc(k, j);
            const double u = (x[j] - tr(k, j)) * inv;
            const double e = std::exp(-0.5 * u * u);
            const double psi = kMexicanHatNorm * (1.0 - u * u) * e;
            const double dpsi = kMexicanHatNorm * u * (u * u - 3.0) * e;
            const double gu = gk * w(k, j) * dpsi * inv;  // d/dx
            dw(k, j) += gk * psi;
            dx[j] += gu;
            dt(k, j) -= gu;
            ds(k, j) -= gu * u;
          }
        }
      }
      g.push_back(std::move(dw));
      g.push_back(std::move(dt));
      g.push_back(std::move(ds));
      break;
    }
  }
  return out;
}

}  // namespace kae
