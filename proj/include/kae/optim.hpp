#pragma once

// Adam with coupled L2 weight decay (the decay term is added to the gradient
// before the moment updates).

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kae/error.hpp"
#include "kae/model.hpp"
#include "kae/ndcore.hpp"

namespace kae {

struct AdamState {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  // Flat list in canonical parameter order (see model_parameters).
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// Canonical enumeration: encoder tensors in layer order, then decoder tensors.
inline std::vector<Matrix*> model_parameters(Autoencoder& model) {
  std::vector<Matrix*> out;
  for (auto& t : model.encoder.tensors()) out.push_back(&t);
  for (auto& t : model.decoder.tensors()) out.push_back(&t);
  return out;
}

inline std::vector<const Matrix*> model_gradients(const ModelGrads& g) {
  std::vector<const Matrix*> out;
  for (const auto& t : g.encoder.tensors) out.push_back(&t);
  for (const auto& t : g.decoder.tensors) out.push_back(&t);
  return out;
}

inline std::vector<std::string> model_parameter_names(const Autoencoder& model) {
  std::vector<std::string> out;
  for (const auto& n : LayerParams::names(model.encoder.spec())) out.push_back("encoder." + n);
  for (const auto& n : LayerParams::names(model.decoder.spec())) out.push_back("decoder." + n);
  return out;
}

inline AdamState make_adam(const Autoencoder& model, double lr, double weight_decay) {
  AdamState s;
  s.lr = lr;
  s.weight_decay = weight_decay;
  auto add = [&](const LayerParams& p) {
    for (const auto& t : p.tensors()) {
      s.m.emplace_back(t.rows(), t.cols());
      s.v.emplace_back(t.rows(), t.cols());
    }
  };
  add(model.encoder);
  add(model.decoder);
  return s;
}

/// One Adam update over parallel lists of parameters and gradients:
///   g <- g + wd * theta
///   m <- b1 m + (1 - b1) g
///   v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr * mhat / (sqrt(vhat) + eps)
inline void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads, AdamState& s) {
  if (params.size() != grads.size() || params.size() != s.m.size() || params.size() != s.v.size())
    throw Error(ErrorKind::Shape, "adam_step: " + std::to_string(params.size()) + " params, " +
                                      std::to_string(grads.size()) + " grads, " + std::to_string(s.m.size()) +
                                      " moment buffers");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(s.m[i]) || !params[i]->same_shape(s.v[i]))
      throw Error(ErrorKind::Shape, "adam_step: tensor " + std::to_string(i) + " param " + params[i]->shape() +
                                        " grad " + grads[i]->shape() + " moment " + s.m[i].shape());

  s.t += 1;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& theta = params[i]->data();
    const auto& g0 = grads[i]->data();
    auto& m = s.m[i].data();
    auto& v = s.v[i].data();
    for (std::size_t e = 0; e < theta.size(); ++e) {
      const double g = g0[e] + s.weight_decay * theta[e];
      m[e] = s.beta1 * m[e] + (1.0 - s.beta1) * g;
      v[e] = s.beta2 * v[e] + (1.0 - s.beta2) * g * g;
      const double mhat = m[e] / c1;
      const double vhat = v[e] / c2;
      theta[e] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
  }
}

/// Adam step on both layers followed by the layer constraints (wavelet scale clamp).
inline void step(Autoencoder& model, const ModelGrads& grads, AdamState& state) {
  const auto params = model_parameters(model);
  const auto g = model_gradients(grads);
  adam_step(params, g, state);
  enforce_constraints(model.encoder);
  enforce_constraints(model.decoder);
}

}  // namespace kae
