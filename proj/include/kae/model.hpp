#pragma once

// Shallow autoencoder d_input -> d_latent -> d_input built from one layer of
// a given family on each side, trained on per-element mean squared error.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "kae/error.hpp"
#include "kae/layers.hpp"
#include "kae/ndcore.hpp"

namespace kae {

struct AutoencoderConfig {
  std::size_t d_input = 784;
  std::size_t d_latent = 16;
  LayerKind family = LayerKind::Polynomial;
  unsigned order_p = 3;
  unsigned grid_size = 5;
  unsigned spline_order = 3;
  double grid_lo = -1.0;
  double grid_hi = 1.0;
  InitScheme init = InitScheme::LinearStart;
  /// Sigmoid after the encoder. Unset: the family default (on for affine and
  /// polynomial, off otherwise).
  std::optional<bool> latent_sigmoid;
  /// Sigmoid after the decoder. Unset: off for every family.
  std::optional<bool> output_sigmoid;
  std::uint64_t master_seed = 2024;

  bool resolved_latent_sigmoid() const { return latent_sigmoid.value_or(default_sigmoid(family)); }
  bool resolved_output_sigmoid() const { return output_sigmoid.value_or(false); }

  LayerSpec layer_spec(std::size_t d_in, std::size_t d_out, bool sigmoid) const {
    LayerSpec s = LayerSpec::make(family, d_in, d_out);
    s.order_p = order_p;
    s.grid_size = grid_size;
    s.spline_order = spline_order;
    s.grid_lo = grid_lo;
    s.grid_hi = grid_hi;
    s.init = init;
    s.apply_sigmoid = sigmoid;
    return s;
  }
  LayerSpec encoder_spec() const { return layer_spec(d_input, d_latent, resolved_latent_sigmoid()); }
  LayerSpec decoder_spec() const { return layer_spec(d_latent, d_input, resolved_output_sigmoid()); }

  void validate() const {
    if (d_input == 0 || d_latent == 0) throw Error(ErrorKind::InvalidArgument, "dimensions must be positive");
    if (d_latent >= d_input)
      throw Error(ErrorKind::InvalidArgument, "d_latent (" + std::to_string(d_latent) + ") must be below d_input (" +
                                                  std::to_string(d_input) + ")");
    encoder_spec().validate();
  }

  /// Sigmoid flags compare by their resolved values.
  friend bool operator==(const AutoencoderConfig& a, const AutoencoderConfig& b) {
    return a.d_input == b.d_input && a.d_latent == b.d_latent && a.family == b.family && a.order_p == b.order_p &&
           a.grid_size == b.grid_size && a.spline_order == b.spline_order && a.grid_lo == b.grid_lo &&
           a.grid_hi == b.grid_hi && a.init == b.init &&
           a.resolved_latent_sigmoid() == b.resolved_latent_sigmoid() &&
           a.resolved_output_sigmoid() == b.resolved_output_sigmoid() && a.master_seed == b.master_seed;
  }
};

struct Autoencoder {
  AutoencoderConfig config;
  LayerParams encoder;
  LayerParams decoder;

  std::size_t parameter_count() const { return encoder.scalar_count() + decoder.scalar_count(); }
};

inline std::size_t count_parameters(const AutoencoderConfig& c) {
  return count_parameters(c.encoder_spec()) + count_parameters(c.decoder_spec());
}

/// Initializes both layers from the "init" stream of the master seed,
/// encoder first.
inline Autoencoder build(const AutoencoderConfig& config) {
  config.validate();
  RngStream stream = RngStream::derive(config.master_seed, "init");
  Autoencoder m{config, {}, {}};
  m.encoder = init_layer(config.encoder_spec(), stream);
  m.decoder = init_layer(config.decoder_spec(), stream);
  return m;
}

inline Matrix encode(const Autoencoder& m, const Matrix& X) {
  if (X.cols() != m.config.d_input)
    throw Error(ErrorKind::Shape, "encode: input " + X.shape() + " but model d_input=" +
                                      std::to_string(m.config.d_input));
  return forward(m.encoder, X);
}

inline Matrix decode(const Autoencoder& m, const Matrix& Z) { return forward(m.decoder, Z); }

inline Matrix reconstruct(const Autoencoder& m, const Matrix& X) { return decode(m, encode(m, X)); }

/// Mean over all entries of the squared difference.
inline double mse(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::Shape, "mse: " + a.shape() + " vs " + b.shape());
  if (a.empty()) throw Error(ErrorKind::InvalidArgument, "mse: empty matrices");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

struct ModelGrads {
  LayerGrads encoder;
  LayerGrads decoder;
};

struct LossAndGrads {
  double loss = 0.0;
  ModelGrads grads;
};

/// Loss = mse(X, reconstruct(X)); the backward pass starts from
/// dZ = 2 (Z - X) / numel so that the reported loss is exactly the objective.
inline LossAndGrads loss_and_grads(const Autoencoder& m, const Matrix& X) {
  if (X.cols() != m.config.d_input)
    throw Error(ErrorKind::Shape, "loss_and_grads: input " + X.shape() + " but model d_input=" +
                                      std::to_string(m.config.d_input));
  LayerCache enc_cache, dec_cache;
  const Matrix Z = forward(m.encoder, X, enc_cache);
  const Matrix R = forward(m.decoder, Z, dec_cache);

  LossAndGrads out;
  out.loss = mse(R, X);
  Matrix dR = subtract(R, X);
  const double k = 2.0 / static_cast<double>(X.size());
  for (auto& v : dR.data()) v *= k;

  auto dec = backward(m.decoder, dec_cache, dR);
  auto enc = backward(m.encoder, enc_cache, dec.dX);
  out.grads.decoder = std::move(dec.grads);
  out.grads.encoder = std::move(enc.grads);
  return out;
}

}  // namespace kae
