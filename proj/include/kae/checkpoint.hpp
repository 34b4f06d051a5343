#pragma once

// Checkpoint container:
//
//   bytes 0..7   magic "KAEBNCH1"
//   bytes 8..15  u64 little-endian length L of the JSON header
//   next L bytes UTF-8 JSON header
//   remainder    little-endian IEEE-754 doubles, one block per tensor, in the
//                order the header lists them
//
// Header fields: format_version, config, parameter_count, tensors
// [{name, rows, cols}], and optionally optimizer {t, lr, weight_decay, beta1,
// beta2, eps, tensors}. Optimizer moment tensors follow the model tensors in
// the payload (first all "m." blocks, then all "v." blocks).

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kae/error.hpp"
#include "kae/model.hpp"
#include "kae/optim.hpp"

namespace kae {

inline constexpr char kCheckpointMagic[8] = {'K', 'A', 'E', 'B', 'N', 'C', 'H', '1'};
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json config_to_json(const AutoencoderConfig& c) {
  nlohmann::json j;
  j["d_input"] = c.d_input;
  j["d_latent"] = c.d_latent;
  j["family"] = std::string(to_string(c.family));
  j["order_p"] = c.order_p;
  j["grid_size"] = c.grid_size;
  j["spline_order"] = c.spline_order;
  j["grid_range"] = {c.grid_lo, c.grid_hi};
  j["init"] = std::string(to_string(c.init));
  j["latent_sigmoid"] = c.resolved_latent_sigmoid();
  j["output_sigmoid"] = c.resolved_output_sigmoid();
  j["master_seed"] = c.master_seed;
  return j;
}

inline AutoencoderConfig config_from_json(const nlohmann::json& j) {
  AutoencoderConfig c;
  c.d_input = j.at("d_input").get<std::size_t>();
  c.d_latent = j.at("d_latent").get<std::size_t>();
  const auto fam = parse_layer_kind(j.at("family").get<std::string>());
  if (!fam) throw Error(ErrorKind::Parse, "checkpoint: unknown family " + j.at("family").dump());
  c.family = *fam;
  c.order_p = j.at("order_p").get<unsigned>();
  c.grid_size = j.at("grid_size").get<unsigned>();
  c.spline_order = j.at("spline_order").get<unsigned>();
  c.grid_lo = j.at("grid_range").at(0).get<double>();
  c.grid_hi = j.at("grid_range").at(1).get<double>();
  const auto init = parse_init_scheme(j.at("init").get<std::string>());
  if (!init) throw Error(ErrorKind::Parse, "checkpoint: unknown init scheme");
  c.init = *init;
  c.latent_sigmoid = j.at("latent_sigmoid").get<bool>();
  c.output_sigmoid = j.at("output_sigmoid").get<bool>();
  c.master_seed = j.at("master_seed").get<std::uint64_t>();
  return c;
}

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(b, 8);
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

inline void put_doubles(std::ostream& os, const Matrix& m) {
  for (double d : m.data()) put_u64(os, std::bit_cast<std::uint64_t>(d));
}

inline nlohmann::json tensor_entry(const std::string& name, const Matrix& m) {
  return {{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}};
}

}  // namespace detail

struct Checkpoint {
  Autoencoder model;
  std::optional<AdamState> optimizer;
};

inline void save_checkpoint(const std::filesystem::path& path, const Autoencoder& model,
                            const AdamState* optimizer = nullptr) {
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["config"] = config_to_json(model.config);
  header["parameter_count"] = model.parameter_count();

  std::vector<const Matrix*> blocks;
  auto& tensors = header["tensors"] = nlohmann::json::array();
  {
    const auto names = model_parameter_names(model);
    std::size_t i = 0;
    for (const auto* layer : {&model.encoder, &model.decoder})
      for (const auto& t : layer->tensors()) {
        tensors.push_back(detail::tensor_entry(names[i++], t));
        blocks.push_back(&t);
      }
    if (optimizer) {
      if (optimizer->m.size() != names.size() || optimizer->v.size() != names.size())
        throw Error(ErrorKind::Shape, "save_checkpoint: optimizer buffers do not match model");
      nlohmann::json opt;
      opt["t"] = optimizer->t;
      opt["lr"] = optimizer->lr;
      opt["weight_decay"] = optimizer->weight_decay;
      opt["beta1"] = optimizer->beta1;
      opt["beta2"] = optimizer->beta2;
      opt["eps"] = optimizer->eps;
      auto& ot = opt["tensors"] = nlohmann::json::array();
      for (std::size_t k = 0; k < names.size(); ++k) {
        ot.push_back(detail::tensor_entry("m." + names[k], optimizer->m[k]));
        blocks.push_back(&optimizer->m[k]);
      }
      for (std::size_t k = 0; k < names.size(); ++k) {
        ot.push_back(detail::tensor_entry("v." + names[k], optimizer->v[k]));
        blocks.push_back(&optimizer->v[k]);
      }
      header["optimizer"] = std::move(opt);
    }
  }

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  const std::string text = header.dump();
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto* b : blocks) detail::put_doubles(os, *b);
  if (!os) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline Checkpoint load_checkpoint_full(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw Error(ErrorKind::BadMagic, path.string() + " is not a KAEBNCH1 checkpoint");
  if (bytes.size() < 16) throw Error(ErrorKind::PayloadMismatch, path.string() + ": truncated before header length");
  const std::uint64_t hlen = detail::get_u64(bytes.data() + 8);
  if (hlen > bytes.size() - 16)
    throw Error(ErrorKind::PayloadMismatch, path.string() + ": header length exceeds file size");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": header is not valid JSON: " + e.what());
  }
  if (!header.contains("format_version") || header["format_version"] != kCheckpointVersion)
    throw Error(ErrorKind::BadVersion, path.string() + ": unsupported format_version " +
                                           (header.contains("format_version") ? header["format_version"].dump()
                                                                              : std::string("<missing>")));

  Checkpoint ck;
  try {
    ck.model = build(config_from_json(header.at("config")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, path.string() + ": bad config block: " + e.what());
  }

  std::vector<Matrix*> blocks = model_parameters(ck.model);
  const auto names = model_parameter_names(ck.model);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != blocks.size())
    throw Error(ErrorKind::PayloadMismatch, path.string() + ": header lists " + std::to_string(tensors.size()) +
                                                " tensors, config implies " + std::to_string(blocks.size()));

  std::vector<nlohmann::json> entries(tensors.begin(), tensors.end());
  if (header.contains("optimizer")) {
    const auto& o = header["optimizer"];
    AdamState st = make_adam(ck.model, o.at("lr").get<double>(), o.at("weight_decay").get<double>());
    st.t = o.at("t").get<std::uint64_t>();
    st.beta1 = o.at("beta1").get<double>();
    st.beta2 = o.at("beta2").get<double>();
    st.eps = o.at("eps").get<double>();
    ck.optimizer = std::move(st);
    const auto& ot = o.at("tensors");
    if (ot.size() != 2 * blocks.size())
      throw Error(ErrorKind::PayloadMismatch, path.string() + ": optimizer tensor list has wrong length");
    entries.insert(entries.end(), ot.begin(), ot.end());
    for (auto& m : ck.optimizer->m) blocks.push_back(&m);
    for (auto& v : ck.optimizer->v) blocks.push_back(&v);
  }

  std::size_t expected = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto r = entries[i].at("rows").get<std::size_t>();
    const auto c = entries[i].at("cols").get<std::size_t>();
    if (r != blocks[i]->rows() || c != blocks[i]->cols())
      throw Error(ErrorKind::PayloadMismatch, path.string() + ": tensor " + entries[i].at("name").get<std::string>() +
                                                  " declared " + Matrix::shape_string(r, c) + ", config implies " +
                                                  blocks[i]->shape());
    expected += r * c * 8;
  }
  const std::size_t have = bytes.size() - 16 - hlen;
  if (have != expected)
    throw Error(ErrorKind::PayloadMismatch, path.string() + ": payload has " + std::to_string(have) +
                                                " bytes, header declares " + std::to_string(expected));

  const unsigned char* p = bytes.data() + 16 + hlen;
  for (auto* b : blocks)
    for (auto& d : b->data()) {
      d = std::bit_cast<double>(detail::get_u64(p));
      p += 8;
    }
  return ck;
}

inline Autoencoder load_checkpoint(const std::filesystem::path& path) { return load_checkpoint_full(path).model; }

}  // namespace kae
