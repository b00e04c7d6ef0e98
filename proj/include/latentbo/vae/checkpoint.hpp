#pragma once

#include <string>

#include "latentbo/io/blob.hpp"
#include "latentbo/vae/model.hpp"

namespace latentbo::vae {

// Checkpoint layout: JSON header with architecture, codec, shapes and caller
// metadata (config, seed), followed by every parameter tensor's float64 data
// in param_tensors() order.
inline void save_checkpoint(const std::string& path, const VaeParams& params,
                            const nlohmann::json& meta = {}) {
  io::Blob blob;
  VaeParams& p = const_cast<VaeParams&>(params);
  auto tensors = param_tensors(p);
  nlohmann::json shapes = nlohmann::json::array();
  for (const Tensor* t : tensors) shapes.push_back(t->shape());
  blob.header = {
      {"format", "latentbo-vae-checkpoint"},
      {"version", 1},
      {"codec",
       {{"kind", params.codec.kind == InputKind::binary_grid ? "binary_grid" : "token_seq"},
        {"grid_pixels", params.codec.grid_pixels},
        {"seq_len", params.codec.seq_len},
        {"alphabet", params.codec.alphabet}}},
      {"latent_dim", params.latent_dim},
      {"hidden_sizes", params.hidden_sizes},
      {"target_head", params.has_target_head},
      {"tensor_shapes", shapes},
      {"meta", meta},
  };
  for (const Tensor* t : tensors) io::append_f64(blob.payload, t->data().data(), t->data().size());
  io::write_blob(path, blob);
}

struct Checkpoint {
  VaeParams params;
  nlohmann::json meta;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  io::Blob blob = io::read_blob(path);
  const auto& h = blob.header;
  if (h.value("format", "") != "latentbo-vae-checkpoint")
    throw std::runtime_error("not a VAE checkpoint: " + path);
  InputCodec codec;
  codec.kind = h["codec"]["kind"] == "binary_grid" ? InputKind::binary_grid : InputKind::token_seq;
  codec.grid_pixels = h["codec"]["grid_pixels"];
  codec.seq_len = h["codec"]["seq_len"];
  codec.alphabet = h["codec"]["alphabet"];
  math::Rng scratch(0);
  Checkpoint ck{make_vae(codec, h["latent_dim"], h["hidden_sizes"].get<std::vector<int>>(),
                         h["target_head"], scratch),
                h.value("meta", nlohmann::json())};
  auto tensors = param_tensors(ck.params);
  std::size_t cursor = 0;
  for (Tensor* t : tensors) io::read_f64(blob.payload, cursor, t->data().data(), t->data().size());
  if (cursor != blob.payload.size()) throw std::runtime_error("checkpoint payload size mismatch");
  return ck;
}

}  // namespace latentbo::vae
