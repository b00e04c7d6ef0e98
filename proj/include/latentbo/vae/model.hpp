#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "latentbo/ad/tape.hpp"
#include "latentbo/math/rng.hpp"
#include "latentbo/math/tensor.hpp"

namespace latentbo::vae {

using math::Tensor;

// How structured inputs map to the flat feature vector the MLPs consume and
// how decoder logits map back: independent Bernoulli pixels for binary grids,
// a categorical distribution per position for token sequences.
enum class InputKind { binary_grid, token_seq };

struct InputCodec {
  InputKind kind = InputKind::binary_grid;
  int grid_pixels = 256;
  int seq_len = 8;
  int alphabet = 6;

  int raw_size() const { return kind == InputKind::binary_grid ? grid_pixels : seq_len; }
  int feature_dim() const {
    return kind == InputKind::binary_grid ? grid_pixels : seq_len * alphabet;
  }

  void encode_into(const std::vector<std::uint8_t>& x, Tensor& features, int row) const {
    if (static_cast<int>(x.size()) != raw_size())
      throw std::invalid_argument("InputCodec: raw input size mismatch");
    if (kind == InputKind::binary_grid) {
      for (int j = 0; j < grid_pixels; ++j) features.at(row, j) = x[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
    } else {
      for (int p = 0; p < seq_len; ++p) {
        const int tok = x[static_cast<std::size_t>(p)];
        if (tok < 0 || tok >= alphabet) throw std::invalid_argument("InputCodec: token out of range");
        features.at(row, p * alphabet + tok) = 1.0;
      }
    }
  }

  Tensor to_features(std::span<const std::vector<std::uint8_t>> xs) const {
    Tensor out = Tensor::matrix(static_cast<int>(xs.size()), feature_dim());
    for (int i = 0; i < static_cast<int>(xs.size()); ++i) encode_into(xs[static_cast<std::size_t>(i)], out, i);
    return out;
  }

  Tensor to_features(const std::vector<std::uint8_t>& x) const {
    std::vector<std::vector<std::uint8_t>> one{x};
    return to_features(std::span<const std::vector<std::uint8_t>>(one));
  }
};

struct DenseLayer {
  Tensor W;  // [in, out]
  Tensor b;  // [out]
};

constexpr double kLogVarClamp = 10.0;

// MLP encoder/decoder pair with diagonal-Gaussian latent code and an optional
// target-prediction head hanging off the decoder trunk.
struct VaeParams {
  InputCodec codec;
  int latent_dim = 2;
  std::vector<int> hidden_sizes = {128, 64};
  bool has_target_head = false;

  std::vector<DenseLayer> enc_hidden;
  DenseLayer enc_mean, enc_logvar;
  std::vector<DenseLayer> dec_hidden;  // latent -> reversed hidden sizes
  DenseLayer dec_out;
  DenseLayer tp_head;  // last decoder hidden -> 1, valid iff has_target_head
};

inline DenseLayer make_dense(int in, int out, math::Rng& rng) {
  DenseLayer l;
  l.W = Tensor::matrix(in, out);
  const double s = 1.0 / std::sqrt(static_cast<double>(in));
  for (int i = 0; i < l.W.size(); ++i) l.W[i] = s * rng.normal();
  l.b = Tensor::vector(out, 0.0);
  return l;
}

inline VaeParams make_vae(InputCodec codec, int latent_dim, std::vector<int> hidden,
                          bool target_head, math::Rng& rng) {
  if (latent_dim < 1) throw std::invalid_argument("make_vae: latent_dim must be >= 1");
  if (hidden.empty()) throw std::invalid_argument("make_vae: need at least one hidden layer");
  VaeParams p;
  p.codec = codec;
  p.latent_dim = latent_dim;
  p.hidden_sizes = hidden;
  p.has_target_head = target_head;
  int in = codec.feature_dim();
  for (int h : hidden) {
    p.enc_hidden.push_back(make_dense(in, h, rng));
    in = h;
  }
  p.enc_mean = make_dense(in, latent_dim, rng);
  p.enc_logvar = make_dense(in, latent_dim, rng);
  in = latent_dim;
  for (auto it = hidden.rbegin(); it != hidden.rend(); ++it) {
    p.dec_hidden.push_back(make_dense(in, *it, rng));
    in = *it;
  }
  p.dec_out = make_dense(in, codec.feature_dim(), rng);
  if (target_head) p.tp_head = make_dense(in, 1, rng);
  return p;
}

// Stable enumeration of all parameter tensors; lift() and checkpointing rely
// on this order.
inline std::vector<Tensor*> param_tensors(VaeParams& p) {
  std::vector<Tensor*> out;
  auto push = [&](DenseLayer& l) {
    out.push_back(&l.W);
    out.push_back(&l.b);
  };
  for (auto& l : p.enc_hidden) push(l);
  push(p.enc_mean);
  push(p.enc_logvar);
  for (auto& l : p.dec_hidden) push(l);
  push(p.dec_out);
  if (p.has_target_head) push(p.tp_head);
  return out;
}

// ---- plain (inference) forward path ----

struct Gaussian {
  Tensor mean;    // [n, d]
  Tensor logvar;  // [n, d], clamped
};

inline Tensor encode_trunk(const VaeParams& p, const Tensor& x) {
  if (x.rank() != 2 || x.cols() != p.codec.feature_dim())
    throw std::invalid_argument("encode: feature shape mismatch");
  Tensor h = x;
  for (const auto& l : p.enc_hidden) h = math::tanh(math::add_rowvec(math::matmul(h, l.W), l.b));
  return h;
}

inline Gaussian encode(const VaeParams& p, const Tensor& x) {
  Tensor h = encode_trunk(p, x);
  Gaussian g;
  g.mean = math::add_rowvec(math::matmul(h, p.enc_mean.W), p.enc_mean.b);
  g.logvar = math::clamp(math::add_rowvec(math::matmul(h, p.enc_logvar.W), p.enc_logvar.b),
                         -kLogVarClamp, kLogVarClamp);
  math::ensure_finite(g.mean, "encode mean");
  return g;
}

inline Tensor decode_trunk(const VaeParams& p, const Tensor& z) {
  if (z.rank() != 2 || z.cols() != p.latent_dim)
    throw std::invalid_argument("decode: latent dimension mismatch");
  Tensor h = z;
  for (const auto& l : p.dec_hidden) h = math::tanh(math::add_rowvec(math::matmul(h, l.W), l.b));
  return h;
}

inline Tensor decode_logits(const VaeParams& p, const Tensor& z) {
  Tensor h = decode_trunk(p, z);
  return math::add_rowvec(math::matmul(h, p.dec_out.W), p.dec_out.b);
}

// Bernoulli probabilities per pixel, or a categorical simplex per position.
inline Tensor decode_probs(const VaeParams& p, const Tensor& z) {
  Tensor logits = decode_logits(p, z);
  if (p.codec.kind == InputKind::binary_grid) return math::sigmoid(logits);
  Tensor out = logits;
  const int n = logits.rows();
  for (int i = 0; i < n; ++i) {
    for (int pos = 0; pos < p.codec.seq_len; ++pos) {
      double m = logits.at(i, pos * p.codec.alphabet);
      for (int a = 1; a < p.codec.alphabet; ++a)
        m = std::max(m, logits.at(i, pos * p.codec.alphabet + a));
      double s = 0.0;
      for (int a = 0; a < p.codec.alphabet; ++a)
        s += std::exp(logits.at(i, pos * p.codec.alphabet + a) - m);
      for (int a = 0; a < p.codec.alphabet; ++a)
        out.at(i, pos * p.codec.alphabet + a) = std::exp(logits.at(i, pos * p.codec.alphabet + a) - m) / s;
    }
  }
  return out;
}

// Draw one structured input from the decoder distribution at a single latent
// point (z given as a length-d vector).
inline std::vector<std::uint8_t> sample_decode(const VaeParams& p, const Tensor& z,
                                               math::Rng& rng) {
  Tensor zrow = z.rank() == 2 ? z : math::reshape(z, 1, z.size());
  Tensor probs = decode_probs(p, zrow);
  std::vector<std::uint8_t> x(static_cast<std::size_t>(p.codec.raw_size()));
  if (p.codec.kind == InputKind::binary_grid) {
    for (int j = 0; j < p.codec.grid_pixels; ++j)
      x[static_cast<std::size_t>(j)] = rng.uniform() < probs.at(0, j) ? 1 : 0;
  } else {
    for (int pos = 0; pos < p.codec.seq_len; ++pos) {
      double u = rng.uniform();
      int tok = p.codec.alphabet - 1;
      double acc = 0.0;
      for (int a = 0; a < p.codec.alphabet; ++a) {
        acc += probs.at(0, pos * p.codec.alphabet + a);
        if (u < acc) {
          tok = a;
          break;
        }
      }
      x[static_cast<std::size_t>(pos)] = static_cast<std::uint8_t>(tok);
    }
  }
  return x;
}

// Target-prediction head output (standardized target scale), one value per row.
inline Tensor predict_target(const VaeParams& p, const Tensor& z) {
  if (!p.has_target_head) throw std::invalid_argument("predict_target: head absent");
  Tensor h = decode_trunk(p, z);
  Tensor out = math::add_rowvec(math::matmul(h, p.tp_head.W), p.tp_head.b);  // [n, 1]
  return math::sum_rows(out);
}

// ---- tape (training) forward path ----

struct LiftedDense {
  ad::Var W, b;
};

struct VaeVars {
  std::vector<LiftedDense> enc_hidden;
  LiftedDense enc_mean, enc_logvar;
  std::vector<LiftedDense> dec_hidden;
  LiftedDense dec_out, tp_head;
  bool has_target_head = false;
  std::vector<ad::Var> leaves;  // same order as param_tensors()
};

inline VaeVars lift(ad::Tape& tape, const VaeParams& p) {
  VaeVars v;
  v.has_target_head = p.has_target_head;
  auto lift_layer = [&](const DenseLayer& l) {
    LiftedDense d{tape.input(l.W, true), tape.input(l.b, true)};
    v.leaves.push_back(d.W);
    v.leaves.push_back(d.b);
    return d;
  };
  for (const auto& l : p.enc_hidden) v.enc_hidden.push_back(lift_layer(l));
  v.enc_mean = lift_layer(p.enc_mean);
  v.enc_logvar = lift_layer(p.enc_logvar);
  for (const auto& l : p.dec_hidden) v.dec_hidden.push_back(lift_layer(l));
  v.dec_out = lift_layer(p.dec_out);
  if (p.has_target_head) v.tp_head = lift_layer(p.tp_head);
  return v;
}

inline std::pair<ad::Var, ad::Var> encode_graph(const VaeVars& v, ad::Var x) {
  ad::Var h = x;
  for (const auto& l : v.enc_hidden) h = ad::tanh(ad::add_rowvec(ad::matmul(h, l.W), l.b));
  ad::Var mean_v = ad::add_rowvec(ad::matmul(h, v.enc_mean.W), v.enc_mean.b);
  ad::Var logvar = ad::clamp(ad::add_rowvec(ad::matmul(h, v.enc_logvar.W), v.enc_logvar.b),
                             -kLogVarClamp, kLogVarClamp);
  return {mean_v, logvar};
}

inline ad::Var decode_trunk_graph(const VaeVars& v, ad::Var z) {
  ad::Var h = z;
  for (const auto& l : v.dec_hidden) h = ad::tanh(ad::add_rowvec(ad::matmul(h, l.W), l.b));
  return h;
}

inline ad::Var decode_logits_graph(const VaeVars& v, ad::Var z) {
  ad::Var h = decode_trunk_graph(v, z);
  return ad::add_rowvec(ad::matmul(h, v.dec_out.W), v.dec_out.b);
}

// [n] predictions on the standardized target scale
inline ad::Var target_graph(const VaeVars& v, ad::Var z) {
  if (!v.has_target_head) throw std::invalid_argument("target_graph: head absent");
  ad::Var h = decode_trunk_graph(v, z);
  ad::Var out = ad::add_rowvec(ad::matmul(h, v.tp_head.W), v.tp_head.b);  // [n, 1]
  return ad::sum_rows(out);
}

}  // namespace latentbo::vae
