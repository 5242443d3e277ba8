#pragma once

#include <string>

#include "vmr/nn/ops.hpp"
#include "vmr/rng.hpp"

namespace vmr::nn {

inline constexpr double kLayerNormEps = 1e-5;

void append_params(ParamList& out, const std::string& prefix, const ParamList& params);

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out

  Linear() = default;
  // Xavier-uniform weights, zero bias.
  Linear(Index in, Index out, Rng& rng);

  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  Index in_dim() const { return weight.rows(); }
  Index out_dim() const { return weight.cols(); }
  ParamList params(const std::string& prefix) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  LayerNorm() = default;
  explicit LayerNorm(Index dim);

  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta, kLayerNormEps); }
  ParamList params(const std::string& prefix) const;
};

// Two linear layers with a GELU between them.
struct Mlp {
  Linear fc1;
  Linear fc2;

  Mlp() = default;
  Mlp(Index in, Index hidden, Index out, Rng& rng);

  Tensor operator()(const Tensor& x) const { return fc2(gelu(fc1(x))); }
  ParamList params(const std::string& prefix) const;
};

struct MultiHeadAttention {
  Linear wq;
  Linear wk;
  Linear wv;
  Linear wo;
  int heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(Index dim, int heads, Rng& rng);

  // Queries in segment i attend to keys/values in segment i.
  Tensor operator()(const Tensor& query, const Segments& q_segs, const Tensor& key_value,
                    const Segments& kv_segs) const;
  ParamList params(const std::string& prefix) const;
};

// Pre-norm transformer encoder layer: x + MHSA(LN x), then x + FFN(LN x).
struct TransformerEncoderLayer {
  LayerNorm ln_attn;
  MultiHeadAttention attn;
  LayerNorm ln_ffn;
  Mlp ffn;

  TransformerEncoderLayer() = default;
  TransformerEncoderLayer(Index dim, int heads, Index ffn_dim, Rng& rng);

  Tensor operator()(const Tensor& x, const Segments& segs) const;
  ParamList params(const std::string& prefix) const;
};

// Macaron-style conformer block: half-step FFN, self-attention, convolution
// module (pointwise + GLU, depthwise, norm, swish, pointwise), half-step FFN,
// final layer norm. Batch norm in the convolution module is replaced by layer
// norm so a single clip is a valid batch.
struct ConformerBlock {
  LayerNorm ln_ff1;
  Linear ff1_up;
  Linear ff1_down;
  LayerNorm ln_attn;
  MultiHeadAttention attn;
  LayerNorm ln_conv;
  Linear conv_pw1;
  Tensor conv_dw_kernel;
  Tensor conv_dw_bias;
  LayerNorm ln_conv_mid;
  Linear conv_pw2;
  LayerNorm ln_ff2;
  Linear ff2_up;
  Linear ff2_down;
  LayerNorm ln_out;

  ConformerBlock() = default;
  ConformerBlock(Index dim, int heads, Index ffn_dim, Index kernel, Rng& rng);

  Tensor operator()(const Tensor& x, const Segments& segs) const;
  ParamList params(const std::string& prefix) const;
};

// Fixed sinusoidal position table, rows = positions.
Matrix sinusoidal_positions(Index max_len, Index dim);

}  // namespace vmr::nn
