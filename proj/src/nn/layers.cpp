#include "vmr/nn/layers.hpp"

#include <cmath>

namespace vmr::nn {

void append_params(ParamList& out, const std::string& prefix, const ParamList& params) {
  for (const auto& p : params) out.push_back({prefix + p.name, p.tensor});
}

Linear::Linear(Index in, Index out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  Matrix w(in, out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-a, a);
  weight = parameter(std::move(w));
  bias = parameter(Matrix::Zero(1, out));
}

ParamList Linear::params(const std::string& prefix) const {
  return {{prefix + "weight", weight}, {prefix + "bias", bias}};
}

LayerNorm::LayerNorm(Index dim)
    : gamma(parameter(Matrix::Ones(1, dim))), beta(parameter(Matrix::Zero(1, dim))) {}

ParamList LayerNorm::params(const std::string& prefix) const {
  return {{prefix + "gamma", gamma}, {prefix + "beta", beta}};
}

Mlp::Mlp(Index in, Index hidden, Index out, Rng& rng) : fc1(in, hidden, rng), fc2(hidden, out, rng) {}

ParamList Mlp::params(const std::string& prefix) const {
  ParamList out;
  append_params(out, prefix + "fc1.", fc1.params(""));
  append_params(out, prefix + "fc2.", fc2.params(""));
  return out;
}

MultiHeadAttention::MultiHeadAttention(Index dim, int h, Rng& rng)
    : wq(dim, dim, rng), wk(dim, dim, rng), wv(dim, dim, rng), wo(dim, dim, rng), heads(h) {}

Tensor MultiHeadAttention::operator()(const Tensor& query, const Segments& q_segs,
                                      const Tensor& key_value, const Segments& kv_segs) const {
  bool single_key = true;
  for (const auto& s : kv_segs) single_key = single_key && s.length == 1;
  Tensor ctx;
  if (single_key && kv_segs.size() == q_segs.size()) {
    // Softmax over one key is identically 1; the query and key projections
    // cannot influence the output, so skip them.
    Tensor v = wv(key_value);
    std::vector<Index> rows;
    for (std::size_t s = 0; s < q_segs.size(); ++s) {
      for (Index r = 0; r < q_segs[s].length; ++r) rows.push_back(kv_segs[s].start);
    }
    ctx = gather_rows(v, rows);
  } else {
    ctx = attention(wq(query), wk(key_value), wv(key_value), q_segs, kv_segs, heads);
  }
  return wo(ctx);
}

ParamList MultiHeadAttention::params(const std::string& prefix) const {
  ParamList out;
  append_params(out, prefix + "q.", wq.params(""));
  append_params(out, prefix + "k.", wk.params(""));
  append_params(out, prefix + "v.", wv.params(""));
  append_params(out, prefix + "o.", wo.params(""));
  return out;
}

TransformerEncoderLayer::TransformerEncoderLayer(Index dim, int heads, Index ffn_dim, Rng& rng)
    : ln_attn(dim), attn(dim, heads, rng), ln_ffn(dim), ffn(dim, ffn_dim, dim, rng) {}

Tensor TransformerEncoderLayer::operator()(const Tensor& x, const Segments& segs) const {
  Tensor h = ln_attn(x);
  Tensor y = add(x, attn(h, segs, h, segs));
  return add(y, ffn(ln_ffn(y)));
}

ParamList TransformerEncoderLayer::params(const std::string& prefix) const {
  ParamList out;
  append_params(out, prefix + "ln_attn.", ln_attn.params(""));
  append_params(out, prefix + "attn.", attn.params(""));
  append_params(out, prefix + "ln_ffn.", ln_ffn.params(""));
  append_params(out, prefix + "ffn.", ffn.params(""));
  return out;
}

ConformerBlock::ConformerBlock(Index dim, int heads, Index ffn_dim, Index kernel, Rng& rng)
    : ln_ff1(dim),
      ff1_up(dim, ffn_dim, rng),
      ff1_down(ffn_dim, dim, rng),
      ln_attn(dim),
      attn(dim, heads, rng),
      ln_conv(dim),
      conv_pw1(dim, 2 * dim, rng),
      ln_conv_mid(dim),
      conv_pw2(dim, dim, rng),
      ln_ff2(dim),
      ff2_up(dim, ffn_dim, rng),
      ff2_down(ffn_dim, dim, rng),
      ln_out(dim) {
  const double a = 1.0 / std::sqrt(static_cast<double>(kernel));
  Matrix k(kernel, dim);
  for (Index i = 0; i < k.size(); ++i) k.data()[i] = rng.uniform(-a, a);
  conv_dw_kernel = parameter(std::move(k));
  conv_dw_bias = parameter(Matrix::Zero(1, dim));
}

Tensor ConformerBlock::operator()(const Tensor& x, const Segments& segs) const {
  Tensor y = add(x, scale(ff1_down(swish(ff1_up(ln_ff1(x)))), 0.5));
  Tensor h = ln_attn(y);
  y = add(y, attn(h, segs, h, segs));
  Tensor c = glu(conv_pw1(ln_conv(y)));
  c = depthwise_conv1d(c, conv_dw_kernel, conv_dw_bias, segs);
  c = conv_pw2(swish(ln_conv_mid(c)));
  y = add(y, c);
  y = add(y, scale(ff2_down(swish(ff2_up(ln_ff2(y)))), 0.5));
  return ln_out(y);
}

ParamList ConformerBlock::params(const std::string& prefix) const {
  ParamList out;
  append_params(out, prefix + "ln_ff1.", ln_ff1.params(""));
  append_params(out, prefix + "ff1_up.", ff1_up.params(""));
  append_params(out, prefix + "ff1_down.", ff1_down.params(""));
  append_params(out, prefix + "ln_attn.", ln_attn.params(""));
  append_params(out, prefix + "attn.", attn.params(""));
  append_params(out, prefix + "ln_conv.", ln_conv.params(""));
  append_params(out, prefix + "conv_pw1.", conv_pw1.params(""));
  out.push_back({prefix + "conv_dw.kernel", conv_dw_kernel});
  out.push_back({prefix + "conv_dw.bias", conv_dw_bias});
  append_params(out, prefix + "ln_conv_mid.", ln_conv_mid.params(""));
  append_params(out, prefix + "conv_pw2.", conv_pw2.params(""));
  append_params(out, prefix + "ln_ff2.", ln_ff2.params(""));
  append_params(out, prefix + "ff2_up.", ff2_up.params(""));
  append_params(out, prefix + "ff2_down.", ff2_down.params(""));
  append_params(out, prefix + "ln_out.", ln_out.params(""));
  return out;
}

Matrix sinusoidal_positions(Index max_len, Index dim) {
  Matrix pe(max_len, dim);
  for (Index pos = 0; pos < max_len; ++pos) {
    for (Index i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe(pos, i) = (i % 2 == 0) ? std::sin(static_cast<double>(pos) * freq)
                                : std::cos(static_cast<double>(pos) * freq);
    }
  }
  return pe;
}

}  // namespace vmr::nn
