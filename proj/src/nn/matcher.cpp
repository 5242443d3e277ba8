#include "vmr/nn/matcher.hpp"

#include "vmr/error.hpp"

namespace vmr::nn {

const char* setting_name(Setting s) {
  switch (s) {
    case Setting::kAE: return "AE";
    case Setting::kASE: return "A-SE";
    case Setting::kSE: return "SE";
    case Setting::kSER: return "SE&R";
  }
  return "?";
}

Setting parse_setting(const std::string& s) {
  if (s == "AE") return Setting::kAE;
  if (s == "A-SE") return Setting::kASE;
  if (s == "SE") return Setting::kSE;
  if (s == "SE&R") return Setting::kSER;
  throw ValidationError("unknown setting '" + s + "' (expected AE, A-SE, SE or SE&R)");
}

SequenceEncoder::SequenceEncoder(const MatcherConfig& cfg, Rng& rng)
    : max_seq_(cfg.max_seq), adapter_(cfg.feature_dim, cfg.model_dim, rng), final_ln_(cfg.model_dim) {
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    layers_.emplace_back(cfg.model_dim, cfg.heads, cfg.ffn_dim, rng);
  }
  positions_ = sinusoidal_positions(cfg.max_seq, cfg.model_dim);
}

Tensor SequenceEncoder::operator()(std::span<const SequenceInput> inputs, Setting setting) const {
  std::vector<Tensor> rows;
  Segments segs;
  Index total = 0;
  for (const auto& in : inputs) {
    Tensor tok;
    if (setting == Setting::kAE) {
      if (!in.track.defined()) throw ContractError("AE setting needs a track-level embedding");
      tok = in.track;
    } else {
      if (static_cast<Index>(in.mask.size()) != in.clips.rows()) {
        throw ContractError("sequence mask length must equal clip rows");
      }
      if (in.clips.rows() > max_seq_) {
        throw ContractError("sequence longer than max_seq (" + std::to_string(in.clips.rows()) + " > " +
                            std::to_string(max_seq_) + ")");
      }
      std::vector<Index> valid;
      for (std::size_t i = 0; i < in.mask.size(); ++i) {
        if (in.mask[i]) valid.push_back(static_cast<Index>(i));
      }
      if (valid.empty()) throw ContractError("sequence has no unmasked clips");
      tok = gather_rows(in.clips, valid);
      if (setting == Setting::kSER) {
        if (!in.plug.defined()) throw ContractError("SE&R setting needs plug-in embeddings");
        tok = add(tok, gather_rows(in.plug, valid));
      } else if (setting == Setting::kASE) {
        tok = segment_mean(tok, Segments{{0, tok.rows()}});
      }
    }
    if (tok.cols() != adapter_.in_dim()) throw ContractError("sequence feature width mismatch");
    segs.push_back({total, tok.rows()});
    total += tok.rows();
    rows.push_back(std::move(tok));
  }
  Tensor x = adapter_(rows.size() == 1 ? rows.front() : concat_rows(rows));
  Matrix pos(total, adapter_.out_dim());
  for (const auto& s : segs) pos.middleRows(s.start, s.length) = positions_.topRows(s.length);
  x = add(x, constant(std::move(pos)));
  for (const auto& layer : layers_) x = layer(x, segs);
  return segment_mean(final_ln_(x), segs);
}

ParamList SequenceEncoder::params(const std::string& prefix) const {
  ParamList out;
  append_params(out, prefix + "adapter.", adapter_.params(""));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    append_params(out, prefix + "layer" + std::to_string(l) + ".", layers_[l].params(""));
  }
  append_params(out, prefix + "final_ln.", final_ln_.params(""));
  return out;
}

Matcher::Matcher(const MatcherConfig& c, Rng& rng)
    : cfg(c),
      video_encoder(c, rng),
      music_encoder(c, rng),
      cross_video(c.model_dim, c.heads, rng),
      cross_music(c.model_dim, c.heads, rng),
      proj_video(c.model_dim, c.mlp_hidden, c.proj_dim, rng),
      proj_music(c.model_dim, c.mlp_hidden, c.proj_dim, rng),
      proj_text(c.model_dim, c.mlp_hidden, c.proj_dim, rng),
      decoder(c.proj_dim, c.mlp_hidden, c.model_dim, rng),
      recon_video(c.proj_dim, c.mlp_hidden, c.model_dim, rng),
      recon_music(c.proj_dim, c.mlp_hidden, c.model_dim, rng),
      classifier(2 * c.proj_dim, c.classifier_hidden, 2, rng) {}

namespace {

void require_dim(const Tensor& t, Index d, const char* what) {
  if (t.cols() != d) {
    throw ContractError(std::string(what) + ": expected width " + std::to_string(d) + ", got " +
                        std::to_string(t.cols()));
  }
}

}  // namespace

Tensor Matcher::attend_video(const Tensor& xi_video, const Tensor& xi_music) const {
  require_dim(xi_video, cfg.model_dim, "cross-attention query");
  require_dim(xi_music, cfg.model_dim, "cross-attention key");
  if (xi_video.rows() != xi_music.rows()) throw ContractError("cross-attention: row count mismatch");
  const Segments segs = unit_segments(xi_video.rows());
  return cross_video(xi_video, segs, xi_music, segs);
}

Tensor Matcher::attend_music(const Tensor& xi_music, const Tensor& xi_video) const {
  require_dim(xi_music, cfg.model_dim, "cross-attention query");
  require_dim(xi_video, cfg.model_dim, "cross-attention key");
  if (xi_video.rows() != xi_music.rows()) throw ContractError("cross-attention: row count mismatch");
  const Segments segs = unit_segments(xi_music.rows());
  return cross_music(xi_music, segs, xi_video, segs);
}

Tensor Matcher::project_video(const Tensor& xi, const Tensor& att) const {
  return proj_video(add(xi, att));
}

Tensor Matcher::project_music(const Tensor& xi, const Tensor& att) const {
  return proj_music(add(xi, att));
}

Tensor Matcher::match_logits(const Tensor& theta_video, const Tensor& theta_music) const {
  require_dim(theta_video, cfg.proj_dim, "match_logits video");
  require_dim(theta_music, cfg.proj_dim, "match_logits music");
  return classifier(concat_cols({theta_video, theta_music}));
}

ParamList Matcher::params() const {
  ParamList out;
  append_params(out, "matcher.video_encoder.", video_encoder.params(""));
  append_params(out, "matcher.music_encoder.", music_encoder.params(""));
  append_params(out, "matcher.cross_video.", cross_video.params(""));
  append_params(out, "matcher.cross_music.", cross_music.params(""));
  append_params(out, "matcher.proj_video.", proj_video.params(""));
  append_params(out, "matcher.proj_music.", proj_music.params(""));
  append_params(out, "matcher.proj_text.", proj_text.params(""));
  append_params(out, "matcher.decoder.", decoder.params(""));
  append_params(out, "matcher.recon_video.", recon_video.params(""));
  append_params(out, "matcher.recon_music.", recon_music.params(""));
  append_params(out, "matcher.classifier.", classifier.params(""));
  return out;
}

}  // namespace vmr::nn
