#pragma once

#include <span>
#include <string>
#include <vector>

#include "vmr/nn/layers.hpp"

namespace vmr::nn {

// Feature handling of the sequence encoders.
//   kAE  - one externally supplied track-level embedding per modality.
//   kASE - the mean of the clip embeddings as a length-1 sequence.
//   kSE  - the clip embedding sequence.
//   kSER - the clip sequence plus the rhythm (music) / flow (video) plug-in.
enum class Setting { kAE, kASE, kSE, kSER };

const char* setting_name(Setting s);
Setting parse_setting(const std::string& s);

struct MatcherConfig {
  Index feature_dim = 512;
  Index model_dim = 768;
  Index proj_dim = 256;
  int heads = 4;
  Index ffn_dim = 768;
  int encoder_layers = 1;
  Index mlp_hidden = 512;
  Index classifier_hidden = 128;
  Index max_seq = 7;
};

// One modality of one pair as seen by the sequence encoder.
struct SequenceInput {
  Tensor clips;               // max_seq (or fewer) x feature_dim; padded rows allowed
  std::vector<bool> mask;     // true marks a real clip, one entry per clips row
  Tensor plug;                // same shape as clips; added in kSER only
  Tensor track;               // 1 x feature_dim; used in kAE only
};

class SequenceEncoder {
 public:
  SequenceEncoder() = default;
  SequenceEncoder(const MatcherConfig& cfg, Rng& rng);

  // Returns |inputs| x model_dim pooled encodings. Masked rows are dropped
  // before the encoder, so their values never reach the output.
  Tensor operator()(std::span<const SequenceInput> inputs, Setting setting) const;
  ParamList params(const std::string& prefix) const;

 private:
  Index max_seq_ = 7;
  Linear adapter_;
  std::vector<TransformerEncoderLayer> layers_;
  LayerNorm final_ln_;
  Matrix positions_;
};

// All matching-model weights. The decoder is a single parameter set used by
// the video, music and tag paths.
struct Matcher {
  MatcherConfig cfg;
  SequenceEncoder video_encoder;
  SequenceEncoder music_encoder;
  MultiHeadAttention cross_video;  // query video, key/value music
  MultiHeadAttention cross_music;  // query music, key/value video
  Mlp proj_video;
  Mlp proj_music;
  Mlp proj_text;
  Mlp decoder;
  Mlp recon_video;
  Mlp recon_music;
  Mlp classifier;

  Matcher() = default;
  Matcher(const MatcherConfig& cfg, Rng& rng);

  // Row i of the result attends from query row i to key row i.
  Tensor attend_video(const Tensor& xi_video, const Tensor& xi_music) const;
  Tensor attend_music(const Tensor& xi_music, const Tensor& xi_video) const;
  Tensor project_video(const Tensor& xi, const Tensor& att) const;
  Tensor project_music(const Tensor& xi, const Tensor& att) const;
  Tensor project_text(const Tensor& xi_tag) const { return proj_text(xi_tag); }
  Tensor decode(const Tensor& theta) const { return decoder(theta); }
  Tensor reconstruct_video(const Tensor& theta) const { return recon_video(theta); }
  Tensor reconstruct_music(const Tensor& theta) const { return recon_music(theta); }
  // Two logits per row; index 1 means "matched".
  Tensor match_logits(const Tensor& theta_video, const Tensor& theta_music) const;

  ParamList params() const;
};

}  // namespace vmr::nn
