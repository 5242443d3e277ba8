#pragma once

#include <vector>

#include "vmr/nn/layers.hpp"

namespace vmr::nn {

enum class Modality { kVideo, kMusic };

const char* modality_name(Modality m);

struct ExtractorConfig {
  Index model_dim = 64;
  int heads = 4;
  Index ffn_dim = 128;
  Index conv_kernel = 7;
  int blocks = 2;
  Index embed_dim = 512;
  Index num_classes = 2;
};

// Fixed (parameter-free) subsampling of a 896x224 video clip: 4x4 average
// pooling, then groups of 8 pooled rows become one token. Output 28 x 448,
// centred to roughly [-1, 1].
Matrix video_clip_tokens(const Matrix& clip);
// Groups of 8 filter-bank frames become one token (the last group is aligned
// to the final frame). Output 50 x 640, affinely rescaled.
Matrix music_clip_tokens(const Matrix& fbank);

Index token_dim(Modality m);

// Small conformer-style clip encoder: token projection, sinusoidal positions,
// conformer blocks, mean pool, linear head to the clip embedding, and a
// classification head over the unified label set.
class ClipExtractor {
 public:
  ClipExtractor() = default;
  ClipExtractor(Modality modality, const ExtractorConfig& cfg, Rng& rng);

  struct Output {
    Tensor embedding;  // B x embed_dim
    Tensor logits;     // B x num_classes
  };

  // tokens: clips stacked row-wise, one segment per clip.
  Output forward(const Tensor& tokens, const Segments& segs) const;
  // Embeddings for a list of token matrices, processed in chunks.
  Matrix embed(const std::vector<const Matrix*>& clips, std::size_t chunk = 32) const;

  Modality modality() const { return modality_; }
  const ExtractorConfig& config() const { return cfg_; }
  ParamList params(const std::string& prefix) const;

 private:
  Modality modality_ = Modality::kVideo;
  ExtractorConfig cfg_;
  Linear in_proj_;
  std::vector<ConformerBlock> blocks_;
  Linear head_;
  Linear classifier_;
  Matrix positions_;
};

// Stacks token matrices and returns matching segments.
std::pair<Matrix, Segments> stack_clips(const std::vector<const Matrix*>& clips);

}  // namespace vmr::nn
