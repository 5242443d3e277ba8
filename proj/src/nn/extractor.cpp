#include "vmr/nn/extractor.hpp"

#include <algorithm>

#include "vmr/error.hpp"

namespace vmr::nn {
namespace {

constexpr Index kVideoRows = 896;
constexpr Index kVideoCols = 224;
constexpr Index kPool = 4;
constexpr Index kVideoRowsPerToken = 8;
constexpr Index kFbankFrames = 398;
constexpr Index kFbankBins = 80;
constexpr Index kFramesPerToken = 8;
constexpr Index kMaxTokens = 64;

}  // namespace

const char* modality_name(Modality m) { return m == Modality::kVideo ? "video" : "music"; }

Index token_dim(Modality m) {
  return m == Modality::kVideo ? kVideoRowsPerToken * (kVideoCols / kPool) : kFramesPerToken * kFbankBins;
}

Matrix video_clip_tokens(const Matrix& clip) {
  if (clip.rows() != kVideoRows || clip.cols() != kVideoCols) {
    throw ContractError("video clip must be 896x224");
  }
  const Index pr = kVideoRows / kPool;
  const Index pc = kVideoCols / kPool;
  Matrix pooled(pr, pc);
  for (Index r = 0; r < pr; ++r) {
    for (Index c = 0; c < pc; ++c) {
      pooled(r, c) = clip.block(r * kPool, c * kPool, kPool, kPool).mean() * 2.0 - 1.0;
    }
  }
  const Index n = pr / kVideoRowsPerToken;
  Matrix tokens(n, kVideoRowsPerToken * pc);
  for (Index t = 0; t < n; ++t) {
    for (Index k = 0; k < kVideoRowsPerToken; ++k) {
      tokens.block(t, k * pc, 1, pc) = pooled.row(t * kVideoRowsPerToken + k);
    }
  }
  return tokens;
}

Matrix music_clip_tokens(const Matrix& fbank) {
  if (fbank.rows() != kFbankFrames || fbank.cols() != kFbankBins) {
    throw ContractError("music clip must be 398x80");
  }
  const Index n = (kFbankFrames + kFramesPerToken - 1) / kFramesPerToken;
  Matrix tokens(n, kFramesPerToken * kFbankBins);
  for (Index t = 0; t < n; ++t) {
    const Index start = std::min(t * kFramesPerToken, kFbankFrames - kFramesPerToken);
    for (Index k = 0; k < kFramesPerToken; ++k) {
      tokens.block(t, k * kFbankBins, 1, kFbankBins) =
          ((fbank.row(start + k).array() + 5.0) / 10.0).matrix();
    }
  }
  return tokens;
}

ClipExtractor::ClipExtractor(Modality modality, const ExtractorConfig& cfg, Rng& rng)
    : modality_(modality), cfg_(cfg) {
  if (cfg.num_classes < 2) throw ValidationError("extractor needs at least 2 classes");
  in_proj_ = Linear(token_dim(modality), cfg.model_dim, rng);
  for (int b = 0; b < cfg.blocks; ++b) {
    blocks_.emplace_back(cfg.model_dim, cfg.heads, cfg.ffn_dim, cfg.conv_kernel, rng);
  }
  head_ = Linear(cfg.model_dim, cfg.embed_dim, rng);
  classifier_ = Linear(cfg.embed_dim, cfg.num_classes, rng);
  positions_ = sinusoidal_positions(kMaxTokens, cfg.model_dim);
}

ClipExtractor::Output ClipExtractor::forward(const Tensor& tokens, const Segments& segs) const {
  if (tokens.cols() != in_proj_.in_dim()) {
    throw ContractError(std::string(modality_name(modality_)) + " extractor: expected token width " +
                        std::to_string(in_proj_.in_dim()) + ", got " + std::to_string(tokens.cols()));
  }
  Matrix pos(tokens.rows(), cfg_.model_dim);
  for (const auto& s : segs) {
    if (s.length > kMaxTokens) throw ContractError("extractor: clip has too many tokens");
    pos.middleRows(s.start, s.length) = positions_.topRows(s.length);
  }
  Tensor h = add(in_proj_(tokens), constant(std::move(pos)));
  for (const auto& b : blocks_) h = b(h, segs);
  Tensor f = head_(segment_mean(h, segs));
  return {f, classifier_(f)};
}

Matrix ClipExtractor::embed(const std::vector<const Matrix*>& clips, std::size_t chunk) const {
  NoGradGuard no_grad;
  Matrix out(static_cast<Index>(clips.size()), cfg_.embed_dim);
  for (std::size_t i = 0; i < clips.size(); i += chunk) {
    const std::size_t n = std::min(chunk, clips.size() - i);
    std::vector<const Matrix*> part(clips.begin() + static_cast<std::ptrdiff_t>(i),
                                    clips.begin() + static_cast<std::ptrdiff_t>(i + n));
    auto [tokens, segs] = stack_clips(part);
    Output o = forward(constant(std::move(tokens)), segs);
    out.middleRows(static_cast<Index>(i), static_cast<Index>(n)) = o.embedding.value();
  }
  return out;
}

ParamList ClipExtractor::params(const std::string& prefix) const {
  ParamList out;
  append_params(out, prefix + "in_proj.", in_proj_.params(""));
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    append_params(out, prefix + "block" + std::to_string(b) + ".", blocks_[b].params(""));
  }
  append_params(out, prefix + "head.", head_.params(""));
  append_params(out, prefix + "classifier.", classifier_.params(""));
  return out;
}

std::pair<Matrix, Segments> stack_clips(const std::vector<const Matrix*>& clips) {
  Index rows = 0;
  Index cols = clips.empty() ? 0 : clips.front()->cols();
  Segments segs;
  for (const Matrix* c : clips) {
    if (c->cols() != cols) throw ContractError("stack_clips: token width mismatch");
    segs.push_back({rows, c->rows()});
    rows += c->rows();
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < clips.size(); ++i) out.middleRows(segs[i].start, segs[i].length) = *clips[i];
  return {std::move(out), std::move(segs)};
}

}  // namespace vmr::nn
