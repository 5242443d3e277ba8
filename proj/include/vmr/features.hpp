#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "vmr/corpus.hpp"
#include "vmr/nn/extractor.hpp"
#include "vmr/signal.hpp"

namespace vmr::features {

using nn::Matrix;

struct SignalOptions {
  signal::TempoRange tempo;
  signal::BlockMatchConfig flow;
};

// Model-free per-track audio data; shared by every pair that uses the track
// with the same trimmed length.
struct MusicSignals {
  std::vector<Matrix> tokens;                 // per clip, 50 x 640
  std::vector<signal::RhythmStats> rhythm;    // per clip
};

struct PairSignals {
  std::string pair_id;
  std::string music_id;
  int clip_count = 0;
  std::vector<Matrix> video_tokens;           // per clip, 28 x 448
  std::vector<signal::FlowStat> flow;         // per clip
  std::shared_ptr<const MusicSignals> music;
};

// Filter banks, frame stacks, beats and block flow for every pair.
std::vector<PairSignals> compute_signals(const corpus::Corpus& corpus, const SignalOptions& opts = {});

struct PairFeatures {
  std::string pair_id;
  std::string music_id;
  Matrix video;        // T x 512 clip embeddings, temporal order
  Matrix music;        // T x 512
  Matrix video_track;  // 1 x 512 track-level average embedding (AE)
  Matrix music_track;  // 1 x 512
  std::vector<signal::RhythmStats> rhythm;
  std::vector<signal::FlowStat> flow;

  int clips() const { return static_cast<int>(video.rows()); }
  bool operator==(const PairFeatures&) const = default;
};

struct ExtractorPair {
  nn::ClipExtractor video;
  nn::ClipExtractor music;
};

// Clip embeddings from the trained extractors; the track-level vectors are
// the clip means of the `track` extractors.
std::vector<PairFeatures> extract_features(const std::vector<PairSignals>& signals, const ExtractorPair& clip,
                                           const ExtractorPair& track);

void save_features(const std::filesystem::path& path, const std::vector<PairFeatures>& features);
std::vector<PairFeatures> load_features(const std::filesystem::path& path);

// Subset by music_id membership, preserving order.
std::vector<PairFeatures> select(const std::vector<PairFeatures>& all, const corpus::Corpus& part);

}  // namespace vmr::features
