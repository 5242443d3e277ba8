#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vmr/media_io.hpp"

namespace vmr::corpus {

inline constexpr int kMaxSeconds = 28;

using Pcm = std::vector<std::int16_t>;

struct MediaPair {
  std::string pair_id;
  std::string music_id;
  std::vector<GrayFrame> video;  // 1 frame per second
  std::shared_ptr<const Pcm> music;
  std::vector<std::string> tags;

  int seconds() const { return static_cast<int>(video.size()); }
  bool operator==(const MediaPair& o) const;
};

class Corpus {
 public:
  Corpus() = default;
  // Validates every invariant; throws ValidationError otherwise.
  explicit Corpus(std::vector<MediaPair> pairs);

  const std::vector<MediaPair>& pairs() const { return pairs_; }
  const std::map<std::string, std::vector<std::string>>& music_index() const { return music_index_; }
  // Number of distinct music tracks.
  std::size_t music_count() const { return music_index_.size(); }
  const MediaPair& pair(const std::string& pair_id) const;

  bool operator==(const Corpus& o) const { return pairs_ == o.pairs_; }

 private:
  std::vector<MediaPair> pairs_;
  std::map<std::string, std::vector<std::string>> music_index_;
  std::map<std::string, std::size_t> by_id_;
};

// Cuts both streams to min(video seconds, whole music seconds, 28).
void trim_pair(MediaPair& pair);

// Manifest (JSON): {"pairs": [{"pair_id", "music_id", "video_path",
// "audio_path", "tags": [...]}, ...]}; paths are relative to root.
Corpus load_corpus(const std::filesystem::path& root, const std::filesystem::path& manifest);
// Writes media files under root plus manifest.json; returns the manifest path.
std::filesystem::path save_corpus(const Corpus& corpus, const std::filesystem::path& root);

struct SynthSpec {
  int music_count = 8;
  int videos_per_music = 4;
  int genres = 3;            // distinct genre tags / audio-visual styles
  int generic_tags = 4;      // ubiquitous hashtags sprinkled on every video
  int min_seconds = 12;
  int max_seconds = 20;
  int extra_video_seconds = 2;  // videos may run longer than their music (trimmed on build)
  bool rhythm_correlated = true;
  double tempo_min_bpm = 60.0;
  double tempo_max_bpm = 150.0;
  // One clip per track switches to a different genre when the track has
  // at least two clips, giving each track a temporal signature.
  bool odd_clip = true;
};

// Per-track ground truth the generator planted; returned for tests.
struct SynthTrack {
  std::string music_id;
  double tempo_bpm = 0.0;
  double speed_px = 0.0;              // block displacement per frame in paired videos
  std::vector<int> clip_genres;       // genre per 4-s clip
};

struct SynthResult {
  Corpus corpus;
  std::vector<SynthTrack> tracks;
};

SynthResult synth_corpus_detailed(const SynthSpec& spec, std::uint64_t seed);
Corpus synth_corpus(const SynthSpec& spec, std::uint64_t seed);

// Monotone tempo -> pixels/frame mapping used by the generator.
double speed_for_tempo(double bpm, const SynthSpec& spec);

// Building blocks shared with signal-level tests.
// Click track: a short decaying noise burst on every beat, beats at
// phase + k * 60 / bpm seconds.
Pcm click_track(double bpm, double seconds, double phase_s, double amplitude = 0.6, std::uint64_t seed = 1);
// 224x224 frames with a textured block translating `speed` px/frame to the
// right over a static textured background.
std::vector<GrayFrame> moving_block_video(int frames, double speed, std::uint64_t seed);

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;
};

struct Split {
  Corpus train;
  Corpus val;
  Corpus test;
};

// Partitions by music_id so a track never straddles splits.
Split split_corpus(const Corpus& corpus, const SplitSpec& spec);

}  // namespace vmr::corpus
