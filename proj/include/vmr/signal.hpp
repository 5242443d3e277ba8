#pragma once

#include <optional>
#include <span>
#include <vector>

#include "vmr/corpus.hpp"
#include "vmr/nn/tensor.hpp"

namespace vmr::signal {

using nn::Matrix;

inline constexpr int kClipSeconds = 4;
inline constexpr int kFrameSide = 224;
inline constexpr int kFramesPerClip = 4;
inline constexpr int kClipSamples = kClipSeconds * kSampleRate;  // 64000
inline constexpr int kWindow = 400;                               // 25 ms
inline constexpr int kHop = 160;                                  // 10 ms
inline constexpr int kFftSize = 512;
inline constexpr int kMelBins = 80;
inline constexpr double kMelLowHz = 0.0;
inline constexpr double kMelHighHz = 8000.0;
inline constexpr double kLogOffset = 1e-10;
inline constexpr int kFbankFrames = (kClipSamples - kWindow) / kHop + 1;  // 398

struct VideoClip {
  Matrix matrix;  // 896 x 224, four 224x224 frames stacked along rows, values in [0, 1]
  int index = 0;
  bool padded = false;
};

struct MusicClip {
  Matrix matrix;  // 398 x 80 log-mel filter bank
  int index = 0;
  bool padded = false;
};

struct RhythmStats {
  int n_beat = 0;
  double s_beat = 0.0;            // mean onset-envelope value at the beats
  std::optional<double> l_bar;    // mean inter-beat interval (s); empty when < 2 beats
};

struct FlowStat {
  double m_bar = 0.0;  // mean block displacement magnitude, px/frame
};

// ITU-R 601 luma weights.
double luminance(double r, double g, double b);

// Bilinear resize (half-pixel centres) to 224x224, scaled to [0, 1].
Matrix preprocess_frame(const GrayFrame& frame);

struct ChoppedPair {
  std::vector<VideoClip> video;
  std::vector<MusicClip> music;
  int clip_count = 0;
};

// ceil(seconds / 4) aligned clips. A short last video clip repeats its last
// frame; a short last music clip is zero-padded before the filter bank.
ChoppedPair chop_pair(const corpus::MediaPair& pair);

// Frames [4t, 4t+4) of the pair, last-frame padded, each 224x224.
std::vector<Matrix> clip_frames(const corpus::MediaPair& pair, int clip);
// The 64000-sample, zero-padded PCM window of clip t, scaled to [-1, 1).
std::vector<double> clip_pcm(const corpus::MediaPair& pair, int clip);
std::vector<double> to_unit(std::span<const std::int16_t> pcm);

// Log-mel spectrogram: Hann window 400, hop 160, FFT 512, 80 HTK-mel
// triangles over 0-8 kHz, log(x + 1e-10). Frames = (n - 400) / 160 + 1.
Matrix log_mel_spectrogram(std::span<const double> pcm);
// Exactly 64000 samples -> 398 x 80.
Matrix fbank(std::span<const double> clip_pcm);

// Centre frequencies (Hz) of the 80 mel filters and the filter weights at an
// arbitrary frequency.
std::vector<double> mel_centers();
double mel_weight(int filter, double hz);

// Half-wave rectified spectral flux of the log-mel spectrogram, summed over
// bins. Entry k describes time k * 10 ms and is taken from the analysis frame
// whose centre lies nearest that time; the first two entries are zero.
std::vector<double> onset_envelope(std::span<const double> pcm);

struct TempoRange {
  double min_bpm = 30.0;
  double max_bpm = 300.0;
};

struct Beats {
  std::vector<double> times;      // seconds, ascending
  std::vector<double> strengths;  // envelope value at each beat
};

// Autocorrelation tempo estimate (log-normal prior around 120 BPM) followed by
// dynamic-programming beat alignment with a log-interval penalty; weak beats at
// either end are trimmed.
Beats track_beats(std::span<const double> envelope, TempoRange range = {});
double estimate_period_frames(std::span<const double> envelope, TempoRange range = {});

RhythmStats rhythm_stats(std::span<const double> beat_times, std::span<const double> beat_strengths,
                         double span_start, double span_end);

struct BlockMatchConfig {
  int block = 16;
  int search = 8;
};

struct BlockVector {
  int row = 0;  // top-left of the block in the first frame
  int col = 0;
  int dy = 0;
  int dx = 0;
};

// Exhaustive block matching from `from` to `to`: minimum SAD over the search
// window; ties prefer the smaller displacement.
std::vector<BlockVector> block_flow(const Matrix& from, const Matrix& to, BlockMatchConfig cfg = {});
FlowStat optical_flow_stat(std::span<const Matrix> frames, BlockMatchConfig cfg = {});
FlowStat optical_flow_stat(const VideoClip& clip, BlockMatchConfig cfg = {});

// Beats are tracked once over the whole (trimmed) track and bucketed into
// 4-s clips.
std::vector<RhythmStats> track_rhythm(const corpus::MediaPair& pair, TempoRange range = {});
std::vector<FlowStat> track_flow(const corpus::MediaPair& pair, BlockMatchConfig cfg = {});

}  // namespace vmr::signal
