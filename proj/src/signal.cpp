#include "vmr/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "vmr/error.hpp"

namespace vmr::signal {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

const std::vector<double>& mel_edges() {
  static const std::vector<double> edges = [] {
    std::vector<double> e(kMelBins + 2);
    const double lo = hz_to_mel(kMelLowHz);
    const double hi = hz_to_mel(kMelHighHz);
    for (int i = 0; i < kMelBins + 2; ++i) e[static_cast<std::size_t>(i)] = mel_to_hz(lo + (hi - lo) * i / (kMelBins + 1));
    return e;
  }();
  return edges;
}

constexpr int kSpecBins = kFftSize / 2 + 1;

const Matrix& mel_matrix() {
  static const Matrix fb = [] {
    Matrix m = Matrix::Zero(kSpecBins, kMelBins);
    for (int k = 0; k < kSpecBins; ++k) {
      const double hz = static_cast<double>(k) * kSampleRate / kFftSize;
      for (int f = 0; f < kMelBins; ++f) m(k, f) = mel_weight(f, hz);
    }
    return m;
  }();
  return fb;
}

const std::vector<double>& hann() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kWindow);
    for (int n = 0; n < kWindow; ++n) v[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / kWindow);
    return v;
  }();
  return w;
}

// One reusable r2c plan; the library is single-threaded here.
class Fft {
 public:
  Fft() {
    in_ = fftw_alloc_real(kFftSize);
    out_ = fftw_alloc_complex(kSpecBins);
    plan_ = fftw_plan_dft_r2c_1d(kFftSize, in_, out_, FFTW_ESTIMATE);
  }
  ~Fft() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  double* input() { return in_; }
  void run() { fftw_execute(plan_); }
  double power(int k) const { return out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1]; }

 private:
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_{};
};

Fft& fft() {
  static Fft f;
  return f;
}

}  // namespace

double luminance(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

Matrix preprocess_frame(const GrayFrame& frame) {
  if (frame.height <= 0 || frame.width <= 0 ||
      frame.pixels.size() != static_cast<std::size_t>(frame.height) * static_cast<std::size_t>(frame.width)) {
    throw ContractError("preprocess_frame: malformed frame");
  }
  Matrix out(kFrameSide, kFrameSide);
  const double sy = static_cast<double>(frame.height) / kFrameSide;
  const double sx = static_cast<double>(frame.width) / kFrameSide;
  std::vector<int> x0(kFrameSide), x1(kFrameSide);
  std::vector<double> wx(kFrameSide);
  for (int c = 0; c < kFrameSide; ++c) {
    const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, static_cast<double>(frame.width - 1));
    x0[c] = static_cast<int>(std::floor(x));
    x1[c] = std::min(x0[c] + 1, frame.width - 1);
    wx[c] = x - x0[c];
  }
  for (int r = 0; r < kFrameSide; ++r) {
    const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(frame.height - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int y1 = std::min(y0 + 1, frame.height - 1);
    const double wy = y - y0;
    for (int c = 0; c < kFrameSide; ++c) {
      const double top = (1.0 - wx[c]) * frame.at(y0, x0[c]) + wx[c] * frame.at(y0, x1[c]);
      const double bot = (1.0 - wx[c]) * frame.at(y1, x0[c]) + wx[c] * frame.at(y1, x1[c]);
      out(r, c) = ((1.0 - wy) * top + wy * bot) / 255.0;
    }
  }
  return out;
}

std::vector<Matrix> clip_frames(const corpus::MediaPair& pair, int clip) {
  const int seconds = pair.seconds();
  if (clip < 0 || clip * kClipSeconds >= seconds) throw ContractError("clip_frames: clip index out of range");
  std::vector<Matrix> frames;
  for (int i = 0; i < kFramesPerClip; ++i) {
    const int f = std::min(clip * kClipSeconds + i, seconds - 1);
    frames.push_back(preprocess_frame(pair.video[static_cast<std::size_t>(f)]));
  }
  return frames;
}

std::vector<double> to_unit(std::span<const std::int16_t> pcm) {
  std::vector<double> out(pcm.size());
  for (std::size_t i = 0; i < pcm.size(); ++i) out[i] = pcm[i] / 32768.0;
  return out;
}

std::vector<double> clip_pcm(const corpus::MediaPair& pair, int clip) {
  if (!pair.music) throw ContractError("clip_pcm: pair has no audio");
  const auto& pcm = *pair.music;
  const std::size_t start = static_cast<std::size_t>(clip) * kClipSamples;
  if (clip < 0 || start >= pcm.size()) throw ContractError("clip_pcm: clip index out of range");
  std::vector<double> out(kClipSamples, 0.0);
  const std::size_t n = std::min<std::size_t>(kClipSamples, pcm.size() - start);
  for (std::size_t i = 0; i < n; ++i) out[i] = pcm[start + i] / 32768.0;
  return out;
}

ChoppedPair chop_pair(const corpus::MediaPair& pair) {
  ChoppedPair out;
  const int seconds = pair.seconds();
  if (seconds <= 0) throw ContractError("chop_pair: empty pair");
  if (!pair.music || pair.music->size() != static_cast<std::size_t>(seconds) * kSampleRate) {
    throw ContractError("chop_pair: streams are not trimmed to a common length");
  }
  out.clip_count = (seconds + kClipSeconds - 1) / kClipSeconds;
  for (int t = 0; t < out.clip_count; ++t) {
    const bool padded = (t + 1) * kClipSeconds > seconds;
    VideoClip v;
    v.matrix.resize(kFramesPerClip * kFrameSide, kFrameSide);
    const auto frames = clip_frames(pair, t);
    for (int i = 0; i < kFramesPerClip; ++i) v.matrix.middleRows(i * kFrameSide, kFrameSide) = frames[static_cast<std::size_t>(i)];
    v.index = t;
    v.padded = padded;
    out.video.push_back(std::move(v));
    const auto pcm = clip_pcm(pair, t);
    out.music.push_back(MusicClip{fbank(pcm), t, padded});
  }
  return out;
}

double mel_weight(int filter, double hz) {
  const auto& e = mel_edges();
  if (filter < 0 || filter >= kMelBins) throw ContractError("mel_weight: filter index out of range");
  const double lo = e[static_cast<std::size_t>(filter)];
  const double mid = e[static_cast<std::size_t>(filter) + 1];
  const double hi = e[static_cast<std::size_t>(filter) + 2];
  if (hz < lo || hz > hi) return 0.0;
  if (hz <= mid) return (hz - lo) / (mid - lo);
  return (hi - hz) / (hi - mid);
}

std::vector<double> mel_centers() {
  const auto& e = mel_edges();
  return {e.begin() + 1, e.end() - 1};
}

Matrix log_mel_spectrogram(std::span<const double> pcm) {
  const long frames = pcm.size() < static_cast<std::size_t>(kWindow)
                          ? 0
                          : static_cast<long>((pcm.size() - kWindow) / kHop + 1);
  Matrix power(frames, kSpecBins);
  auto& f = fft();
  const auto& w = hann();
  double* in = f.input();
  for (long t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * kHop;
    for (int n = 0; n < kWindow; ++n) in[n] = pcm[start + static_cast<std::size_t>(n)] * w[static_cast<std::size_t>(n)];
    for (int n = kWindow; n < kFftSize; ++n) in[n] = 0.0;
    f.run();
    for (int k = 0; k < kSpecBins; ++k) power(t, k) = f.power(k);
  }
  Matrix mel = power * mel_matrix();
  return (mel.array() + kLogOffset).log().matrix();
}

Matrix fbank(std::span<const double> clip_pcm) {
  if (clip_pcm.size() != static_cast<std::size_t>(kClipSamples)) {
    throw ContractError("fbank: a clip must hold exactly 64000 samples");
  }
  return log_mel_spectrogram(clip_pcm);
}

std::vector<double> onset_envelope(std::span<const double> pcm) {
  const Matrix s = log_mel_spectrogram(pcm);
  const long n = s.rows();
  std::vector<double> env(static_cast<std::size_t>(n), 0.0);
  for (long k = 2; k < n; ++k) {
    env[static_cast<std::size_t>(k)] = (s.row(k - 1) - s.row(k - 2)).cwiseMax(0.0).sum();
  }
  return env;
}

double estimate_period_frames(std::span<const double> envelope, TempoRange range) {
  if (!(range.min_bpm > 0.0) || range.max_bpm < range.min_bpm) throw ValidationError("tempo range is invalid");
  const double fps = static_cast<double>(kSampleRate) / kHop;
  const long n = static_cast<long>(envelope.size());
  const long lag_lo = std::max<long>(1, std::lround(60.0 * fps / range.max_bpm));
  const long lag_hi = std::min<long>(n - 1, std::lround(60.0 * fps / range.min_bpm));
  if (lag_hi < lag_lo) return 0.0;
  std::vector<double> score(static_cast<std::size_t>(lag_hi + 2), 0.0);
  for (long lag = std::max<long>(1, lag_lo - 1); lag <= std::min(n - 1, lag_hi + 1); ++lag) {
    double ac = 0.0;
    for (long t = 0; t + lag < n; ++t) ac += envelope[static_cast<std::size_t>(t)] * envelope[static_cast<std::size_t>(t + lag)];
    const double bpm = 60.0 * fps / static_cast<double>(lag);
    const double octaves = std::log2(bpm / 120.0);
    score[static_cast<std::size_t>(lag)] = ac * std::exp(-0.5 * octaves * octaves);
  }
  long best = lag_lo;
  for (long lag = lag_lo; lag <= lag_hi; ++lag) {
    if (score[static_cast<std::size_t>(lag)] > score[static_cast<std::size_t>(best)]) best = lag;
  }
  if (score[static_cast<std::size_t>(best)] <= 0.0) return 0.0;
  // Parabolic refinement between neighbouring lags.
  double period = static_cast<double>(best);
  if (best > 1 && best + 1 < static_cast<long>(score.size()) && best + 1 <= n - 1) {
    const double a = score[static_cast<std::size_t>(best - 1)];
    const double b = score[static_cast<std::size_t>(best)];
    const double c = score[static_cast<std::size_t>(best + 1)];
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) period += std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
  }
  return period;
}

Beats track_beats(std::span<const double> envelope, TempoRange range) {
  Beats out;
  const long n = static_cast<long>(envelope.size());
  if (n == 0) return out;
  const double peak = *std::max_element(envelope.begin(), envelope.end());
  if (!(peak > 0.0)) return out;
  const double period = estimate_period_frames(envelope, range);
  if (!(period > 0.0)) return out;

  double mean = std::accumulate(envelope.begin(), envelope.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double v : envelope) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  std::vector<double> local(envelope.begin(), envelope.end());
  if (sd > 0.0) {
    for (auto& v : local) v /= sd;
  }

  constexpr double kTightness = 100.0;
  std::vector<double> cum(static_cast<std::size_t>(n));
  std::vector<long> back(static_cast<std::size_t>(n), -1);
  const long reach_far = std::lround(2.0 * period);
  const long reach_near = std::max<long>(1, std::lround(period / 2.0));
  for (long t = 0; t < n; ++t) {
    double best = 0.0;
    long arg = -1;
    for (long tau = std::max<long>(0, t - reach_far); tau <= t - reach_near; ++tau) {
      const double r = std::log(static_cast<double>(t - tau) / period);
      const double cand = cum[static_cast<std::size_t>(tau)] - kTightness * r * r;
      if (arg < 0 || cand > best) {
        best = cand;
        arg = tau;
      }
    }
    // A chain that would only lose score starts afresh instead.
    if (arg >= 0 && best > 0.0) {
      cum[static_cast<std::size_t>(t)] = local[static_cast<std::size_t>(t)] + best;
      back[static_cast<std::size_t>(t)] = arg;
    } else {
      cum[static_cast<std::size_t>(t)] = local[static_cast<std::size_t>(t)];
    }
  }

  // Last beat: the latest local maximum of the cumulative score that reaches
  // half the median local maximum. Only interior frames count: the score
  // keeps rising into the end of the track even where there is no onset.
  std::vector<long> maxima;
  for (long t = 1; t + 1 < n; ++t) {
    const double c = cum[static_cast<std::size_t>(t)];
    if (c > cum[static_cast<std::size_t>(t - 1)] && c >= cum[static_cast<std::size_t>(t + 1)]) maxima.push_back(t);
  }
  if (maxima.empty()) return out;
  std::vector<double> vals;
  for (long t : maxima) vals.push_back(cum[static_cast<std::size_t>(t)]);
  std::nth_element(vals.begin(), vals.begin() + static_cast<long>(vals.size() / 2), vals.end());
  const double median = vals[vals.size() / 2];
  long last = maxima.back();
  for (auto it = maxima.rbegin(); it != maxima.rend(); ++it) {
    if (cum[static_cast<std::size_t>(*it)] >= 0.5 * median) {
      last = *it;
      break;
    }
  }

  std::vector<long> frames;
  for (long t = last; t >= 0; t = back[static_cast<std::size_t>(t)]) frames.push_back(t);
  std::reverse(frames.begin(), frames.end());

  double sq = 0.0;
  for (long t : frames) sq += envelope[static_cast<std::size_t>(t)] * envelope[static_cast<std::size_t>(t)];
  const double threshold = 0.5 * std::sqrt(sq / static_cast<double>(frames.size()));
  std::size_t lo = 0;
  std::size_t hi = frames.size();
  while (lo < hi && envelope[static_cast<std::size_t>(frames[lo])] < threshold) ++lo;
  while (hi > lo && envelope[static_cast<std::size_t>(frames[hi - 1])] < threshold) --hi;
  const double frame_seconds = static_cast<double>(kHop) / kSampleRate;
  for (std::size_t i = lo; i < hi; ++i) {
    out.times.push_back(static_cast<double>(frames[i]) * frame_seconds);
    out.strengths.push_back(envelope[static_cast<std::size_t>(frames[i])]);
  }
  return out;
}

RhythmStats rhythm_stats(std::span<const double> beat_times, std::span<const double> beat_strengths,
                         double span_start, double span_end) {
  if (beat_times.size() != beat_strengths.size()) throw ContractError("rhythm_stats: times and strengths differ in length");
  RhythmStats s;
  for (std::size_t i = 0; i < beat_times.size(); ++i) {
    if (i > 0 && beat_times[i] < beat_times[i - 1]) throw ContractError("rhythm_stats: beat times are not sorted");
    if (beat_times[i] < span_start || beat_times[i] >= span_end) throw ContractError("rhythm_stats: beat outside the clip span");
  }
  s.n_beat = static_cast<int>(beat_times.size());
  if (s.n_beat > 0) {
    s.s_beat = std::accumulate(beat_strengths.begin(), beat_strengths.end(), 0.0) / s.n_beat;
  }
  if (s.n_beat >= 2) s.l_bar = (beat_times.back() - beat_times.front()) / (s.n_beat - 1);
  return s;
}

std::vector<RhythmStats> track_rhythm(const corpus::MediaPair& pair, TempoRange range) {
  if (!pair.music) throw ContractError("track_rhythm: pair has no audio");
  const int seconds = pair.seconds();
  const int clips = (seconds + kClipSeconds - 1) / kClipSeconds;
  const auto pcm = to_unit(*pair.music);
  const auto beats = track_beats(onset_envelope(pcm), range);
  std::vector<RhythmStats> out;
  std::size_t i = 0;
  for (int t = 0; t < clips; ++t) {
    const double lo = t * kClipSeconds;
    const double hi = lo + kClipSeconds;
    const std::size_t start = i;
    while (i < beats.times.size() && beats.times[i] < hi) ++i;
    out.push_back(rhythm_stats(std::span(beats.times).subspan(start, i - start),
                               std::span(beats.strengths).subspan(start, i - start), lo, hi));
  }
  return out;
}

std::vector<BlockVector> block_flow(const Matrix& from, const Matrix& to, BlockMatchConfig cfg) {
  if (from.rows() != to.rows() || from.cols() != to.cols()) throw ContractError("block_flow: frame sizes differ");
  if (cfg.block <= 0 || cfg.search < 0) throw ValidationError("block_flow: invalid block or search size");
  const int h = static_cast<int>(from.rows());
  const int w = static_cast<int>(from.cols());
  struct Offset {
    int dy, dx;
  };
  std::vector<Offset> offsets;
  for (int dy = -cfg.search; dy <= cfg.search; ++dy) {
    for (int dx = -cfg.search; dx <= cfg.search; ++dx) offsets.push_back({dy, dx});
  }
  std::stable_sort(offsets.begin(), offsets.end(), [](const Offset& a, const Offset& b) {
    return a.dy * a.dy + a.dx * a.dx < b.dy * b.dy + b.dx * b.dx;
  });
  const int b = cfg.block;
  std::vector<BlockVector> out;
  for (int r = 0; r + b <= h; r += b) {
    for (int c = 0; c + b <= w; c += b) {
      double best = std::numeric_limits<double>::infinity();
      BlockVector v{r, c, 0, 0};
      for (const auto& o : offsets) {
        const int rr = r + o.dy;
        const int cc = c + o.dx;
        if (rr < 0 || cc < 0 || rr + b > h || cc + b > w) continue;
        double sad = 0.0;
        for (int i = 0; i < b && sad < best; ++i) {
          sad += (from.block(r + i, c, 1, b) - to.block(rr + i, cc, 1, b)).cwiseAbs().sum();
        }
        if (sad < best) {
          best = sad;
          v.dy = o.dy;
          v.dx = o.dx;
        }
      }
      out.push_back(v);
    }
  }
  return out;
}

FlowStat optical_flow_stat(std::span<const Matrix> frames, BlockMatchConfig cfg) {
  if (frames.size() < 2) throw ContractError("optical_flow_stat: need at least two frames");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    for (const auto& v : block_flow(frames[i], frames[i + 1], cfg)) {
      total += std::sqrt(static_cast<double>(v.dy * v.dy + v.dx * v.dx));
      ++count;
    }
  }
  return FlowStat{count ? total / static_cast<double>(count) : 0.0};
}

FlowStat optical_flow_stat(const VideoClip& clip, BlockMatchConfig cfg) {
  if (clip.matrix.rows() != kFramesPerClip * kFrameSide || clip.matrix.cols() != kFrameSide) {
    throw ContractError("optical_flow_stat: clip must be 896 x 224");
  }
  std::vector<Matrix> frames;
  for (int i = 0; i < kFramesPerClip; ++i) frames.push_back(clip.matrix.middleRows(i * kFrameSide, kFrameSide));
  return optical_flow_stat(frames, cfg);
}

std::vector<FlowStat> track_flow(const corpus::MediaPair& pair, BlockMatchConfig cfg) {
  const int clips = (pair.seconds() + kClipSeconds - 1) / kClipSeconds;
  std::vector<FlowStat> out;
  for (int t = 0; t < clips; ++t) {
    const auto frames = clip_frames(pair, t);
    out.push_back(optical_flow_stat(frames, cfg));
  }
  return out;
}

}  // namespace vmr::signal
