#include "vmr/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include <nlohmann/json.hpp>

#include "vmr/error.hpp"
#include "vmr/rng.hpp"

namespace vmr::corpus {
namespace {

constexpr int kFrameSize = 224;

const std::vector<std::string>& genre_names() {
  static const std::vector<std::string> names = {"jazz", "rock", "edm",   "folk",  "lofi",  "metal",
                                                 "pop",  "soul", "funk",  "blues", "house", "indie"};
  return names;
}

const std::vector<std::string>& generic_names() {
  static const std::vector<std::string> names = {"fyp", "viral", "trending", "foryou", "daily", "vlog", "music", "mood"};
  return names;
}

std::string genre_tag(int g) {
  const auto& n = genre_names();
  return g < static_cast<int>(n.size()) ? n[static_cast<std::size_t>(g)] : "genre" + std::to_string(g);
}

std::string generic_tag(int g) {
  const auto& n = generic_names();
  return g < static_cast<int>(n.size()) ? n[static_cast<std::size_t>(g)] : "tag" + std::to_string(g);
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

std::int16_t to_i16(double v) {
  return static_cast<std::int16_t>(std::clamp(std::lround(v * 32767.0), -32767L, 32767L));
}

void validate_pair(const MediaPair& p) {
  if (p.pair_id.empty()) throw ValidationError("pair with empty pair_id");
  if (p.music_id.empty()) throw ValidationError("pair " + p.pair_id + ": empty music_id");
  if (p.video.empty()) throw ValidationError("pair " + p.pair_id + ": zero-length video");
  if (!p.music || p.music->empty()) throw ValidationError("pair " + p.pair_id + ": zero-length music");
  if (p.tags.empty()) throw ValidationError("pair " + p.pair_id + ": empty tag list");
  for (const auto& t : p.tags) {
    if (t.empty()) throw ValidationError("pair " + p.pair_id + ": empty tag string");
  }
  const auto& f0 = p.video.front();
  if (f0.height < 1 || f0.width < 1) throw ValidationError("pair " + p.pair_id + ": empty frame");
  for (const auto& f : p.video) {
    if (f.height != f0.height || f.width != f0.width ||
        f.pixels.size() != static_cast<std::size_t>(f.height) * static_cast<std::size_t>(f.width)) {
      throw ValidationError("pair " + p.pair_id + ": inconsistent frame geometry");
    }
  }
  if (p.music->size() != static_cast<std::size_t>(p.seconds()) * kSampleRate) {
    throw ValidationError("pair " + p.pair_id + ": video and music lengths differ after trimming");
  }
  if (p.seconds() > kMaxSeconds) throw ValidationError("pair " + p.pair_id + ": longer than 28 s");
}

}  // namespace

bool MediaPair::operator==(const MediaPair& o) const {
  const bool same_music = (music == o.music) || (music && o.music && *music == *o.music);
  return pair_id == o.pair_id && music_id == o.music_id && video == o.video && same_music && tags == o.tags;
}

Corpus::Corpus(std::vector<MediaPair> pairs) : pairs_(std::move(pairs)) {
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    const auto& p = pairs_[i];
    validate_pair(p);
    if (!by_id_.emplace(p.pair_id, i).second) throw ValidationError("duplicate pair_id " + p.pair_id);
    music_index_[p.music_id].push_back(p.pair_id);
  }
}

const MediaPair& Corpus::pair(const std::string& pair_id) const {
  auto it = by_id_.find(pair_id);
  if (it == by_id_.end()) throw DomainError("unknown pair_id " + pair_id);
  return pairs_[it->second];
}

void trim_pair(MediaPair& pair) {
  const int music_seconds = pair.music ? static_cast<int>(pair.music->size() / kSampleRate) : 0;
  const int secs = std::min({static_cast<int>(pair.video.size()), music_seconds, kMaxSeconds});
  if (secs <= 0) {
    throw ValidationError("pair " + pair.pair_id + ": zero-length media after trimming");
  }
  pair.video.resize(static_cast<std::size_t>(secs));
  const std::size_t n = static_cast<std::size_t>(secs) * kSampleRate;
  if (pair.music->size() != n) {
    pair.music = std::make_shared<const Pcm>(pair.music->begin(), pair.music->begin() + static_cast<std::ptrdiff_t>(n));
  }
}

Corpus load_corpus(const std::filesystem::path& root, const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw LoadError(manifest.string(), "cannot open manifest");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(manifest.string(), std::string("malformed manifest (") + e.what() + ")");
  }
  if (!j.contains("pairs") || !j["pairs"].is_array()) {
    throw ValidationError("manifest must hold a \"pairs\" array");
  }
  std::map<std::filesystem::path, std::shared_ptr<const Pcm>> audio_cache;
  std::vector<MediaPair> pairs;
  for (const auto& e : j["pairs"]) {
    for (const char* key : {"pair_id", "music_id", "video_path", "audio_path", "tags"}) {
      if (!e.contains(key)) throw ValidationError(std::string("manifest entry missing key '") + key + "'");
    }
    MediaPair p;
    p.pair_id = e["pair_id"].get<std::string>();
    p.music_id = e["music_id"].get<std::string>();
    p.tags = e["tags"].get<std::vector<std::string>>();
    if (p.tags.empty()) throw ValidationError("pair " + p.pair_id + ": empty tag list");
    const auto vpath = root / e["video_path"].get<std::string>();
    const auto apath = root / e["audio_path"].get<std::string>();
    if (!std::filesystem::exists(vpath)) throw LoadError(vpath.string(), "missing video file");
    if (!std::filesystem::exists(apath)) throw LoadError(apath.string(), "missing audio file");
    p.video = read_video(vpath);
    auto it = audio_cache.find(apath);
    if (it == audio_cache.end()) it = audio_cache.emplace(apath, std::make_shared<const Pcm>(read_wav(apath))).first;
    p.music = it->second;
    if (p.video.empty()) throw ValidationError("pair " + p.pair_id + ": zero-length video");
    if (p.music->empty()) throw ValidationError("pair " + p.pair_id + ": zero-length music");
    trim_pair(p);
    pairs.push_back(std::move(p));
  }
  return Corpus(std::move(pairs));
}

std::filesystem::path save_corpus(const Corpus& corpus, const std::filesystem::path& root) {
  std::filesystem::create_directories(root / "video");
  std::filesystem::create_directories(root / "audio");
  std::map<std::string, const Pcm*> written;
  nlohmann::json j;
  j["pairs"] = nlohmann::json::array();
  for (const auto& p : corpus.pairs()) {
    const std::string vrel = "video/" + p.pair_id + ".utvf";
    write_video(root / vrel, p.video);
    std::string arel = "audio/" + p.music_id + ".wav";
    auto it = written.find(p.music_id);
    if (it == written.end()) {
      write_wav(root / arel, *p.music);
      written.emplace(p.music_id, p.music.get());
    } else if (*it->second != *p.music) {
      arel = "audio/" + p.music_id + "__" + p.pair_id + ".wav";
      write_wav(root / arel, *p.music);
    }
    j["pairs"].push_back({{"pair_id", p.pair_id},
                          {"music_id", p.music_id},
                          {"video_path", vrel},
                          {"audio_path", arel},
                          {"tags", p.tags}});
  }
  const auto manifest = root / "manifest.json";
  std::ofstream os(manifest);
  os << j.dump(2) << '\n';
  return manifest;
}

double speed_for_tempo(double bpm, const SynthSpec& spec) {
  const double span = std::max(spec.tempo_max_bpm - spec.tempo_min_bpm, 1e-9);
  const double u = std::clamp((bpm - spec.tempo_min_bpm) / span, 0.0, 1.0);
  return 1.0 + 6.0 * u;
}

Pcm click_track(double bpm, double seconds, double phase_s, double amplitude, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(std::lround(seconds * kSampleRate));
  std::vector<double> x(n, 0.0);
  Rng rng(derive_seed(seed, "click"));
  const double period = 60.0 / bpm;
  for (double t = phase_s; t < seconds; t += period) {
    const auto start = static_cast<std::size_t>(std::lround(t * kSampleRate));
    for (std::size_t k = 0; k < 160 && start + k < n; ++k) {
      x[start + k] += amplitude * std::exp(-static_cast<double>(k) / 30.0) * rng.uniform(-1.0, 1.0);
    }
  }
  Pcm out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = to_i16(x[i]);
  return out;
}

std::vector<GrayFrame> moving_block_video(int frames, double speed, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "moving-block"));
  std::vector<double> bg(kFrameSize * kFrameSize);
  for (auto& v : bg) v = 40.0 + 60.0 * rng.uniform();
  constexpr int kBlock = 64;
  std::vector<double> tex(kBlock * kBlock);
  for (auto& v : tex) v = 150.0 + 100.0 * rng.uniform();
  const int y0 = 80;
  const double x0 = 20.0;
  std::vector<GrayFrame> out;
  for (int f = 0; f < frames; ++f) {
    GrayFrame fr{kFrameSize, kFrameSize, {}};
    fr.pixels.resize(kFrameSize * kFrameSize);
    for (int i = 0; i < kFrameSize * kFrameSize; ++i) fr.pixels[static_cast<std::size_t>(i)] = to_u8(bg[static_cast<std::size_t>(i)]);
    const int xs = static_cast<int>(std::lround(x0 + speed * f));
    for (int r = 0; r < kBlock; ++r) {
      for (int c = 0; c < kBlock; ++c) {
        const int x = ((xs + c) % kFrameSize + kFrameSize) % kFrameSize;
        fr.pixels[static_cast<std::size_t>((y0 + r) * kFrameSize + x)] = to_u8(tex[static_cast<std::size_t>(r * kBlock + c)]);
      }
    }
    out.push_back(std::move(fr));
  }
  return out;
}

namespace {

struct TrackPlan {
  SynthTrack truth;
  int seconds = 0;
  int genre = 0;
  std::shared_ptr<const Pcm> music;
};

std::shared_ptr<const Pcm> synth_music(const TrackPlan& plan, const SynthSpec& spec, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(plan.seconds) * kSampleRate;
  std::vector<double> x(n, 0.0);
  Rng rng(derive_seed(seed, "music-bed"));
  // Tonal bed: a triad whose root depends on the clip's genre, spread over
  // three octaves; 40 ms raised-cosine cross-fades between clips.
  const double ratios[3] = {1.0, 1.2599, 1.4983};
  const int fade = kSampleRate / 25;
  const std::size_t clip_len = 4 * kSampleRate;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    const std::size_t clip = i / clip_len;
    const std::size_t pos = i % clip_len;
    auto bed = [&](int g) {
      const double root = 130.8 * std::pow(2.0, 3.0 * g / std::max(spec.genres, 1));
      double s = 0.0;
      for (double r : ratios) s += std::sin(2.0 * std::numbers::pi * root * r * t);
      return 0.06 * s;
    };
    const int g = plan.truth.clip_genres[clip];
    double v = bed(g);
    if (clip > 0 && pos < static_cast<std::size_t>(fade)) {
      const int gp = plan.truth.clip_genres[clip - 1];
      if (gp != g) {
        const double w = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(pos) / fade);
        v = w * v + (1.0 - w) * bed(gp);
      }
    }
    x[i] = v + rng.normal(0.0, 0.002);
  }
  const double period = 60.0 / plan.truth.tempo_bpm;
  const Pcm clicks = click_track(plan.truth.tempo_bpm, plan.seconds, period / 2.0, 0.6, derive_seed(seed, "clicks"));
  Pcm out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = to_i16(x[i] + clicks[i] / 32767.0);
  return std::make_shared<const Pcm>(std::move(out));
}

std::vector<GrayFrame> synth_video(const TrackPlan& plan, const SynthSpec& spec, int frames, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "video"));
  std::vector<double> bg(kFrameSize * kFrameSize);
  for (auto& v : bg) v = 50.0 + 40.0 * rng.uniform();
  constexpr int kBlock = 48;
  constexpr int kBlocks = 2;
  std::vector<std::vector<double>> tex(kBlocks, std::vector<double>(kBlock * kBlock));
  for (auto& t : tex) {
    for (auto& v : t) v = 150.0 + 100.0 * rng.uniform();
  }
  const int y0[kBlocks] = {static_cast<int>(16 + rng.index(64)), static_cast<int>(120 + rng.index(50))};
  const double x0[kBlocks] = {rng.uniform(0, kFrameSize), rng.uniform(0, kFrameSize)};
  const double phase = rng.uniform(0, 2.0 * std::numbers::pi);
  const double period = 12.0;
  std::vector<GrayFrame> out;
  for (int f = 0; f < frames; ++f) {
    const std::size_t clip = std::min(static_cast<std::size_t>(f / 4), plan.truth.clip_genres.size() - 1);
    const int g = plan.truth.clip_genres[clip];
    const double theta = std::numbers::pi * g / std::max(spec.genres, 1);
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    std::vector<double> img(kFrameSize * kFrameSize);
    for (int r = 0; r < kFrameSize; ++r) {
      for (int c = 0; c < kFrameSize; ++c) {
        const double stripe = std::sin(2.0 * std::numbers::pi * (c * ct + r * st) / period + phase);
        img[static_cast<std::size_t>(r * kFrameSize + c)] = bg[static_cast<std::size_t>(r * kFrameSize + c)] + 45.0 * stripe;
      }
    }
    for (int b = 0; b < kBlocks; ++b) {
      const int xs = static_cast<int>(std::lround(x0[b] + plan.truth.speed_px * f));
      for (int r = 0; r < kBlock; ++r) {
        for (int c = 0; c < kBlock; ++c) {
          const int x = ((xs + c) % kFrameSize + kFrameSize) % kFrameSize;
          img[static_cast<std::size_t>((y0[b] + r) * kFrameSize + x)] = tex[static_cast<std::size_t>(b)][static_cast<std::size_t>(r * kBlock + c)];
        }
      }
    }
    GrayFrame fr{kFrameSize, kFrameSize, std::vector<std::uint8_t>(kFrameSize * kFrameSize)};
    for (std::size_t i = 0; i < img.size(); ++i) fr.pixels[i] = to_u8(img[i] + rng.uniform(-2.0, 2.0));
    out.push_back(std::move(fr));
  }
  return out;
}

}  // namespace

SynthResult synth_corpus_detailed(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.music_count <= 0 || spec.videos_per_music <= 0) throw ValidationError("synth: counts must be positive");
  if (spec.genres <= 0) throw ValidationError("synth: genre count must be positive");
  if (spec.generic_tags < 0) throw ValidationError("synth: generic tag count must be non-negative");
  if (spec.min_seconds <= 0 || spec.max_seconds < spec.min_seconds || spec.max_seconds > kMaxSeconds) {
    throw ValidationError("synth: need 0 < min_seconds <= max_seconds <= 28");
  }
  if (spec.tempo_min_bpm <= 0 || spec.tempo_max_bpm < spec.tempo_min_bpm) {
    throw ValidationError("synth: invalid tempo range");
  }
  Rng rng(derive_seed(seed, "synth-plan"));
  std::vector<TrackPlan> plans;
  for (int m = 0; m < spec.music_count; ++m) {
    TrackPlan p;
    char id[32];
    std::snprintf(id, sizeof id, "m%04d", m);
    p.truth.music_id = id;
    p.seconds = spec.min_seconds + static_cast<int>(rng.index(static_cast<std::size_t>(spec.max_seconds - spec.min_seconds + 1)));
    p.genre = static_cast<int>(rng.index(static_cast<std::size_t>(spec.genres)));
    p.truth.tempo_bpm = rng.uniform(spec.tempo_min_bpm, spec.tempo_max_bpm);
    p.truth.speed_px = spec.rhythm_correlated ? speed_for_tempo(p.truth.tempo_bpm, spec) : rng.uniform(1.0, 7.0);
    const int clips = (p.seconds + 3) / 4;
    p.truth.clip_genres.assign(static_cast<std::size_t>(clips), p.genre);
    if (spec.odd_clip && clips >= 2 && spec.genres >= 2) {
      const std::size_t pos = rng.index(static_cast<std::size_t>(clips));
      const int shift = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(spec.genres - 1)));
      p.truth.clip_genres[pos] = (p.genre + shift) % spec.genres;
    }
    p.music = synth_music(p, spec, derive_seed(seed, "music/" + p.truth.music_id));
    plans.push_back(std::move(p));
  }

  std::vector<MediaPair> pairs;
  for (const auto& p : plans) {
    for (int v = 0; v < spec.videos_per_music; ++v) {
      MediaPair mp;
      char id[48];
      std::snprintf(id, sizeof id, "%s_v%02d", p.truth.music_id.c_str(), v);
      mp.pair_id = id;
      mp.music_id = p.truth.music_id;
      const int extra = spec.extra_video_seconds > 0
                            ? static_cast<int>(rng.index(static_cast<std::size_t>(spec.extra_video_seconds + 1)))
                            : 0;
      mp.video = synth_video(p, spec, p.seconds + extra, derive_seed(seed, "video/" + mp.pair_id));
      mp.music = p.music;
      mp.tags.push_back(genre_tag(p.genre));
      if (spec.generic_tags > 0) {
        const std::size_t k = 1 + rng.index(std::min<std::size_t>(2, static_cast<std::size_t>(spec.generic_tags)));
        std::set<int> chosen;
        while (chosen.size() < k) chosen.insert(static_cast<int>(rng.index(static_cast<std::size_t>(spec.generic_tags))));
        for (int g : chosen) mp.tags.push_back(generic_tag(g));
      }
      trim_pair(mp);
      pairs.push_back(std::move(mp));
    }
  }
  SynthResult out{Corpus(std::move(pairs)), {}};
  for (auto& p : plans) out.tracks.push_back(std::move(p.truth));
  return out;
}

Corpus synth_corpus(const SynthSpec& spec, std::uint64_t seed) { return synth_corpus_detailed(spec, seed).corpus; }

Split split_corpus(const Corpus& corpus, const SplitSpec& spec) {
  for (double r : {spec.train, spec.val, spec.test}) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("split ratios must lie in [0, 1]");
  }
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw ValidationError("split ratios must sum to 1");
  }
  if (corpus.music_count() < 3) throw ValidationError("split needs at least 3 distinct music tracks");
  std::vector<std::string> ids;
  for (const auto& [id, _] : corpus.music_index()) ids.push_back(id);
  Rng rng(derive_seed(spec.seed, "split"));
  rng.shuffle(ids);
  const std::size_t n = ids.size();
  const std::size_t n_train = std::min(n, static_cast<std::size_t>(std::llround(spec.train * static_cast<double>(n))));
  const std::size_t n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(spec.val * static_cast<double>(n))));
  std::map<std::string, int> where;
  for (std::size_t i = 0; i < n; ++i) where[ids[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
  std::vector<MediaPair> parts[3];
  for (const auto& p : corpus.pairs()) parts[where[p.music_id]].push_back(p);
  return {Corpus(std::move(parts[0])), Corpus(std::move(parts[1])), Corpus(std::move(parts[2]))};
}

}  // namespace vmr::corpus
