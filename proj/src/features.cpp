#include "vmr/features.hpp"

#include <map>
#include <set>

#include <json.hpp>

#include "vmr/error.hpp"
#include "vmr/tensor_io.hpp"

namespace vmr::features {

namespace {

std::shared_ptr<const MusicSignals> music_signals(const corpus::MediaPair& pair, const SignalOptions& opts) {
  auto out = std::make_shared<MusicSignals>();
  const int clips = (pair.seconds() + signal::kClipSeconds - 1) / signal::kClipSeconds;
  for (int t = 0; t < clips; ++t) {
    out->tokens.push_back(nn::music_clip_tokens(signal::fbank(signal::clip_pcm(pair, t))));
  }
  out->rhythm = signal::track_rhythm(pair, opts.tempo);
  return out;
}

nlohmann::json rhythm_json(const signal::RhythmStats& r) {
  nlohmann::json j = {{"n", r.n_beat}, {"s", r.s_beat}};
  j["l"] = r.l_bar ? nlohmann::json(*r.l_bar) : nlohmann::json(nullptr);
  return j;
}

signal::RhythmStats rhythm_from(const nlohmann::json& j) {
  signal::RhythmStats r;
  r.n_beat = j.at("n").get<int>();
  r.s_beat = j.at("s").get<double>();
  if (!j.at("l").is_null()) r.l_bar = j.at("l").get<double>();
  return r;
}

}  // namespace

std::vector<PairSignals> compute_signals(const corpus::Corpus& corpus, const SignalOptions& opts) {
  std::map<std::pair<std::string, int>, std::shared_ptr<const MusicSignals>> music_cache;
  std::vector<PairSignals> out;
  for (const auto& pair : corpus.pairs()) {
    PairSignals ps;
    ps.pair_id = pair.pair_id;
    ps.music_id = pair.music_id;
    ps.clip_count = (pair.seconds() + signal::kClipSeconds - 1) / signal::kClipSeconds;
    for (int t = 0; t < ps.clip_count; ++t) {
      const auto frames = signal::clip_frames(pair, t);
      Matrix stacked(signal::kFramesPerClip * signal::kFrameSide, signal::kFrameSide);
      for (int i = 0; i < signal::kFramesPerClip; ++i) {
        stacked.middleRows(i * signal::kFrameSide, signal::kFrameSide) = frames[static_cast<std::size_t>(i)];
      }
      ps.video_tokens.push_back(nn::video_clip_tokens(stacked));
      ps.flow.push_back(signal::optical_flow_stat(frames, opts.flow));
    }
    auto& cached = music_cache[{pair.music_id, pair.seconds()}];
    if (!cached) cached = music_signals(pair, opts);
    ps.music = cached;
    out.push_back(std::move(ps));
  }
  return out;
}

std::vector<PairFeatures> extract_features(const std::vector<PairSignals>& signals, const ExtractorPair& clip,
                                           const ExtractorPair& track) {
  std::map<const MusicSignals*, std::pair<Matrix, Matrix>> music_cache;
  std::vector<PairFeatures> out;
  for (const auto& ps : signals) {
    PairFeatures f;
    f.pair_id = ps.pair_id;
    f.music_id = ps.music_id;
    std::vector<const Matrix*> v;
    for (const auto& m : ps.video_tokens) v.push_back(&m);
    f.video = clip.video.embed(v);
    f.video_track = track.video.embed(v).colwise().mean();
    auto it = music_cache.find(ps.music.get());
    if (it == music_cache.end()) {
      std::vector<const Matrix*> a;
      for (const auto& m : ps.music->tokens) a.push_back(&m);
      it = music_cache.emplace(ps.music.get(), std::make_pair(clip.music.embed(a), Matrix(track.music.embed(a).colwise().mean()))).first;
    }
    f.music = it->second.first;
    f.music_track = it->second.second;
    f.rhythm = ps.music->rhythm;
    f.flow = ps.flow;
    if (f.video.rows() != f.music.rows() || static_cast<int>(f.flow.size()) != f.clips() ||
        static_cast<int>(f.rhythm.size()) != f.clips()) {
      throw ContractError("extract_features: clip counts disagree for " + f.pair_id);
    }
    out.push_back(std::move(f));
  }
  return out;
}

void save_features(const std::filesystem::path& path, const std::vector<PairFeatures>& features) {
  std::vector<tensor_io::Record> records;
  nlohmann::json meta = nlohmann::json::array();
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    nlohmann::json rhythm = nlohmann::json::array();
    for (const auto& r : f.rhythm) rhythm.push_back(rhythm_json(r));
    nlohmann::json flow = nlohmann::json::array();
    for (const auto& m : f.flow) flow.push_back(m.m_bar);
    meta.push_back({{"pair_id", f.pair_id}, {"music_id", f.music_id}, {"rhythm", rhythm}, {"flow", flow}});
    const std::string p = std::to_string(i) + ".";
    records.push_back(tensor_io::matrix_record(p + "video", f.video));
    records.push_back(tensor_io::matrix_record(p + "music", f.music));
    records.push_back(tensor_io::matrix_record(p + "video_track", f.video_track));
    records.push_back(tensor_io::matrix_record(p + "music_track", f.music_track));
  }
  records.insert(records.begin(), tensor_io::text_record("features.meta", meta.dump()));
  tensor_io::write_file(path, records);
}

std::vector<PairFeatures> load_features(const std::filesystem::path& path) {
  const auto records = tensor_io::read_file(path);
  const std::string src = path.string();
  const auto meta = nlohmann::json::parse(tensor_io::find(records, "features.meta", src).bytes);
  std::vector<PairFeatures> out;
  for (std::size_t i = 0; i < meta.size(); ++i) {
    const auto& m = meta[i];
    PairFeatures f;
    f.pair_id = m.at("pair_id").get<std::string>();
    f.music_id = m.at("music_id").get<std::string>();
    for (const auto& r : m.at("rhythm")) f.rhythm.push_back(rhythm_from(r));
    for (const auto& v : m.at("flow")) f.flow.push_back(signal::FlowStat{v.get<double>()});
    const std::string p = std::to_string(i) + ".";
    f.video = tensor_io::record_matrix(tensor_io::find(records, p + "video", src));
    f.music = tensor_io::record_matrix(tensor_io::find(records, p + "music", src));
    f.video_track = tensor_io::record_matrix(tensor_io::find(records, p + "video_track", src));
    f.music_track = tensor_io::record_matrix(tensor_io::find(records, p + "music_track", src));
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<PairFeatures> select(const std::vector<PairFeatures>& all, const corpus::Corpus& part) {
  std::set<std::string> ids;
  for (const auto& p : part.pairs()) ids.insert(p.pair_id);
  std::vector<PairFeatures> out;
  for (const auto& f : all) {
    if (ids.count(f.pair_id)) out.push_back(f);
  }
  return out;
}

}  // namespace vmr::features
