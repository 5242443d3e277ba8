#include "vmr/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include "vmr/error.hpp"

namespace vmr::config {

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError("config: " + where() + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw ValidationError("config: unknown key " + path_ + (path_.empty() ? "" : ".") + k);
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("config: " + name(key) + " has the wrong type");
    }
  }

  const nlohmann::json* child(const char* key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "top level" : path_; }
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void read_synth(const nlohmann::json& j, corpus::SynthSpec& s) {
  Section r(j, "corpus.synth");
  r.get("music_count", s.music_count);
  r.get("videos_per_music", s.videos_per_music);
  r.get("genres", s.genres);
  r.get("generic_tags", s.generic_tags);
  r.get("min_seconds", s.min_seconds);
  r.get("max_seconds", s.max_seconds);
  r.get("extra_video_seconds", s.extra_video_seconds);
  r.get("rhythm_correlated", s.rhythm_correlated);
  r.get("tempo_min_bpm", s.tempo_min_bpm);
  r.get("tempo_max_bpm", s.tempo_max_bpm);
  r.get("odd_clip", s.odd_clip);
}

void read_corpus(const nlohmann::json& j, CorpusSection& c) {
  Section r(j, "corpus");
  r.get("source", c.source);
  r.get("root", c.root);
  r.get("manifest", c.manifest);
  if (auto* s = r.child("synth")) read_synth(*s, c.synth);
  if (auto* s = r.child("split")) {
    Section sp(*s, "corpus.split");
    sp.get("train", c.split.train);
    sp.get("val", c.split.val);
    sp.get("test", c.split.test);
  }
  if (c.source != "synth" && c.source != "manifest") throw ValidationError("config: corpus.source must be synth or manifest");
}

void read_model(const nlohmann::json& j, RunConfig& c) {
  Section r(j, "model");
  auto& m = c.train.model;
  r.get("feature_dim", m.feature_dim);
  r.get("model_dim", m.model_dim);
  r.get("proj_dim", m.proj_dim);
  r.get("heads", m.heads);
  r.get("ffn_dim", m.ffn_dim);
  r.get("encoder_layers", m.encoder_layers);
  r.get("mlp_hidden", m.mlp_hidden);
  r.get("classifier_hidden", m.classifier_hidden);
  r.get("max_seq", m.max_seq);
  if (auto* e = r.child("extractor")) {
    Section x(*e, "model.extractor");
    auto& ec = c.pretrain.model;
    x.get("model_dim", ec.model_dim);
    x.get("heads", ec.heads);
    x.get("ffn_dim", ec.ffn_dim);
    x.get("conv_kernel", ec.conv_kernel);
    x.get("blocks", ec.blocks);
    x.get("embed_dim", ec.embed_dim);
  }
  if (m.feature_dim != c.pretrain.model.embed_dim) {
    throw ValidationError("config: model.feature_dim must equal model.extractor.embed_dim");
  }
  if (m.model_dim % m.heads != 0 || c.pretrain.model.model_dim % c.pretrain.model.heads != 0) {
    throw ValidationError("config: model widths must be divisible by the head count");
  }
  if (m.max_seq < (corpus::kMaxSeconds + signal::kClipSeconds - 1) / signal::kClipSeconds) {
    throw ValidationError("config: model.max_seq must cover 7 clips");
  }
}

void read_train(const nlohmann::json& j, fit::TrainConfig& t) {
  Section r(j, "train");
  std::string setting = nn::setting_name(t.setting);
  r.get("setting", setting);
  t.setting = nn::parse_setting(setting);
  r.get("epochs", t.epochs);
  r.get("lr", t.lr);
  r.get("batch_size", t.batch_size);
  r.get("margin", t.weights.margin);
  std::vector<double> w = {t.weights.av, t.weights.vtag, t.weights.atag, t.weights.regular, t.weights.ce};
  r.get("weights", w);
  if (w.size() != 5) throw ValidationError("config: train.weights needs five entries");
  t.weights = {w[0], w[1], w[2], w[3], w[4], t.weights.margin};
  r.get("patience", t.patience);
  r.get("eval_every", t.eval_every);
  r.get("symmetrize_atag", t.symmetrize_atag);
  r.get("cross_attention_inference", t.cross_inference);
  fit::validate(t);
}

}  // namespace

RunConfig from_json(const nlohmann::json& j) {
  RunConfig c;
  Section r(j, "");
  r.get("seed", c.seed);
  r.get("output_dir", c.output_dir);
  if (auto* s = r.child("corpus")) read_corpus(*s, c.corpus);
  if (auto* s = r.child("signal")) {
    Section x(*s, "signal");
    x.get("tempo_min_bpm", c.signal.tempo.min_bpm);
    x.get("tempo_max_bpm", c.signal.tempo.max_bpm);
    x.get("flow_block", c.signal.flow.block);
    x.get("flow_search", c.signal.flow.search);
  }
  if (auto* s = r.child("quantize")) {
    Section x(*s, "quantize");
    x.get("count_cap", c.train.quant.count_cap);
    x.get("bins", c.train.quant.bins);
    x.get("low_pct", c.train.quant.low_pct);
    x.get("high_pct", c.train.quant.high_pct);
  }
  if (auto* s = r.child("model")) read_model(*s, c);
  if (auto* s = r.child("pretrain")) {
    Section x(*s, "pretrain");
    x.get("epochs", c.pretrain.epochs);
    x.get("lr", c.pretrain.lr);
    x.get("batch_size", c.pretrain.batch_size);
  }
  if (auto* s = r.child("train")) read_train(*s, c.train);
  if (auto* s = r.child("grid")) {
    Section x(*s, "grid");
    x.get("margins", c.grid.margins);
    x.get("lrs", c.grid.lrs);
    std::vector<std::vector<double>> w;
    x.get("weights", w);
    if (!w.empty()) {
      c.grid.weights.clear();
      for (const auto& v : w) {
        if (v.size() != 5) throw ValidationError("config: every grid.weights entry needs five values");
        c.grid.weights.push_back({v[0], v[1], v[2], v[3], v[4]});
      }
    }
    x.get("max_cells", c.grid.max_cells);
  }
  if (auto* s = r.child("eval")) {
    Section x(*s, "eval");
    x.get("ks", c.eval.ks);
    x.get("pool_size", c.eval.pool_size);
    x.get("cross_attention", c.eval.cross);
    x.get("keep_rankings", c.eval.keep_rankings);
    if (c.eval.ks.empty()) throw ValidationError("config: eval.ks must not be empty");
    for (int k : c.eval.ks) {
      if (k <= 0) throw ValidationError("config: eval.ks entries must be positive");
    }
  }
  if (auto* s = r.child("ablation")) {
    Section x(*s, "ablation");
    x.get("settings", c.ablation.settings);
    x.get("seeds", c.ablation.seeds);
    x.get("min_relative_gain", c.ablation.min_relative_gain);
    for (const auto& name : c.ablation.settings) nn::parse_setting(name);
    if (c.ablation.seeds.empty()) throw ValidationError("config: ablation.seeds must not be empty");
  }
  c.train.seed = c.seed;
  c.grid.seed = c.seed;
  c.eval.pool_seed = c.seed;
  c.corpus.split.seed = c.seed;
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  const auto& s = c.corpus.synth;
  const auto& m = c.train.model;
  const auto& e = c.pretrain.model;
  const auto& w = c.train.weights;
  nlohmann::json grid_w = nlohmann::json::array();
  for (const auto& v : c.grid.weights) grid_w.push_back(v);
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"corpus",
       {{"source", c.corpus.source},
        {"root", c.corpus.root},
        {"manifest", c.corpus.manifest},
        {"synth",
         {{"music_count", s.music_count},
          {"videos_per_music", s.videos_per_music},
          {"genres", s.genres},
          {"generic_tags", s.generic_tags},
          {"min_seconds", s.min_seconds},
          {"max_seconds", s.max_seconds},
          {"extra_video_seconds", s.extra_video_seconds},
          {"rhythm_correlated", s.rhythm_correlated},
          {"tempo_min_bpm", s.tempo_min_bpm},
          {"tempo_max_bpm", s.tempo_max_bpm},
          {"odd_clip", s.odd_clip}}},
        {"split", {{"train", c.corpus.split.train}, {"val", c.corpus.split.val}, {"test", c.corpus.split.test}}}}},
      {"signal",
       {{"tempo_min_bpm", c.signal.tempo.min_bpm},
        {"tempo_max_bpm", c.signal.tempo.max_bpm},
        {"flow_block", c.signal.flow.block},
        {"flow_search", c.signal.flow.search}}},
      {"quantize",
       {{"count_cap", c.train.quant.count_cap},
        {"bins", c.train.quant.bins},
        {"low_pct", c.train.quant.low_pct},
        {"high_pct", c.train.quant.high_pct}}},
      {"model",
       {{"feature_dim", m.feature_dim},
        {"model_dim", m.model_dim},
        {"proj_dim", m.proj_dim},
        {"heads", m.heads},
        {"ffn_dim", m.ffn_dim},
        {"encoder_layers", m.encoder_layers},
        {"mlp_hidden", m.mlp_hidden},
        {"classifier_hidden", m.classifier_hidden},
        {"max_seq", m.max_seq},
        {"extractor",
         {{"model_dim", e.model_dim},
          {"heads", e.heads},
          {"ffn_dim", e.ffn_dim},
          {"conv_kernel", e.conv_kernel},
          {"blocks", e.blocks},
          {"embed_dim", e.embed_dim}}}}},
      {"pretrain", {{"epochs", c.pretrain.epochs}, {"lr", c.pretrain.lr}, {"batch_size", c.pretrain.batch_size}}},
      {"train",
       {{"setting", nn::setting_name(c.train.setting)},
        {"epochs", c.train.epochs},
        {"lr", c.train.lr},
        {"batch_size", c.train.batch_size},
        {"margin", w.margin},
        {"weights", {w.av, w.vtag, w.atag, w.regular, w.ce}},
        {"patience", c.train.patience},
        {"eval_every", c.train.eval_every},
        {"symmetrize_atag", c.train.symmetrize_atag},
        {"cross_attention_inference", c.train.cross_inference}}},
      {"grid", {{"margins", c.grid.margins}, {"lrs", c.grid.lrs}, {"weights", grid_w}, {"max_cells", c.grid.max_cells}}},
      {"eval",
       {{"ks", c.eval.ks},
        {"pool_size", c.eval.pool_size},
        {"cross_attention", c.eval.cross},
        {"keep_rankings", c.eval.keep_rankings}}},
      {"ablation",
       {{"settings", c.ablation.settings},
        {"seeds", c.ablation.seeds},
        {"min_relative_gain", c.ablation.min_relative_gain}}},
  };
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw LoadError(path.string(), "cannot open config");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void apply_env(RunConfig& c) {
  if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) c.output_dir = dir;
}

std::string hash_json(const nlohmann::json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace vmr::config
