#include "vmr/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "vmr/error.hpp"
#include "vmr/pretrain.hpp"
#include "vmr/tensor_io.hpp"

namespace vmr::pipeline {

namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError(path.string(), "cannot open");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw LoadError(tmp.string(), "cannot open for writing");
    f << text;
    if (!f) throw LoadError(tmp.string(), "write failed");
  }
  fs::rename(tmp, path);
}

namespace {

config::RunConfig with_seed(config::RunConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.train.seed = seed;
  cfg.grid.seed = seed;
  cfg.eval.pool_seed = seed;
  cfg.corpus.split.seed = seed;
  return cfg;
}

// Stage keys recorded next to the outputs.
class StageBook {
 public:
  explicit StageBook(fs::path dir) : path_(std::move(dir) / "stages.json") {
    if (fs::exists(path_)) {
      try {
        book_ = nlohmann::json::parse(read_text(path_));
      } catch (const nlohmann::json::exception&) {
        book_ = nlohmann::json::object();
      }
    }
  }
  bool fresh(const std::string& stage, const std::string& key, const std::vector<fs::path>& outputs) const {
    auto it = book_.find(stage);
    if (it == book_.end() || *it != key) return false;
    return std::all_of(outputs.begin(), outputs.end(), [](const fs::path& p) { return fs::exists(p); });
  }
  void record(const std::string& stage, const std::string& key) {
    book_[stage] = key;
    write_text(path_, book_.dump(2) + "\n");
  }

 private:
  fs::path path_;
  nlohmann::json book_ = nlohmann::json::object();
};

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

nlohmann::json section(const nlohmann::json& full, const char* key) { return full.at(key); }

std::string setting_dir(const std::string& name) {
  std::string s;
  for (char c : name) s += (c == '&') ? '_' : c;
  return s;
}

std::string config_hash(const config::RunConfig& cfg) {
  auto j = config::to_json(cfg);
  j.erase("output_dir");
  j.erase("ablation");
  return config::hash_json(j);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

corpus::Corpus build_corpus(const config::RunConfig& cfg) {
  if (cfg.corpus.source == "synth") return corpus::synth_corpus(cfg.corpus.synth, derive_seed(cfg.seed, "corpus"));
  if (cfg.corpus.manifest.empty()) throw ValidationError("config: corpus.manifest is required for source=manifest");
  const fs::path manifest = cfg.corpus.manifest;
  const fs::path root = cfg.corpus.root.empty() ? manifest.parent_path() : fs::path(cfg.corpus.root);
  return corpus::load_corpus(root, manifest);
}

Prepared prepare(const config::RunConfig& cfg, const fs::path& dir, const Log& log, const std::string& until) {
  if (until != "corpus" && until != "tagset" && until != "pretrain" && until != "features") {
    throw ContractError("prepare: unknown stage " + until);
  }
  fs::create_directories(dir);
  StageBook book(dir);
  const auto full = config::to_json(cfg);
  Prepared out;

  const std::string corpus_key = config::hash_json({{"seed", cfg.seed}, {"corpus", section(full, "corpus")}});
  out.stage_keys["corpus"] = corpus_key;
  stage("corpus", [&] {
    log("[corpus] building (" + cfg.corpus.source + ")");
    out.corpus = build_corpus(cfg);
    out.split = corpus::split_corpus(out.corpus, cfg.corpus.split);
    log("[corpus] " + std::to_string(out.corpus.pairs().size()) + " pairs, " + std::to_string(out.corpus.music_count()) +
        " tracks; split " + std::to_string(out.split.train.music_count()) + "/" + std::to_string(out.split.val.music_count()) +
        "/" + std::to_string(out.split.test.music_count()) + " tracks");
    book.record("corpus", corpus_key);
    return 0;
  });

  if (until == "corpus") return out;
  const std::string tag_key = config::hash_json({{"corpus", corpus_key}, {"stage", "tagset"}});
  out.stage_keys["tagset"] = tag_key;
  const fs::path tag_path = dir / "tagset.json";
  stage("tagset", [&] {
    if (book.fresh("tagset", tag_key, {tag_path})) {
      out.tags = tagset::import_tagset(tag_path);
      log("[tagset] reused " + tag_path.string());
    } else {
      out.tags = tagset::assign_labels(out.corpus);
      tagset::export_tagset(out.tags, tag_path);
      book.record("tagset", tag_key);
      log("[tagset] " + std::to_string(out.tags.vocab.size()) + " unified labels");
    }
    return 0;
  });

  if (until == "tagset") return out;
  const std::string pre_key = config::hash_json({{"corpus", corpus_key},
                                                 {"tagset", tag_key},
                                                 {"signal", section(full, "signal")},
                                                 {"pretrain", section(full, "pretrain")},
                                                 {"extractor", full.at("model").at("extractor")}});
  const std::string feat_key = config::hash_json({{"pretrain", pre_key}, {"stage", "features"}});
  out.stage_keys["pretrain"] = pre_key;
  out.stage_keys["features"] = feat_key;
  const fs::path video_path = dir / "extractors" / "video.utcm";
  const fs::path music_path = dir / "extractors" / "music.utcm";
  const fs::path feat_path = dir / "features.utcm";

  if (until == "features" && book.fresh("pretrain", pre_key, {video_path, music_path}) &&
      book.fresh("features", feat_key, {feat_path})) {
    stage("features", [&] {
      out.features = features::load_features(feat_path);
      log("[features] reused " + feat_path.string());
      return 0;
    });
  } else {
    std::vector<features::PairSignals> signals = stage("signal", [&] {
      log("[signal] filter banks, beats and block flow for " + std::to_string(out.corpus.pairs().size()) + " pairs");
      return features::compute_signals(out.corpus, cfg.signal);
    });
    features::ExtractorPair trained;
    stage("pretrain", [&] {
      if (book.fresh("pretrain", pre_key, {video_path, music_path})) {
        trained = {pretrain::load_extractor(video_path), pretrain::load_extractor(music_path)};
        log("[pretrain] reused extractors");
        return 0;
      }
      std::vector<features::PairSignals> train_signals;
      std::set<std::string> train_music;
      for (const auto& [id, _] : out.split.train.music_index()) train_music.insert(id);
      for (const auto& s : signals) {
        if (train_music.count(s.music_id)) train_signals.push_back(s);
      }
      const int classes = static_cast<int>(out.tags.vocab.size());
      const std::uint64_t seed = derive_seed(cfg.seed, "pretrain");
      auto v = pretrain::train_extractor(nn::Modality::kVideo, pretrain::video_examples(train_signals, out.tags), classes,
                                         cfg.pretrain, seed);
      log("[pretrain] video: final loss " + fmt("%.4f", v.epoch_loss.empty() ? 0.0 : v.epoch_loss.back()) +
          ", train clip accuracy " + fmt("%.3f", v.train_accuracy));
      auto m = pretrain::train_extractor(nn::Modality::kMusic, pretrain::music_examples(train_signals, out.tags), classes,
                                         cfg.pretrain, seed);
      log("[pretrain] music: final loss " + fmt("%.4f", m.epoch_loss.empty() ? 0.0 : m.epoch_loss.back()) +
          ", train clip accuracy " + fmt("%.3f", m.train_accuracy));
      pretrain::save_extractor(video_path, v.extractor);
      pretrain::save_extractor(music_path, m.extractor);
      nlohmann::json summary = {{"video", {{"epoch_loss", v.epoch_loss}, {"train_accuracy", v.train_accuracy}}},
                                {"music", {{"epoch_loss", m.epoch_loss}, {"train_accuracy", m.train_accuracy}}}};
      write_text(dir / "pretrain.json", summary.dump(2) + "\n");
      trained = {std::move(v.extractor), std::move(m.extractor)};
      book.record("pretrain", pre_key);
      return 0;
    });
    if (until == "pretrain") return out;
    stage("features", [&] {
      // Track-level (AE) vectors come from untrained extractors of the same
      // shape: generic features that carry no label supervision.
      nn::ExtractorConfig gc = cfg.pretrain.model;
      gc.num_classes = std::max<nn::Index>(2, static_cast<nn::Index>(out.tags.vocab.size()));
      Rng gv(derive_seed(cfg.seed, "generic-video"));
      Rng gm(derive_seed(cfg.seed, "generic-music"));
      features::ExtractorPair generic{nn::ClipExtractor(nn::Modality::kVideo, gc, gv),
                                      nn::ClipExtractor(nn::Modality::kMusic, gc, gm)};
      out.features = features::extract_features(signals, trained, generic);
      features::save_features(feat_path, out.features);
      book.record("features", feat_key);
      log("[features] " + std::to_string(out.features.size()) + " pairs embedded");
      return 0;
    });
  }
  out.train = features::select(out.features, out.split.train);
  out.val = features::select(out.features, out.split.val);
  out.test = features::select(out.features, out.split.test);
  return out;
}

TrainOutcome train_and_evaluate(const config::RunConfig& cfg, const Prepared& data, const fs::path& dir, const Log& log) {
  fs::create_directories(dir);
  StageBook book(dir);
  const auto full = config::to_json(cfg);
  const std::string train_key = config::hash_json({{"features", data.stage_keys.at("features")},
                                                   {"tagset", data.stage_keys.at("tagset")},
                                                   {"seed", cfg.seed},
                                                   {"train", section(full, "train")},
                                                   {"quantize", section(full, "quantize")},
                                                   {"model", section(full, "model")}});
  const std::string setting = nn::setting_name(cfg.train.setting);
  const fs::path ckpt = dir / "checkpoint.utcm";
  const fs::path log_path = dir / "train_log.jsonl";

  TrainOutcome out = stage("train[" + setting + "]", [&]() -> TrainOutcome {
    if (book.fresh("train", train_key, {ckpt, log_path})) {
      log("[train " + setting + "] reused " + ckpt.string());
      model::Model m = model::load_checkpoint(ckpt);
      return {fit::FitResult{std::move(m), {}, 0, -1.0, {}}, {}};
    }
    const auto examples = fit::make_examples(data.train, data.tags);
    std::string lines;
    auto hook = [&](const fit::EpochLog& e) {
      lines += e.to_json().dump() + "\n";
      if (e.epoch != 1 && e.epoch % 10 != 0) return;
      std::string msg = "[train " + setting + "] epoch " + std::to_string(e.epoch) + " loss " + fmt("%.4f", e.total);
      if (e.val_recall) msg += " val R@1 " + fmt("%.2f", (*e.val_recall)[0]);
      log(msg);
    };
    log("[train " + setting + "] " + std::to_string(examples.size()) + " training pairs, " +
        std::to_string(data.val.size()) + " validation pairs");
    fit::FitResult r = fit::fit(examples, data.val, data.tags.vocab, cfg.train, hook);
    write_text(log_path, lines);
    model::Checkpoint extra{config::to_json(cfg), r.rng_state};
    extra.config.erase("output_dir");
    model::save_checkpoint(ckpt, r.model, extra);
    book.record("train", train_key);
    return {std::move(r), {}};
  });

  if (data.test.empty()) {
    log("[eval " + setting + "] no test pairs, skipping evaluation");
    return out;
  }
  out.report = stage("eval[" + setting + "]", [&] {
    retrieval::EvalOptions opts = cfg.eval;
    opts.cross = cfg.eval.cross && cfg.train.cross_inference;
    auto rep = retrieval::evaluate(out.fit.model, data.test, opts);
    rep.config_hash = config_hash(cfg);
    write_text(dir / "report.json", retrieval::to_json(rep).dump(2) + "\n");
    write_text(dir / "report.txt", retrieval::format_table({{"vmr", setting, &rep}}));
    log("[eval " + setting + "] test R@1 " + fmt("%.2f", rep.at(cfg.eval.ks.front())) + " over " +
        std::to_string(rep.queries) + " queries, pool " + std::to_string(rep.pool_size));
    return rep;
  });
  return out;
}

void write_snapshot(const config::RunConfig& cfg, const fs::path& dir) {
  auto j = config::to_json(cfg);
  j["versions"] = {{"vmr", kVersion}, {"checkpoint_format", tensor_io::kVersion}};
  write_text(dir / "config.json", j.dump(2) + "\n");
}

retrieval::RetrievalReport run_e2e(const config::RunConfig& cfg, const Log& log) {
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_snapshot(cfg, dir);
  const Prepared data = prepare(cfg, dir, log);
  return train_and_evaluate(cfg, data, dir, log).report;
}

bool AblationResult::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const TrendCheck& c) { return c.passed; });
}

nlohmann::json AblationResult::to_json() const {
  nlohmann::json runs = nlohmann::json::object();
  for (const auto& [setting, reps] : reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < reps.size(); ++i) {
      auto j = retrieval::to_json(reps[i]);
      j["seed"] = seeds[i];
      arr.push_back(j);
    }
    runs[setting] = arr;
  }
  nlohmann::json med = nlohmann::json::object();
  for (const auto& [setting, m] : median) {
    for (const auto& [k, v] : m) med[setting]["R@" + std::to_string(k)] = v;
  }
  nlohmann::json checks_j = nlohmann::json::array();
  for (const auto& c : checks) checks_j.push_back({{"check", c.name}, {"passed", c.passed}});
  return {{"settings", settings}, {"seeds", seeds}, {"runs", runs}, {"median", med}, {"checks", checks_j}};
}

AblationResult run_ablation(const config::RunConfig& cfg, const Log& log) {
  const fs::path root = cfg.output_dir;
  fs::create_directories(root);
  write_snapshot(cfg, root);
  AblationResult res;
  res.settings = cfg.ablation.settings;
  res.seeds = cfg.ablation.seeds;
  for (auto seed : cfg.ablation.seeds) {
    const config::RunConfig cs = with_seed(cfg, seed);
    const fs::path dir = root / ("seed_" + std::to_string(seed));
    log("[ablation] seed " + std::to_string(seed));
    const Prepared data = prepare(cs, dir, log);
    for (const auto& name : cfg.ablation.settings) {
      config::RunConfig run = cs;
      run.train.setting = nn::parse_setting(name);
      try {
        res.reports[name].push_back(train_and_evaluate(run, data, dir / setting_dir(name), log).report);
      } catch (const Error& e) {
        throw StageError("ablation[" + name + ", seed " + std::to_string(seed) + "]", e.what());
      }
    }
  }
  for (const auto& name : res.settings) {
    for (int k : cfg.eval.ks) {
      std::vector<double> v;
      for (const auto& r : res.reports[name]) v.push_back(r.at(k));
      std::sort(v.begin(), v.end());
      const std::size_t n = v.size();
      res.median[name][k] = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }
  }
  const int k1 = cfg.eval.ks.front();
  auto has = [&](const char* s) { return res.median.count(s) > 0; };
  auto r1 = [&](const char* s) { return res.median.at(s).at(k1); };
  if (has("SE&R") && has("SE")) res.checks.push_back({"SE&R > SE", r1("SE&R") > r1("SE")});
  if (has("SE") && has("A-SE")) res.checks.push_back({"SE >= A-SE", r1("SE") >= r1("A-SE")});
  if (has("A-SE") && has("AE")) res.checks.push_back({"A-SE > AE", r1("A-SE") > r1("AE")});
  if (has("SE&R") && has("AE")) {
    res.checks.push_back({"SE&R >= " + fmt("%.2f", 1.0 + cfg.ablation.min_relative_gain) + " x AE",
                          r1("SE&R") >= (1.0 + cfg.ablation.min_relative_gain) * r1("AE") && r1("SE&R") > r1("AE")});
  }

  std::ostringstream t;
  t << "Median over seeds";
  for (auto s : res.seeds) t << ' ' << s;
  t << " (test split, " << (cfg.eval.cross && cfg.train.cross_inference ? "cross" : "fast") << " inference)\n";
  std::vector<retrieval::RetrievalReport> med_reports;
  for (const auto& name : res.settings) {
    retrieval::RetrievalReport r;
    r.ks = cfg.eval.ks;
    for (int k : r.ks) r.recall.push_back(res.median[name][k]);
    med_reports.push_back(r);
  }
  std::vector<retrieval::TableRow> rows;
  for (std::size_t i = 0; i < res.settings.size(); ++i) {
    rows.push_back({"vmr (" + std::to_string(i + 1) + ")", res.settings[i], &med_reports[i]});
  }
  t << retrieval::format_table(rows) << "\nRecall@" << k1 << " per seed\n";
  for (const auto& name : res.settings) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%-6s", name.c_str());
    t << buf;
    for (const auto& r : res.reports[name]) t << ' ' << fmt("%7.2f", r.at(k1));
    t << '\n';
  }
  t << "\nTrend checks\n";
  for (const auto& c : res.checks) t << (c.passed ? "  PASS  " : "  FAIL  ") << c.name << '\n';
  res.table = t.str();
  write_text(root / "ablation_report.txt", res.table);
  write_text(root / "ablation_report.json", res.to_json().dump(2) + "\n");
  return res;
}

}  // namespace vmr::pipeline
