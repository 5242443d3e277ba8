// Command-line front end: corpus synthesis, label unification, feature
// extraction, training, evaluation and the settings ablation.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "vmr/config.hpp"
#include "vmr/error.hpp"
#include "vmr/grid.hpp"
#include "vmr/model.hpp"
#include "vmr/pipeline.hpp"

namespace fs = std::filesystem;
using namespace vmr;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitTrend = 4;

void log_line(const std::string& s) { std::cerr << s << std::endl; }

std::string csv_row(const std::string& label, const retrieval::RetrievalReport& r) {
  std::string s = label;
  for (double v : r.recall) s += "," + std::to_string(v);
  return s + "\n";
}

std::string csv_header(const std::vector<int>& ks) {
  std::string s = "setting";
  for (int k : ks) s += ",R@" + std::to_string(k);
  return s + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video-to-music retrieval: synthetic corpora, unified tag labels, clip features, matcher training and Recall@K evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::int64_t seed = -1;
  app.add_option("-c,--config", config_path, "JSON run configuration (defaults apply to missing keys)");
  app.add_option("-o,--output-dir", output_dir,
                 std::string("Output directory (overrides the config and the ") + config::kOutputDirEnv + " variable)");
  app.add_option("--seed", seed, "Override the global seed");

  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus (media + manifest.json)");
  std::string synth_out;
  int synth_music = -1, synth_videos = -1;
  synth->add_option("--out", synth_out, "Target directory")->required();
  synth->add_option("--music", synth_music, "Number of music tracks");
  synth->add_option("--videos", synth_videos, "Videos per track");

  auto* tags = app.add_subcommand("tagset", "Build the unified label set and export it as JSON");
  std::string tags_out;
  tags->add_option("--out", tags_out, "Export path (default: <output-dir>/tagset.json)");

  auto* feats = app.add_subcommand("features", "Compute signals, pretrain extractors and embed every clip");
  auto* pre = app.add_subcommand("pretrain", "Pretrain the video and music clip extractors");

  auto* train = app.add_subcommand("train", "Train the matcher on cached features");
  std::string train_setting;
  int train_epochs = -1;
  train->add_option("--setting", train_setting, "AE, A-SE, SE or SE&R");
  train->add_option("--epochs", train_epochs, "Epoch budget");

  auto* grid = app.add_subcommand("grid", "Hyper-parameter sweep selected by validation Recall@1");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with Recall@K");
  std::string eval_ckpt, eval_split = "test", eval_mode, eval_csv;
  std::vector<int> eval_ks;
  std::size_t eval_pool = 0;
  bool eval_dump = false;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint (default: <output-dir>/checkpoint.utcm)");
  eval->add_option("--split", eval_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--ks", eval_ks, "K values")->delimiter(',');
  eval->add_option("--pool-size", eval_pool, "Candidate pool size (0: all music of the split)");
  eval->add_option("--mode", eval_mode, "cross or fast")->check(CLI::IsMember({"cross", "fast"}));
  eval->add_flag("--dump-rankings", eval_dump, "Include per-query rankings in the report");
  eval->add_option("--emit-csv", eval_csv, "Also write recall values as CSV");

  auto* abl = app.add_subcommand("ablation", "Train and compare AE, A-SE, SE and SE&R over several seeds");
  std::string abl_csv;
  abl->add_option("--emit-csv", abl_csv, "Also write median recall values as CSV");

  auto* e2e = app.add_subcommand("e2e", "Run every stage: corpus, tags, features, pretraining, training, evaluation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    config::RunConfig cfg = config_path.empty() ? config::from_json(nlohmann::json::object()) : config::load(config_path);
    if (seed >= 0) {
      cfg.seed = static_cast<std::uint64_t>(seed);
      cfg.train.seed = cfg.grid.seed = cfg.eval.pool_seed = cfg.corpus.split.seed = cfg.seed;
    }
    config::apply_env(cfg);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    const fs::path dir = cfg.output_dir;

    if (*synth) {
      if (synth_music > 0) cfg.corpus.synth.music_count = synth_music;
      if (synth_videos > 0) cfg.corpus.synth.videos_per_music = synth_videos;
      const auto c = corpus::synth_corpus(cfg.corpus.synth, derive_seed(cfg.seed, "corpus"));
      const auto manifest = corpus::save_corpus(c, synth_out);
      std::cout << "wrote " << c.pairs().size() << " pairs to " << manifest.string() << "\n";
      return 0;
    }
    if (*tags) {
      fs::create_directories(dir);
      pipeline::write_snapshot(cfg, dir);
      const auto data = pipeline::prepare(cfg, dir, log_line, "tagset");
      if (!tags_out.empty()) tagset::export_tagset(data.tags, tags_out);
      for (const auto& tag : data.tags.vocab) {
        std::size_t n = 0;
        for (const auto& [m, t] : data.tags.label_of_music) n += (t == tag);
        std::cout << tag << "\t" << n << " tracks\n";
      }
      return 0;
    }
    if (*pre) {
      pipeline::write_snapshot(cfg, dir);
      pipeline::prepare(cfg, dir, log_line, "pretrain");
      std::cout << pipeline::read_text(dir / "pretrain.json");
      return 0;
    }
    if (*feats) {
      pipeline::write_snapshot(cfg, dir);
      const auto data = pipeline::prepare(cfg, dir, log_line);
      nlohmann::json pairs = nlohmann::json::array();
      for (const auto& f : data.features) {
        nlohmann::json clips = nlohmann::json::array();
        for (int t = 0; t < f.clips(); ++t) {
          const auto& r = f.rhythm[static_cast<std::size_t>(t)];
          clips.push_back({{"n_beat", r.n_beat},
                           {"s_beat", r.s_beat},
                           {"l_bar", r.l_bar ? nlohmann::json(*r.l_bar) : nlohmann::json(nullptr)},
                           {"m_bar", f.flow[static_cast<std::size_t>(t)].m_bar}});
        }
        pairs.push_back({{"pair_id", f.pair_id}, {"music_id", f.music_id}, {"clips", clips},
                         {"video_feature_shape", {f.video.rows(), f.video.cols()}},
                         {"music_feature_shape", {f.music.rows(), f.music.cols()}}});
      }
      pipeline::write_text(dir / "features_summary.json", nlohmann::json({{"pairs", pairs}}).dump(2) + "\n");
      std::cout << "features for " << data.features.size() << " pairs in " << (dir / "features.utcm").string() << "\n";
      return 0;
    }
    if (*train) {
      if (!train_setting.empty()) cfg.train.setting = nn::parse_setting(train_setting);
      if (train_epochs >= 0) cfg.train.epochs = train_epochs;
      pipeline::write_snapshot(cfg, dir);
      const auto data = pipeline::prepare(cfg, dir, log_line);
      const auto out = pipeline::train_and_evaluate(cfg, data, dir, log_line);
      if (!data.test.empty()) std::cout << retrieval::format_table({{"vmr", out.report.setting, &out.report}});
      return 0;
    }
    if (*grid) {
      pipeline::write_snapshot(cfg, dir);
      const auto data = pipeline::prepare(cfg, dir, log_line);
      const auto examples = fit::make_examples(data.train, data.tags);
      const auto result = grid::grid_search(examples, data.val, data.tags.vocab, cfg.train, cfg.grid, [](const grid::GridCell& c) {
        log_line("[grid] margin " + std::to_string(c.margin) + " lr " + std::to_string(c.lr) + " -> val R@1 " +
                 std::to_string(c.val_r1));
      });
      auto j = grid::to_json(result);
      config::RunConfig best = cfg;
      best.train = result.best_config;
      j["best_config"] = config::to_json(best).at("train");
      pipeline::write_text(dir / "grid_report.json", j.dump(2) + "\n");
      std::cout << j["best_config"].dump(2) << "\n";
      return 0;
    }
    if (*eval) {
      if (!eval_ks.empty()) cfg.eval.ks = eval_ks;
      if (eval_pool > 0) cfg.eval.pool_size = eval_pool;
      if (!eval_mode.empty()) cfg.eval.cross = eval_mode == "cross";
      cfg.eval.keep_rankings = cfg.eval.keep_rankings || eval_dump;
      const auto data = pipeline::prepare(cfg, dir, log_line);
      const fs::path ckpt = eval_ckpt.empty() ? dir / "checkpoint.utcm" : fs::path(eval_ckpt);
      const model::Model m = model::load_checkpoint(ckpt);
      const auto& pairs = eval_split == "train" ? data.train : eval_split == "val" ? data.val : data.test;
      auto rep = retrieval::evaluate(m, pairs, cfg.eval);
      rep.config_hash = config::hash_json(config::to_json(cfg).at("eval"));
      const std::string base = "eval_" + eval_split;
      pipeline::write_text(dir / (base + ".json"), retrieval::to_json(rep).dump(2) + "\n");
      const std::string table = retrieval::format_table({{"vmr", rep.setting, &rep}});
      pipeline::write_text(dir / (base + ".txt"), table);
      if (!eval_csv.empty()) pipeline::write_text(eval_csv, csv_header(rep.ks) + csv_row(rep.setting, rep));
      std::cout << table;
      return 0;
    }
    if (*abl) {
      const auto res = pipeline::run_ablation(cfg, log_line);
      std::cout << res.table;
      if (!abl_csv.empty()) {
        std::string csv = csv_header(cfg.eval.ks);
        for (const auto& name : res.settings) {
          retrieval::RetrievalReport r;
          for (int k : cfg.eval.ks) r.recall.push_back(res.median.at(name).at(k));
          csv += csv_row(name, r);
        }
        pipeline::write_text(abl_csv, csv);
      }
      return res.all_passed() ? 0 : kExitTrend;
    }
    if (*e2e) {
      const auto rep = pipeline::run_e2e(cfg, log_line);
      std::cout << retrieval::format_table({{"vmr", rep.setting, &rep}});
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
