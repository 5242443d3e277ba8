#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vmr/config.hpp"
#include "vmr/corpus.hpp"
#include "vmr/error.hpp"
#include "vmr/features.hpp"
#include "vmr/fit.hpp"
#include "vmr/retrieval.hpp"
#include "vmr/tagset.hpp"

namespace vmr::pipeline {

inline constexpr const char* kVersion = "1.0.0";

using Log = std::function<void(const std::string&)>;

// Raised when a stage fails; names the stage. Partial outputs of earlier
// stages stay on disk.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what) : Error("stage " + stage + " failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

corpus::Corpus build_corpus(const config::RunConfig& cfg);

struct Prepared {
  corpus::Corpus corpus;
  corpus::Split split;
  tagset::UnifiedTagSet tags;
  std::vector<features::PairFeatures> features;  // every pair, corpus order
  std::vector<features::PairFeatures> train, val, test;
  std::map<std::string, std::string> stage_keys;
};

// Runs (or reuses) corpus -> tagset -> pretrain -> features under `dir`.
// A stage is reused when its recorded key, a hash of its configuration and
// upstream keys, is unchanged and its outputs exist.
// `until` may stop early after "corpus", "tagset" or "pretrain".
Prepared prepare(const config::RunConfig& cfg, const std::filesystem::path& dir, const Log& log,
                 const std::string& until = "features");

struct TrainOutcome {
  fit::FitResult fit;
  retrieval::RetrievalReport report;
};

// Trains with cfg.train (cached by key), writes checkpoint, log and report.
TrainOutcome train_and_evaluate(const config::RunConfig& cfg, const Prepared& data, const std::filesystem::path& dir,
                                const Log& log);

// Writes the resolved configuration (with versions) into dir/config.json.
void write_snapshot(const config::RunConfig& cfg, const std::filesystem::path& dir);

// Full pipeline in cfg.output_dir; returns the final report.
retrieval::RetrievalReport run_e2e(const config::RunConfig& cfg, const Log& log);

struct TrendCheck {
  std::string name;
  bool passed = false;
};

struct AblationResult {
  std::vector<std::string> settings;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::vector<retrieval::RetrievalReport>> reports;  // per setting, per seed
  std::map<std::string, std::map<int, double>> median;                   // per setting, per K
  std::vector<TrendCheck> checks;
  std::string table;

  bool all_passed() const;
  nlohmann::json to_json() const;
};

// Trains and evaluates every configured setting on the same corpus and
// features for each seed; medians over seeds feed the trend checks.
AblationResult run_ablation(const config::RunConfig& cfg, const Log& log);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace vmr::pipeline
