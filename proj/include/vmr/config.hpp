#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vmr/corpus.hpp"
#include "vmr/features.hpp"
#include "vmr/fit.hpp"
#include "vmr/grid.hpp"
#include "vmr/pretrain.hpp"
#include "vmr/retrieval.hpp"

namespace vmr::config {

struct CorpusSection {
  std::string source = "synth";  // "synth" or "manifest"
  std::string root;              // media root for "manifest"
  std::string manifest;          // manifest path for "manifest"
  corpus::SynthSpec synth;
  corpus::SplitSpec split{0.75, 0.0, 0.25, 0};  // split.seed is derived from the run seed
};

struct AblationSection {
  std::vector<std::string> settings = {"AE", "A-SE", "SE", "SE&R"};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  double min_relative_gain = 0.2;  // SE&R over AE, on median Recall@1
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "vmr_run";
  CorpusSection corpus;
  features::SignalOptions signal;
  pretrain::PretrainConfig pretrain;
  fit::TrainConfig train;
  grid::GridSpec grid;
  retrieval::EvalOptions eval;
  AblationSection ablation;
};

// Unknown keys anywhere are a ValidationError naming the key path.
RunConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
RunConfig load(const std::filesystem::path& path);

// Applies the output-directory environment override, if set.
inline constexpr const char* kOutputDirEnv = "VMR_OUTPUT_DIR";
void apply_env(RunConfig& c);

// Stable content hash (hex) of a JSON value.
std::string hash_json(const nlohmann::json& j);

}  // namespace vmr::config
