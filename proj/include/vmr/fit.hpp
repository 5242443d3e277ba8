#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vmr/features.hpp"
#include "vmr/losses.hpp"
#include "vmr/model.hpp"
#include "vmr/quantize.hpp"
#include "vmr/retrieval.hpp"
#include "vmr/tagset.hpp"

namespace vmr::fit {

struct TrainConfig {
  nn::Setting setting = nn::Setting::kSER;
  nn::MatcherConfig model;
  quantize::QuantConfig quant;
  losses::LossWeights weights;
  int epochs = 200;
  double lr = 1e-4;
  int batch_size = 32;
  int patience = 20;       // evaluations without a validation Recall@1 gain
  int eval_every = 1;      // epochs between validation evaluations
  bool symmetrize_atag = false;
  bool cross_inference = true;
  std::uint64_t seed = 0;
};

// Throws ValidationError on out-of-range values.
void validate(const TrainConfig& cfg);

struct Example {
  const features::PairFeatures* pair = nullptr;
  std::string tag;  // unified label of the pair's music
};

std::vector<Example> make_examples(const std::vector<features::PairFeatures>& pairs, const tagset::UnifiedTagSet& tags);

struct EpochLog {
  int epoch = 0;
  double total = 0.0;
  std::array<double, 5> parts{};  // av, vtag, atag, regular, ce (unweighted batch means)
  std::optional<std::array<double, 4>> val_recall;  // R@1, R@5, R@10, R@25

  nlohmann::json to_json() const;
};

struct FitResult {
  model::Model model;
  std::vector<EpochLog> log;
  int best_epoch = 0;  // epoch whose weights were kept (0: initial)
  double best_val_r1 = -1.0;
  std::string rng_state;
};

// Optional per-epoch observer (progress printing, log streaming).
using EpochHook = std::function<void(const EpochLog&)>;

// Trains the matcher on precomputed clip features. Calibration of the
// plug-in bins uses the training pairs only. With validation pairs, the
// weights of the best validation Recall@1 are kept and training stops after
// `patience` evaluations without improvement.
FitResult fit(const std::vector<Example>& train, const std::vector<features::PairFeatures>& val,
              const std::vector<std::string>& vocab, const TrainConfig& cfg, const EpochHook& hook = {});

// One forward pass over a batch: every loss part, unweighted. `negatives[i]`
// indexes the negative of anchor i within `batch`. Exposed for tests.
struct BatchLosses {
  losses::LossParts parts;
  nn::Tensor total;
};
BatchLosses batch_losses(const model::Model& model, const std::vector<const Example*>& batch,
                         const std::vector<std::size_t>& negatives, const TrainConfig& cfg);

// For each anchor, a uniformly chosen batch member with a different music_id.
// Throws ValidationError when the batch holds a single music.
std::vector<std::size_t> sample_negatives(const std::vector<const Example*>& batch, Rng& rng);

}  // namespace vmr::fit
