#pragma once

#include <filesystem>
#include <vector>

#include "vmr/features.hpp"
#include "vmr/nn/extractor.hpp"
#include "vmr/tagset.hpp"

namespace vmr::pretrain {

struct PretrainConfig {
  nn::ExtractorConfig model;  // num_classes is overwritten with the vocabulary size
  int epochs = 15;
  double lr = 1e-3;
  int batch_size = 32;
};

struct ClipExample {
  const nn::Matrix* tokens = nullptr;
  int label = 0;
};

struct PretrainResult {
  nn::ClipExtractor extractor;
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;  // clip classification accuracy after the last epoch
};

// Cross-entropy training of one clip extractor on (clip, unified label)
// examples; shuffling and initialisation come from `seed`.
PretrainResult train_extractor(nn::Modality modality, const std::vector<ClipExample>& examples, int num_classes,
                               const PretrainConfig& cfg, std::uint64_t seed);

// Every training clip inherits its track's label. Music clips are counted
// once per distinct track.
std::vector<ClipExample> video_examples(const std::vector<features::PairSignals>& signals,
                                        const tagset::UnifiedTagSet& tags);
std::vector<ClipExample> music_examples(const std::vector<features::PairSignals>& signals,
                                        const tagset::UnifiedTagSet& tags);

double accuracy(const nn::ClipExtractor& extractor, const std::vector<ClipExample>& examples);

void save_extractor(const std::filesystem::path& path, const nn::ClipExtractor& extractor);
nn::ClipExtractor load_extractor(const std::filesystem::path& path);

}  // namespace vmr::pretrain
