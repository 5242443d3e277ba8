#pragma once

#include <string>
#include <vector>

#include "grad_check.hpp"
#include "vmr/features.hpp"
#include "vmr/model.hpp"

namespace vmr::testing {

inline nn::MatcherConfig small_matcher() {
  nn::MatcherConfig c;
  c.model_dim = 32;
  c.proj_dim = 16;
  c.heads = 2;
  c.ffn_dim = 32;
  c.mlp_hidden = 32;
  c.classifier_hidden = 16;
  return c;
}

// Random clip features for `music` tracks with `videos` pairs each; clip
// counts cycle through 1..max_clips.
inline std::vector<features::PairFeatures> random_features(int music, int videos, std::uint64_t seed,
                                                           int max_clips = 4) {
  Rng rng(seed);
  std::vector<features::PairFeatures> out;
  for (int m = 0; m < music; ++m) {
    const int t = 1 + m % max_clips;
    const nn::Matrix mus = random_matrix(t, 512, rng);
    std::vector<signal::RhythmStats> rhythm;
    for (int i = 0; i < t; ++i) {
      const int n = static_cast<int>(rng.index(10));
      rhythm.push_back({n, rng.uniform(), n >= 2 ? std::optional<double>(rng.uniform(0.3, 1.0)) : std::nullopt});
    }
    for (int v = 0; v < videos; ++v) {
      features::PairFeatures f;
      f.music_id = "m" + std::to_string(1000 + m);
      f.pair_id = f.music_id + "_v" + std::to_string(v);
      f.video = random_matrix(t, 512, rng);
      f.music = mus;
      f.video_track = f.video.colwise().mean();
      f.music_track = mus.colwise().mean();
      f.rhythm = rhythm;
      for (int i = 0; i < t; ++i) f.flow.push_back({rng.uniform(0.0, 5.0)});
      out.push_back(std::move(f));
    }
  }
  return out;
}

inline model::Model small_model(nn::Setting s, std::uint64_t seed, std::vector<std::string> vocab = {"a", "b"}) {
  Rng rng(seed);
  return model::Model(small_matcher(), s, quantize::Calibration{}, std::move(vocab), rng);
}

}  // namespace vmr::testing
