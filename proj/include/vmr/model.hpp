#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vmr/features.hpp"
#include "vmr/nn/matcher.hpp"
#include "vmr/nn/text_embed.hpp"
#include "vmr/quantize.hpp"

namespace vmr::model {

using nn::Matrix;
using nn::Tensor;

// The matching model plus everything needed to feed it: quantizer
// calibration and plug-in tables, the tag vocabulary and text embedder, and
// the feature-handling setting.
class Model {
 public:
  Model(const nn::MatcherConfig& cfg, nn::Setting setting, const quantize::Calibration& calib,
        std::vector<std::string> vocab, Rng& rng);

  // xi rows for a list of pairs (B x model_dim).
  Tensor encode_video(std::span<const features::PairFeatures* const> pairs) const;
  Tensor encode_music(std::span<const features::PairFeatures* const> pairs) const;

  // Projected embeddings with cross-attention between row-aligned partners.
  Tensor theta_video(const Tensor& xi_video, const Tensor& xi_music_context) const;
  Tensor theta_music(const Tensor& xi_music, const Tensor& xi_video_context) const;
  // att = 0 variants used by fast retrieval.
  Tensor theta_video_alone(const Tensor& xi_video) const;
  Tensor theta_music_alone(const Tensor& xi_music) const;

  // xi_tag rows (B x model_dim) for a list of tags.
  Matrix tag_embeddings(std::span<const std::string> tags) const;

  const nn::Matcher& matcher() const { return matcher_; }
  const quantize::PlugInTables& plugins() const { return plugins_; }
  const quantize::Calibration& calibration() const { return calib_; }
  const std::vector<std::string>& vocab() const { return text_.vocab(); }
  nn::Setting setting() const { return setting_; }
  const nn::MatcherConfig& config() const { return matcher_.cfg; }

  // Matcher weights and plug-in tables, in a fixed order.
  nn::ParamList params() const;

 private:
  nn::SequenceInput video_input(const features::PairFeatures& f) const;
  nn::SequenceInput music_input(const features::PairFeatures& f) const;

  nn::Setting setting_;
  quantize::Calibration calib_;
  nn::Matcher matcher_;
  quantize::PlugInTables plugins_;
  nn::TextEmbedder text_;
};

nlohmann::json matcher_config_json(const nn::MatcherConfig& c);
nn::MatcherConfig matcher_config_from(const nlohmann::json& j);

// The checkpoint stores every parameter tensor plus a "model.meta" record
// with the setting, matcher dimensions, calibration, vocabulary, the run's
// configuration snapshot and the training rng state.
struct Checkpoint {
  nlohmann::json config = nlohmann::json::object();
  std::string rng_state;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Checkpoint& extra);
Model load_checkpoint(const std::filesystem::path& path, Checkpoint* extra = nullptr);

}  // namespace vmr::model
