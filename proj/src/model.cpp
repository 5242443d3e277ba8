#include "vmr/model.hpp"

#include "vmr/error.hpp"
#include "vmr/tensor_io.hpp"

namespace vmr::model {

Model::Model(const nn::MatcherConfig& cfg, nn::Setting setting, const quantize::Calibration& calib,
             std::vector<std::string> vocab, Rng& rng)
    : setting_(setting),
      calib_(calib),
      matcher_(cfg, rng),
      plugins_(calib, rng),
      text_(std::move(vocab), cfg.model_dim) {
  if (cfg.feature_dim != quantize::kFlowDim || cfg.feature_dim != quantize::kCountDim + quantize::kStrengthDim + quantize::kIntervalDim) {
    throw ValidationError("clip feature width must equal the plug-in width (512)");
  }
}

nn::SequenceInput Model::video_input(const features::PairFeatures& f) const {
  nn::SequenceInput in;
  in.clips = nn::constant(f.video);
  in.mask.assign(static_cast<std::size_t>(f.video.rows()), true);
  in.track = nn::constant(f.video_track);
  if (setting_ == nn::Setting::kSER) {
    std::vector<int> codes;
    for (const auto& s : f.flow) codes.push_back(quantize::encode_flow(s, calib_));
    in.plug = plugins_.flow(codes);
  }
  return in;
}

nn::SequenceInput Model::music_input(const features::PairFeatures& f) const {
  nn::SequenceInput in;
  in.clips = nn::constant(f.music);
  in.mask.assign(static_cast<std::size_t>(f.music.rows()), true);
  in.track = nn::constant(f.music_track);
  if (setting_ == nn::Setting::kSER) {
    std::vector<quantize::RhythmCode> codes;
    for (const auto& r : f.rhythm) codes.push_back(quantize::encode_rhythm(r, calib_));
    in.plug = plugins_.rhythm(codes);
  }
  return in;
}

Tensor Model::encode_video(std::span<const features::PairFeatures* const> pairs) const {
  std::vector<nn::SequenceInput> inputs;
  for (const auto* p : pairs) inputs.push_back(video_input(*p));
  return matcher_.video_encoder(inputs, setting_);
}

Tensor Model::encode_music(std::span<const features::PairFeatures* const> pairs) const {
  std::vector<nn::SequenceInput> inputs;
  for (const auto* p : pairs) inputs.push_back(music_input(*p));
  return matcher_.music_encoder(inputs, setting_);
}

Tensor Model::theta_video(const Tensor& xi_video, const Tensor& xi_music_context) const {
  return matcher_.project_video(xi_video, matcher_.attend_video(xi_video, xi_music_context));
}

Tensor Model::theta_music(const Tensor& xi_music, const Tensor& xi_video_context) const {
  return matcher_.project_music(xi_music, matcher_.attend_music(xi_music, xi_video_context));
}

Tensor Model::theta_video_alone(const Tensor& xi_video) const { return matcher_.proj_video(xi_video); }
Tensor Model::theta_music_alone(const Tensor& xi_music) const { return matcher_.proj_music(xi_music); }

Matrix Model::tag_embeddings(std::span<const std::string> tags) const {
  Matrix out(static_cast<nn::Index>(tags.size()), text_.dim());
  for (std::size_t i = 0; i < tags.size(); ++i) out.row(static_cast<nn::Index>(i)) = text_.embed(tags[i]);
  return out;
}

nn::ParamList Model::params() const {
  nn::ParamList out = matcher_.params();
  for (auto& p : plugins_.params()) out.push_back(p);
  return out;
}

nlohmann::json matcher_config_json(const nn::MatcherConfig& c) {
  return {{"feature_dim", c.feature_dim}, {"model_dim", c.model_dim},       {"proj_dim", c.proj_dim},
          {"heads", c.heads},             {"ffn_dim", c.ffn_dim},           {"encoder_layers", c.encoder_layers},
          {"mlp_hidden", c.mlp_hidden},   {"classifier_hidden", c.classifier_hidden}, {"max_seq", c.max_seq}};
}

nn::MatcherConfig matcher_config_from(const nlohmann::json& j) {
  nn::MatcherConfig c;
  c.feature_dim = j.at("feature_dim").get<nn::Index>();
  c.model_dim = j.at("model_dim").get<nn::Index>();
  c.proj_dim = j.at("proj_dim").get<nn::Index>();
  c.heads = j.at("heads").get<int>();
  c.ffn_dim = j.at("ffn_dim").get<nn::Index>();
  c.encoder_layers = j.at("encoder_layers").get<int>();
  c.mlp_hidden = j.at("mlp_hidden").get<nn::Index>();
  c.classifier_hidden = j.at("classifier_hidden").get<nn::Index>();
  c.max_seq = j.at("max_seq").get<nn::Index>();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Checkpoint& extra) {
  nlohmann::json meta = {{"setting", nn::setting_name(model.setting())},
                         {"matcher", matcher_config_json(model.config())},
                         {"calibration", quantize::to_json(model.calibration())},
                         {"vocab", model.vocab()},
                         {"config", extra.config},
                         {"rng_state", extra.rng_state}};
  auto records = tensor_io::param_records(model.params());
  records.insert(records.begin(), tensor_io::text_record("model.meta", meta.dump()));
  tensor_io::write_file(path, records);
}

Model load_checkpoint(const std::filesystem::path& path, Checkpoint* extra) {
  const auto records = tensor_io::read_file(path);
  const std::string src = path.string();
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(tensor_io::find(records, "model.meta", src).bytes);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(src, std::string("malformed model metadata (") + e.what() + ")");
  }
  Rng rng(0);
  Model m(matcher_config_from(meta.at("matcher")), nn::parse_setting(meta.at("setting").get<std::string>()),
          quantize::calibration_from_json(meta.at("calibration")), meta.at("vocab").get<std::vector<std::string>>(), rng);
  auto params = m.params();
  tensor_io::assign_params(params, records, src);
  if (extra) {
    extra->config = meta.at("config");
    extra->rng_state = meta.at("rng_state").get<std::string>();
  }
  return m;
}

}  // namespace vmr::model
