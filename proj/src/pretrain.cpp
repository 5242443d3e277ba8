#include "vmr/pretrain.hpp"

#include <numeric>
#include <set>

#include <json.hpp>

#include "vmr/error.hpp"
#include "vmr/nn/optim.hpp"
#include "vmr/tensor_io.hpp"

namespace vmr::pretrain {

using nn::Matrix;

PretrainResult train_extractor(nn::Modality modality, const std::vector<ClipExample>& examples, int num_classes,
                               const PretrainConfig& cfg, std::uint64_t seed) {
  if (num_classes < 2) throw ValidationError("pretraining needs a vocabulary of at least 2 labels");
  if (examples.empty()) throw ValidationError("pretraining needs at least one clip");
  if (cfg.epochs < 0 || cfg.batch_size <= 0 || !(cfg.lr >= 0.0)) throw ValidationError("invalid pretraining schedule");
  for (const auto& e : examples) {
    if (e.label < 0 || e.label >= num_classes) throw ContractError("clip label outside the vocabulary");
  }
  nn::ExtractorConfig mc = cfg.model;
  mc.num_classes = num_classes;
  Rng init(derive_seed(seed, std::string("extractor-init/") + nn::modality_name(modality)));
  PretrainResult out{nn::ClipExtractor(modality, mc, init), {}, 0.0};
  nn::Adam opt(out.extractor.params(""), cfg.lr);
  Rng order_rng(derive_seed(seed, std::string("extractor-order/") + nn::modality_name(modality)));
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      std::vector<const Matrix*> clips;
      std::vector<int> labels;
      for (std::size_t i = 0; i < n; ++i) {
        clips.push_back(examples[order[start + i]].tokens);
        labels.push_back(examples[order[start + i]].label);
      }
      auto [tokens, segs] = nn::stack_clips(clips);
      opt.zero_grad();
      auto o = out.extractor.forward(nn::constant(std::move(tokens)), segs);
      nn::Tensor loss = nn::mean(nn::softmax_cross_entropy(o.logits, labels));
      loss.backward();
      opt.step();
      total += loss.item() * static_cast<double>(n);
    }
    out.epoch_loss.push_back(total / static_cast<double>(examples.size()));
  }
  out.train_accuracy = accuracy(out.extractor, examples);
  return out;
}

double accuracy(const nn::ClipExtractor& extractor, const std::vector<ClipExample>& examples) {
  if (examples.empty()) return 0.0;
  nn::NoGradGuard no_grad;
  std::size_t hits = 0;
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < examples.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, examples.size() - start);
    std::vector<const Matrix*> clips;
    for (std::size_t i = 0; i < n; ++i) clips.push_back(examples[start + i].tokens);
    auto [tokens, segs] = nn::stack_clips(clips);
    const Matrix logits = extractor.forward(nn::constant(std::move(tokens)), segs).logits.value();
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Index arg;
      logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
      if (arg == examples[start + i].label) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

std::vector<ClipExample> video_examples(const std::vector<features::PairSignals>& signals,
                                        const tagset::UnifiedTagSet& tags) {
  std::vector<ClipExample> out;
  for (const auto& s : signals) {
    const int label = tags.label_id(s.music_id);
    for (const auto& t : s.video_tokens) out.push_back({&t, label});
  }
  return out;
}

std::vector<ClipExample> music_examples(const std::vector<features::PairSignals>& signals,
                                        const tagset::UnifiedTagSet& tags) {
  std::vector<ClipExample> out;
  std::set<std::string> seen;
  for (const auto& s : signals) {
    // One entry per track: the first (trimmed) version encountered.
    if (!seen.insert(s.music_id).second) continue;
    const int label = tags.label_id(s.music_id);
    for (const auto& t : s.music->tokens) out.push_back({&t, label});
  }
  return out;
}

void save_extractor(const std::filesystem::path& path, const nn::ClipExtractor& extractor) {
  const auto& c = extractor.config();
  nlohmann::json meta = {{"modality", nn::modality_name(extractor.modality())},
                         {"model_dim", c.model_dim},
                         {"heads", c.heads},
                         {"ffn_dim", c.ffn_dim},
                         {"conv_kernel", c.conv_kernel},
                         {"blocks", c.blocks},
                         {"embed_dim", c.embed_dim},
                         {"num_classes", c.num_classes}};
  auto records = tensor_io::param_records(extractor.params(""));
  records.insert(records.begin(), tensor_io::text_record("extractor.meta", meta.dump()));
  tensor_io::write_file(path, records);
}

nn::ClipExtractor load_extractor(const std::filesystem::path& path) {
  const auto records = tensor_io::read_file(path);
  const std::string src = path.string();
  const auto meta = nlohmann::json::parse(tensor_io::find(records, "extractor.meta", src).bytes);
  nn::ExtractorConfig c;
  c.model_dim = meta.at("model_dim").get<nn::Index>();
  c.heads = meta.at("heads").get<int>();
  c.ffn_dim = meta.at("ffn_dim").get<nn::Index>();
  c.conv_kernel = meta.at("conv_kernel").get<nn::Index>();
  c.blocks = meta.at("blocks").get<int>();
  c.embed_dim = meta.at("embed_dim").get<nn::Index>();
  c.num_classes = meta.at("num_classes").get<nn::Index>();
  const auto modality = meta.at("modality").get<std::string>() == "video" ? nn::Modality::kVideo : nn::Modality::kMusic;
  Rng rng(0);
  nn::ClipExtractor e(modality, c, rng);
  auto params = e.params("");
  tensor_io::assign_params(params, records, src);
  return e;
}

}  // namespace vmr::pretrain
