#include "vmr/fit.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "vmr/error.hpp"
#include "vmr/nn/optim.hpp"

namespace vmr::fit {

using nn::Matrix;
using nn::Tensor;

void validate(const TrainConfig& cfg) {
  cfg.weights.validate();
  if (cfg.epochs < 0) throw ValidationError("train.epochs must be >= 0");
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) throw ValidationError("train.lr must be finite and >= 0");
  if (cfg.batch_size < 2) throw ValidationError("train.batch_size must be >= 2 (in-batch negatives need a second pair)");
  if (cfg.patience < 1) throw ValidationError("train.patience must be >= 1");
  if (cfg.eval_every < 1) throw ValidationError("train.eval_every must be >= 1");
}

std::vector<Example> make_examples(const std::vector<features::PairFeatures>& pairs, const tagset::UnifiedTagSet& tags) {
  std::vector<Example> out;
  for (const auto& p : pairs) {
    auto it = tags.label_of_music.find(p.music_id);
    if (it == tags.label_of_music.end()) throw ValidationError("no unified label for music " + p.music_id);
    out.push_back({&p, it->second});
  }
  return out;
}

nlohmann::json EpochLog::to_json() const {
  nlohmann::json j = {{"epoch", epoch}, {"loss", total},         {"L_av", parts[0]}, {"L_vtag", parts[1]},
                      {"L_atag", parts[2]}, {"L_regular", parts[3]}, {"L_ce", parts[4]}};
  if (val_recall) {
    j["val_recall"] = {{"R@1", (*val_recall)[0]}, {"R@5", (*val_recall)[1]}, {"R@10", (*val_recall)[2]}, {"R@25", (*val_recall)[3]}};
  } else {
    j["val_recall"] = nullptr;
  }
  return j;
}

std::vector<std::size_t> sample_negatives(const std::vector<const Example*>& batch, Rng& rng) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::vector<std::size_t> cand;
    for (std::size_t j = 0; j < batch.size(); ++j) {
      if (batch[j]->pair->music_id != batch[i]->pair->music_id) cand.push_back(j);
    }
    if (cand.empty()) throw ValidationError("batch holds a single music track; no negative available");
    out.push_back(cand[rng.index(cand.size())]);
  }
  return out;
}

BatchLosses batch_losses(const model::Model& model, const std::vector<const Example*>& batch,
                         const std::vector<std::size_t>& negatives, const TrainConfig& cfg) {
  if (batch.size() < 2) throw ValidationError("a training batch needs at least two pairs");
  if (negatives.size() != batch.size()) throw ContractError("batch_losses: one negative per anchor required");
  const auto& m = model.matcher();
  std::vector<const features::PairFeatures*> pairs;
  std::vector<std::string> tags;
  for (const auto* e : batch) {
    pairs.push_back(e->pair);
    tags.push_back(e->tag);
  }
  std::vector<nn::Index> neg(negatives.begin(), negatives.end());
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    if (negatives[i] >= batch.size() || batch[negatives[i]]->pair->music_id == batch[i]->pair->music_id) {
      throw ContractError("batch_losses: negatives must come from a different music track in the batch");
    }
  }

  const Tensor xi_v = model.encode_video(pairs);
  const Tensor xi_m = model.encode_music(pairs);
  const Tensor xi_v_neg = nn::gather_rows(xi_v, neg);
  const Tensor xi_m_neg = nn::gather_rows(xi_m, neg);
  const Tensor xi_tag = nn::constant(model.tag_embeddings(tags));

  losses::TripletBatch tb;
  tb.theta_v_pos = model.theta_video(xi_v, xi_m);
  tb.theta_m_pos = model.theta_music(xi_m, xi_v);
  // Negatives are projected in the anchor's context.
  tb.theta_v_neg = model.theta_video(xi_v_neg, xi_m);
  tb.theta_m_neg = model.theta_music(xi_m_neg, xi_v);
  tb.theta_tag_pos = m.project_text(xi_tag);
  tb.theta_tag_neg = nn::gather_rows(tb.theta_tag_pos, neg);
  tb.phi_v_pos = m.decode(tb.theta_v_pos);
  tb.phi_m_pos = m.decode(tb.theta_m_pos);
  tb.phi_tag_pos = m.decode(tb.theta_tag_pos);
  tb.phi_v_neg = m.decode(tb.theta_v_neg);
  tb.phi_m_neg = m.decode(tb.theta_m_neg);

  losses::RegularBatch rb;
  rb.xi_v = xi_v;
  rb.xi_m = xi_m;
  rb.xi_rec_v = m.reconstruct_video(tb.theta_v_pos);
  rb.xi_rec_m = m.reconstruct_music(tb.theta_m_pos);
  rb.phi_v = tb.phi_v_pos;
  rb.phi_m = tb.phi_m_pos;
  rb.phi_tag = tb.phi_tag_pos;
  rb.xi_tag = xi_tag;
  rb.theta_v = tb.theta_v_pos;
  rb.theta_m = tb.theta_m_pos;
  rb.theta_tag = tb.theta_tag_pos;

  const Tensor logits = m.match_logits(nn::concat_rows({tb.theta_v_pos, tb.theta_v_pos}),
                                       nn::concat_rows({tb.theta_m_pos, tb.theta_m_neg}));
  std::vector<int> labels(batch.size(), 1);
  labels.resize(2 * batch.size(), 0);

  BatchLosses out;
  const double margin = cfg.weights.margin;
  out.parts.av = losses::loss_av(tb, margin);
  out.parts.vtag = losses::loss_vtag(tb, margin);
  out.parts.atag = losses::loss_atag(tb, margin, cfg.symmetrize_atag);
  out.parts.regular = losses::loss_regular(rb);
  out.parts.ce = losses::loss_ce(logits, labels);
  out.total = losses::total_loss(out.parts, cfg.weights);
  return out;
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, const std::vector<Example>& data,
                                                   int batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(order.size(), s + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s), order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  auto single_music = [&](const std::vector<std::size_t>& b) {
    for (auto i : b) {
      if (data[i].pair->music_id != data[b.front()].pair->music_id) return false;
    }
    return true;
  };
  // A batch without a second track (or a lone leftover pair) joins a neighbour.
  for (std::size_t i = 0; i < batches.size() && batches.size() > 1;) {
    if (batches[i].size() < 2 || single_music(batches[i])) {
      const std::size_t into = i > 0 ? i - 1 : 1;
      batches[into].insert(batches[into].end(), batches[i].begin(), batches[i].end());
      batches.erase(batches.begin() + static_cast<std::ptrdiff_t>(i));
      i = 0;
    } else {
      ++i;
    }
  }
  return batches;
}

std::vector<Matrix> snapshot(const nn::ParamList& params) {
  std::vector<Matrix> out;
  for (const auto& p : params) out.push_back(p.tensor.value());
  return out;
}

void restore(nn::ParamList& params, const std::vector<Matrix>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor.mutable_value() = values[i];
}

std::array<double, 4> val_recall(const model::Model& model, const std::vector<features::PairFeatures>& val, bool cross) {
  retrieval::EvalOptions opts;
  opts.cross = cross;
  const auto r = retrieval::evaluate(model, val, opts);
  return {r.at(1), r.at(5), r.at(10), r.at(25)};
}

}  // namespace

FitResult fit(const std::vector<Example>& train, const std::vector<features::PairFeatures>& val,
              const std::vector<std::string>& vocab, const TrainConfig& cfg, const EpochHook& hook) {
  validate(cfg);
  if (train.size() < 2) throw ValidationError("training needs at least two pairs");
  std::set<std::string> music;
  for (const auto& e : train) music.insert(e.pair->music_id);
  if (music.size() < 2) throw ValidationError("training needs at least two distinct music tracks");

  std::vector<signal::RhythmStats> rhythm;
  std::vector<signal::FlowStat> flow;
  for (const auto& e : train) {
    rhythm.insert(rhythm.end(), e.pair->rhythm.begin(), e.pair->rhythm.end());
    flow.insert(flow.end(), e.pair->flow.begin(), e.pair->flow.end());
  }
  const auto calib = quantize::calibrate(rhythm, flow, cfg.quant);
  Rng init(derive_seed(cfg.seed, "matcher-init"));
  FitResult out{model::Model(cfg.model, cfg.setting, calib, vocab, init), {}, 0, -1.0, {}};

  nn::ParamList params = out.model.params();
  nn::Adam opt(params, cfg.lr);
  Rng order_rng(derive_seed(cfg.seed, "fit-order"));
  Rng neg_rng(derive_seed(cfg.seed, "fit-negatives"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<Matrix> best;
  int stale = 0;
  if (!val.empty()) {
    out.best_val_r1 = val_recall(out.model, val, cfg.cross_inference)[0];
    best = snapshot(params);
  }
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    EpochLog log;
    log.epoch = epoch;
    std::size_t seen = 0;
    for (const auto& idx : make_batches(order, train, cfg.batch_size)) {
      std::vector<const Example*> batch;
      for (auto i : idx) batch.push_back(&train[i]);
      const auto negatives = sample_negatives(batch, neg_rng);
      opt.zero_grad();
      BatchLosses bl = batch_losses(out.model, batch, negatives, cfg);
      const double n = static_cast<double>(batch.size());
      log.total += bl.total.item() * n;
      const Tensor* parts[5] = {&bl.parts.av, &bl.parts.vtag, &bl.parts.atag, &bl.parts.regular, &bl.parts.ce};
      for (std::size_t k = 0; k < 5; ++k) log.parts[k] += parts[k]->item() * n;
      seen += batch.size();
      bl.total.backward();
      opt.step();
    }
    log.total /= static_cast<double>(seen);
    for (auto& p : log.parts) p /= static_cast<double>(seen);
    if (!std::isfinite(log.total)) throw Error("training diverged at epoch " + std::to_string(epoch));

    bool stop = false;
    if (!val.empty() && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      log.val_recall = val_recall(out.model, val, cfg.cross_inference);
      if ((*log.val_recall)[0] > out.best_val_r1) {
        out.best_val_r1 = (*log.val_recall)[0];
        out.best_epoch = epoch;
        best = snapshot(params);
        stale = 0;
      } else if (++stale >= cfg.patience) {
        stop = true;
      }
    }
    out.log.push_back(log);
    if (hook) hook(log);
    if (stop) break;
  }
  if (!val.empty()) {
    restore(params, best);
  } else {
    out.best_epoch = cfg.epochs;
  }
  out.rng_state = order_rng.state();
  return out;
}

}  // namespace vmr::fit
