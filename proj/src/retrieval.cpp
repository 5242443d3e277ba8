#include "vmr/retrieval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "vmr/error.hpp"

namespace vmr::retrieval {

using nn::Tensor;

namespace {

std::vector<const features::PairFeatures*> representatives(const std::vector<features::PairFeatures>& pairs) {
  std::map<std::string, const features::PairFeatures*> best;
  for (const auto& p : pairs) {
    auto& slot = best[p.music_id];
    if (!slot || p.clips() > slot->clips()) slot = &p;
  }
  std::vector<const features::PairFeatures*> out;
  for (const auto& [id, p] : best) out.push_back(p);
  return out;
}

Matrix rows_of(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(static_cast<nn::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<nn::Index>(i)) = m.row(static_cast<nn::Index>(idx[i]));
  return out;
}

}  // namespace

MusicIndex build_index(const model::Model& model, const std::vector<features::PairFeatures>& pairs) {
  if (pairs.empty()) throw ValidationError("cannot build a music index from an empty split");
  nn::NoGradGuard no_grad;
  const auto reps = representatives(pairs);
  MusicIndex index;
  for (const auto* p : reps) index.music_ids.push_back(p->music_id);
  const Tensor xi = model.encode_music(reps);
  index.xi = xi.value();
  index.theta = model.theta_music_alone(xi).value();
  if (!index.theta.allFinite()) throw Error("music index holds non-finite values");
  return index;
}

std::vector<std::size_t> rank_candidates(std::span<const double> distances, std::span<const std::string> ids) {
  if (distances.size() != ids.size()) throw ContractError("rank_candidates: distances and ids differ in length");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (distances[a] != distances[b]) return distances[a] < distances[b];
    return ids[a] < ids[b];
  });
  return order;
}

std::vector<std::string> query(const Matrix& theta_video, const MusicIndex& index, std::size_t k) {
  if (theta_video.rows() != 1 || theta_video.cols() != index.theta.cols()) {
    throw ContractError("query: expected a 1 x " + std::to_string(index.theta.cols()) + " embedding");
  }
  if (k > index.music_ids.size()) throw ContractError("query: K exceeds the pool size");
  std::vector<double> d(index.music_ids.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (index.theta.row(static_cast<nn::Index>(i)) - theta_video).norm();
  const auto order = rank_candidates(d, index.music_ids);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(index.music_ids[order[i]]);
  return out;
}

double RetrievalReport::at(int k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return recall[i];
  }
  throw ContractError("report holds no Recall@" + std::to_string(k));
}

RetrievalReport recall_at_k(const std::vector<QueryResult>& results, const std::vector<int>& ks, std::size_t pool_size) {
  if (ks.empty()) throw ValidationError("recall_at_k: empty K list");
  if (results.empty()) throw ValidationError("recall_at_k: no queries");
  RetrievalReport r;
  r.ks = ks;
  r.pool_size = pool_size;
  r.queries = results.size();
  std::vector<std::size_t> hits(ks.size(), 0);
  for (const auto& q : results) {
    const auto it = std::find(q.ranked.begin(), q.ranked.end(), q.truth);
    if (it == q.ranked.end()) throw ValidationError("query " + q.pair_id + ": true music " + q.truth + " is not in the pool");
    const auto pos = static_cast<std::size_t>(it - q.ranked.begin());
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (ks[i] <= 0) throw ValidationError("recall_at_k: K must be positive");
      if (pos < static_cast<std::size_t>(ks[i])) ++hits[i];
    }
  }
  for (auto h : hits) r.recall.push_back(100.0 * static_cast<double>(h) / static_cast<double>(results.size()));
  return r;
}

std::vector<QueryResult> rank_queries(const model::Model& model, const std::vector<const features::PairFeatures*>& queries,
                                      const MusicIndex& index, bool cross) {
  nn::NoGradGuard no_grad;
  const std::size_t pool = index.music_ids.size();
  const Matrix xi_v = model.encode_video(queries).value();
  std::vector<QueryResult> out;
  Matrix theta_v_alone;
  if (!cross) theta_v_alone = model.theta_video_alone(nn::constant(xi_v)).value();
  const Tensor xi_m = nn::constant(index.xi);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    std::vector<double> d(pool);
    if (cross) {
      // The query attends to each candidate and each candidate to the query.
      const Tensor xv = nn::constant(xi_v.row(static_cast<nn::Index>(q)).replicate(static_cast<nn::Index>(pool), 1));
      const Matrix tv = model.theta_video(xv, xi_m).value();
      const Matrix tm = model.theta_music(xi_m, xv).value();
      for (std::size_t c = 0; c < pool; ++c) d[c] = (tv.row(static_cast<nn::Index>(c)) - tm.row(static_cast<nn::Index>(c))).norm();
    } else {
      for (std::size_t c = 0; c < pool; ++c) {
        d[c] = (index.theta.row(static_cast<nn::Index>(c)) - theta_v_alone.row(static_cast<nn::Index>(q))).norm();
      }
    }
    QueryResult r{queries[q]->pair_id, queries[q]->music_id, {}};
    for (auto i : rank_candidates(d, index.music_ids)) r.ranked.push_back(index.music_ids[i]);
    out.push_back(std::move(r));
  }
  return out;
}

RetrievalReport evaluate(const model::Model& model, const std::vector<features::PairFeatures>& pairs,
                         const EvalOptions& opts) {
  MusicIndex index = build_index(model, pairs);
  if (opts.pool_size > 0 && opts.pool_size < index.music_ids.size()) {
    std::vector<std::size_t> pick(index.music_ids.size());
    std::iota(pick.begin(), pick.end(), 0);
    Rng rng(derive_seed(opts.pool_seed, "eval-pool"));
    rng.shuffle(pick);
    pick.resize(opts.pool_size);
    std::sort(pick.begin(), pick.end());
    MusicIndex sub;
    for (auto i : pick) sub.music_ids.push_back(index.music_ids[i]);
    sub.theta = rows_of(index.theta, pick);
    sub.xi = rows_of(index.xi, pick);
    index = std::move(sub);
  }
  const std::set<std::string> pool(index.music_ids.begin(), index.music_ids.end());
  std::vector<const features::PairFeatures*> queries;
  for (const auto& p : pairs) {
    if (pool.count(p.music_id)) queries.push_back(&p);
  }
  auto results = rank_queries(model, queries, index, opts.cross);
  std::vector<int> ks;
  for (int k : opts.ks) ks.push_back(std::min<int>(k, static_cast<int>(index.music_ids.size())));
  RetrievalReport r = recall_at_k(results, ks, index.music_ids.size());
  r.ks = opts.ks;
  r.setting = nn::setting_name(model.setting());
  r.mode = opts.cross ? "cross" : "fast";
  if (opts.keep_rankings) r.rankings = std::move(results);
  return r;
}

nlohmann::json to_json(const RetrievalReport& r) {
  nlohmann::json recall = nlohmann::json::object();
  for (std::size_t i = 0; i < r.ks.size(); ++i) recall["R@" + std::to_string(r.ks[i])] = r.recall[i];
  nlohmann::json j = {{"setting", r.setting}, {"mode", r.mode},       {"pool_size", r.pool_size},
                      {"queries", r.queries}, {"ks", r.ks},           {"recall", recall},
                      {"config_hash", r.config_hash}};
  if (!r.rankings.empty()) {
    nlohmann::json q = nlohmann::json::array();
    for (const auto& x : r.rankings) q.push_back({{"pair_id", x.pair_id}, {"truth", x.truth}, {"ranked", x.ranked}});
    j["rankings"] = q;
  }
  return j;
}

std::string format_table(const std::vector<TableRow>& rows) {
  if (rows.empty()) return "";
  const auto& ks = rows.front().report->ks;
  std::ostringstream s;
  char buf[64];
  s << "System            | Settings | Recall@K (%)\n";
  s << "                  |          |";
  for (int k : ks) {
    std::snprintf(buf, sizeof buf, " K=%-6d", k);
    s << buf;
  }
  s << "\n";
  s << std::string(30 + 9 * ks.size(), '-') << "\n";
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%-18s| %-9s|", row.system.c_str(), row.setting.c_str());
    s << buf;
    for (int k : ks) {
      std::snprintf(buf, sizeof buf, " %-8.2f", row.report->at(k));
      s << buf;
    }
    s << "\n";
  }
  return s.str();
}

}  // namespace vmr::retrieval
