#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vmr/features.hpp"
#include "vmr/model.hpp"

namespace vmr::retrieval {

using nn::Matrix;

// One row per distinct music_id, ids ascending. `theta` holds the
// context-free projections (fast mode); `xi` the encoder outputs that the
// cross-attention path needs per query.
struct MusicIndex {
  std::vector<std::string> music_ids;
  Matrix theta;
  Matrix xi;
  std::string metric = "euclidean";
};

// For every music the pair with the most clips (first in corpus order on
// ties) represents the track.
MusicIndex build_index(const model::Model& model, const std::vector<features::PairFeatures>& pairs);

// Candidate order by ascending distance, ties by music_id. `ids` and
// `distances` are parallel; the result holds positions into them.
std::vector<std::size_t> rank_candidates(std::span<const double> distances, std::span<const std::string> ids);

// Top-k music ids for one 1 x D query against the index rows.
std::vector<std::string> query(const Matrix& theta_video, const MusicIndex& index, std::size_t k);

struct QueryResult {
  std::string pair_id;
  std::string truth;
  std::vector<std::string> ranked;  // full candidate order
};

struct RetrievalReport {
  std::vector<int> ks;
  std::vector<double> recall;  // percent, parallel to ks
  std::size_t pool_size = 0;
  std::size_t queries = 0;
  std::string setting;
  std::string mode;          // "cross" or "fast"
  std::string config_hash;
  std::vector<QueryResult> rankings;  // kept only when requested

  double at(int k) const;
};

// Percentage of queries whose truth appears in the first K entries.
RetrievalReport recall_at_k(const std::vector<QueryResult>& results, const std::vector<int>& ks, std::size_t pool_size);

struct EvalOptions {
  std::vector<int> ks = {1, 5, 10, 25};
  bool cross = true;           // attention against each candidate; false: att = 0
  std::size_t pool_size = 0;   // 0: every distinct music in the split
  std::uint64_t pool_seed = 0;
  bool keep_rankings = false;
};

// Video queries against the split's music. K values larger than the pool
// are capped at the pool size. Queries whose music is outside a subsampled
// pool are skipped.
RetrievalReport evaluate(const model::Model& model, const std::vector<features::PairFeatures>& pairs,
                         const EvalOptions& opts);

// Distances of every query to every index row, ranked; the general path
// behind evaluate(), exposed for tests.
std::vector<QueryResult> rank_queries(const model::Model& model, const std::vector<const features::PairFeatures*>& queries,
                                      const MusicIndex& index, bool cross);

nlohmann::json to_json(const RetrievalReport& r);

struct TableRow {
  std::string system;
  std::string setting;
  const RetrievalReport* report = nullptr;
};
// Plain-text table: System | Settings | Recall@K (%) for each K.
std::string format_table(const std::vector<TableRow>& rows);

}  // namespace vmr::retrieval
