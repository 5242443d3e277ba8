#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "vmr/error.hpp"
#include "vmr/retrieval.hpp"

using namespace vmr;
using namespace vmr::retrieval;

TEST_CASE("identity embeddings retrieve every query at rank one") {
  const int p = 40;
  MusicIndex index;
  index.theta = Matrix::Identity(p, p);
  for (int i = 0; i < p; ++i) index.music_ids.push_back("m" + std::to_string(100 + i));
  std::vector<QueryResult> results;
  for (int i = 0; i < p; ++i) {
    const auto ranked = query(index.theta.row(i), index, p);
    CHECK(ranked.front() == index.music_ids[static_cast<std::size_t>(i)]);
    results.push_back({"q" + std::to_string(i), index.music_ids[static_cast<std::size_t>(i)], ranked});
  }
  const auto rep = recall_at_k(results, {1, 5, 10, 25}, p);
  for (double r : rep.recall) CHECK(r == 100.0);
  CHECK_THROWS_AS(query(index.theta.row(0), index, p + 1), ContractError);
}

TEST_CASE("rank_candidates equals a brute-force sort, ties broken by id") {
  Rng rng(77);
  for (std::size_t pool : {1u, 2u, 17u, 250u, 1000u}) {
    std::vector<double> d(pool);
    std::vector<std::string> ids(pool);
    for (std::size_t i = 0; i < pool; ++i) {
      d[i] = static_cast<double>(rng.index(pool / 3 + 1));  // many ties
      ids[i] = "id" + std::to_string(rng.next_u64() % 100000);
    }
    CHECK(rank_candidates(d, ids) == oracle::brute_force_rank(d, ids));
  }
}

TEST_CASE("recall counts hits within the top K and rejects foreign truths") {
  std::vector<QueryResult> r = {{"q1", "a", {"a", "b", "c"}}, {"q2", "b", {"a", "c", "b"}}};
  const auto rep = recall_at_k(r, {1, 2, 3}, 3);
  CHECK(rep.recall == std::vector<double>{50.0, 50.0, 100.0});
  CHECK(rep.queries == 2);
  r.push_back({"q3", "zzz", {"a", "b", "c"}});
  try {
    recall_at_k(r, {1}, 3);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("q3") != std::string::npos);
  }
}

TEST_CASE("an untrained model performs at chance level") {
  const auto feats = testing::random_features(50, 12, 5);
  const auto m = testing::small_model(nn::Setting::kSE, 6);
  EvalOptions opts;
  opts.cross = true;
  const auto rep = evaluate(m, feats, opts);
  CHECK(rep.queries == 600);
  CHECK(rep.pool_size == 50);
  for (std::size_t i = 0; i < rep.ks.size(); ++i) {
    const double chance = 100.0 * std::min(rep.ks[i], 50) / 50.0;
    INFO("K=" << rep.ks[i] << " recall " << rep.recall[i]);
    CHECK(std::abs(rep.recall[i] - chance) <= 5.0);
  }
}

TEST_CASE("fast-mode evaluation ranks by the attention-free projection") {
  const auto feats = testing::random_features(6, 2, 8);
  const auto m = testing::small_model(nn::Setting::kSE, 9);
  const auto index = build_index(m, feats);
  REQUIRE(index.music_ids.size() == 6);
  CHECK(std::is_sorted(index.music_ids.begin(), index.music_ids.end()));
  std::vector<const features::PairFeatures*> q = {&feats[3]};
  const auto res = rank_queries(m, q, index, false);
  nn::NoGradGuard g;
  const Matrix tv = m.theta_video_alone(m.encode_video(q)).value();
  std::vector<double> d;
  for (Eigen::Index i = 0; i < index.theta.rows(); ++i) d.push_back((index.theta.row(i) - tv).norm());
  std::vector<std::string> want;
  for (auto i : oracle::brute_force_rank(d, index.music_ids)) want.push_back(index.music_ids[i]);
  CHECK(res.front().ranked == want);
}

TEST_CASE("pool subsampling is seeded and K is capped at the pool") {
  const auto feats = testing::random_features(12, 1, 3);
  const auto m = testing::small_model(nn::Setting::kASE, 4);
  EvalOptions opts;
  opts.pool_size = 5;
  opts.pool_seed = 42;
  opts.keep_rankings = true;
  const auto a = evaluate(m, feats, opts);
  const auto b = evaluate(m, feats, opts);
  CHECK(a.pool_size == 5);
  CHECK(a.queries == 5);
  CHECK(a.recall == b.recall);
  CHECK(a.at(10) == 100.0);
  CHECK(a.rankings.size() == 5);
  CHECK(to_json(a).dump() == to_json(b).dump());
}
