#include <doctest.h>

#include <filesystem>

#include "oracles.hpp"
#include "vmr/corpus.hpp"
#include "vmr/error.hpp"
#include "vmr/tagset.hpp"

using namespace vmr;

TEST_CASE("tfidf follows the count ratio times log inverse document frequency") {
  std::vector<tagset::TagCollection> cols(4);
  cols[0] = {"a", {{"dance", 3}, {"fyp", 1}}};
  cols[1] = {"b", {{"fyp", 2}, {"sad", 2}}};
  cols[2] = {"c", {{"fyp", 1}}};
  cols[3] = {"d", {{"sad", 1}}};
  const auto stats = tagset::collect_stats(cols);
  CHECK(stats.music_count == 4);
  CHECK(stats.doc_freq.at("fyp") == 3);
  CHECK(tagset::tfidf(cols[0], stats, "dance") == doctest::Approx(0.75 * std::log(4.0 / 2.0)).epsilon(1e-15));
  // Present in three of four tracks: log(4/4) = 0.
  CHECK(tagset::tfidf(cols[0], stats, "fyp") == 0.0);
  CHECK_THROWS_AS(tagset::tfidf(cols[0], stats, "sad"), DomainError);
  CHECK(tagset::best_tag(cols[0], stats) == "dance");
  CHECK(tagset::best_tag(cols[1], stats) == "sad");
}

TEST_CASE("equal scores resolve to the lexicographically smallest tag") {
  std::vector<tagset::TagCollection> cols(3);
  cols[0] = {"a", {{"zeta", 2}, {"alpha", 2}}};
  cols[1] = {"b", {{"other", 1}}};
  cols[2] = {"c", {{"else", 1}}};
  const auto set = tagset::assign_labels(cols);
  CHECK(set.label_of_music.at("a") == "alpha");
}

TEST_CASE("assign_labels matches the brute-force oracle on random corpora") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto cols = oracle::random_collections(rng, 20, 10);
    const auto got = tagset::assign_labels(cols);
    const auto want = oracle::brute_force_labels(cols);
    REQUIRE(got.label_of_music == want);
    for (std::size_t i = 1; i < got.vocab.size(); ++i) CHECK(got.vocab[i - 1] < got.vocab[i]);
    for (const auto& [m, l] : got.label_of_music) CHECK(got.vocab[static_cast<std::size_t>(got.label_id(m))] == l);
  }
}

TEST_CASE("the oracle's exact tie detection catches ties hidden by rounding") {
  // N = 16: 1 * ln(16/2) == 3 * ln(16/8), since 8 = 2^3.
  CHECK(oracle::compare_scores(1, 1, 3, 7, 16) == 0);
  CHECK(oracle::compare_scores(2, 1, 3, 7, 16) == 1);
}

TEST_CASE("tag sets export and import losslessly") {
  const auto c = corpus::synth_corpus({}, 5);
  const auto set = tagset::assign_labels(c);
  const auto path = std::filesystem::temp_directory_path() / "vmr_tagset_test.json";
  tagset::export_tagset(set, path);
  CHECK(tagset::import_tagset(path) == set);
  std::filesystem::remove(path);
}
