#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "vmr/corpus.hpp"
#include "vmr/error.hpp"
#include "vmr/media_io.hpp"

using namespace vmr;
using namespace vmr::corpus;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vmr_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("synthetic corpora are deterministic and seed dependent") {
  SynthSpec s;
  s.music_count = 4;
  s.videos_per_music = 2;
  const Corpus a = synth_corpus(s, 3), b = synth_corpus(s, 3), c = synth_corpus(s, 4);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.pairs().size() == 8);
  CHECK(a.music_count() == 4);
  for (const auto& p : a.pairs()) {
    CHECK(p.seconds() >= s.min_seconds);
    CHECK(p.seconds() <= s.max_seconds);
    CHECK(p.music->size() == static_cast<std::size_t>(p.seconds()) * kSampleRate);
    CHECK_FALSE(p.tags.empty());
  }
}

TEST_CASE("planted tempo maps to a monotone flow speed") {
  SynthSpec s;
  double prev = -1.0;
  for (double bpm = s.tempo_min_bpm; bpm <= s.tempo_max_bpm; bpm += 10.0) {
    const double v = speed_for_tempo(bpm, s);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("corpora survive a manifest round trip") {
  SynthSpec s;
  s.music_count = 3;
  s.videos_per_music = 2;
  s.min_seconds = 5;
  s.max_seconds = 6;
  const Corpus c = synth_corpus(s, 9);
  const fs::path root = scratch("roundtrip");
  const fs::path manifest = save_corpus(c, root);
  CHECK(load_corpus(root, manifest) == c);
  fs::remove_all(root);
}

TEST_CASE("manifest errors are reported with their cause") {
  const fs::path root = scratch("bad_manifest");
  CHECK_THROWS_AS(load_corpus(root, root / "none.json"), LoadError);
  std::ofstream(root / "m.json") << "{not json";
  CHECK_THROWS_AS(load_corpus(root, root / "m.json"), LoadError);
  std::ofstream(root / "m2.json") << R"({"pairs": [{"pair_id": "p"}]})";
  CHECK_THROWS_AS(load_corpus(root, root / "m2.json"), ValidationError);
  fs::remove_all(root);
}

TEST_CASE("videos longer than their music are trimmed to the shorter length") {
  MediaPair p;
  p.pair_id = "p";
  p.music_id = "m";
  p.tags = {"x"};
  p.video.assign(9, GrayFrame{4, 4, std::vector<std::uint8_t>(16, 0)});
  p.music = std::make_shared<const Pcm>(Pcm(7 * kSampleRate + 100, 0));
  trim_pair(p);
  CHECK(p.seconds() == 7);
  CHECK(p.music->size() == 7u * kSampleRate);
}

TEST_CASE("duplicate pair ids and unknown ids are rejected") {
  SynthSpec s;
  s.music_count = 2;
  s.videos_per_music = 1;
  auto pairs = synth_corpus(s, 1).pairs();
  pairs.push_back(pairs.front());
  CHECK_THROWS_AS(Corpus{pairs}, ValidationError);
  CHECK_THROWS_AS(synth_corpus(s, 1).pair("nope"), DomainError);
}

TEST_CASE("splits partition by music and are seeded") {
  SynthSpec s;
  s.music_count = 10;
  s.videos_per_music = 2;
  s.min_seconds = 4;
  s.max_seconds = 4;
  const Corpus c = synth_corpus(s, 2);
  const Split a = split_corpus(c, {0.6, 0.2, 0.2, 7});
  const Split b = split_corpus(c, {0.6, 0.2, 0.2, 7});
  CHECK(a.train == b.train);
  CHECK(a.train.music_count() == 6);
  CHECK(a.val.music_count() == 2);
  CHECK(a.test.music_count() == 2);
  std::set<std::string> seen;
  for (const Corpus* part : {&a.train, &a.val, &a.test}) {
    for (const auto& [m, _] : part->music_index()) CHECK(seen.insert(m).second);
  }
  CHECK(a.train.pairs().size() + a.val.pairs().size() + a.test.pairs().size() == c.pairs().size());
  CHECK_THROWS_AS(split_corpus(c, {0.5, 0.1, 0.1, 0}), ValidationError);
}

TEST_CASE("media files round trip and malformed audio is rejected") {
  const fs::path root = scratch("media");
  const std::vector<GrayFrame> frames(3, GrayFrame{2, 3, {1, 2, 3, 4, 5, 6}});
  write_video(root / "v.bin", frames);
  CHECK(read_video(root / "v.bin") == frames);
  const std::vector<std::int16_t> pcm = {0, 100, -100, 32767, -32768};
  write_wav(root / "a.wav", pcm);
  CHECK(read_wav(root / "a.wav") == pcm);
  std::ofstream(root / "bad.wav") << "RIFFxxxx";
  CHECK_THROWS_AS(read_wav(root / "bad.wav"), LoadError);
  fs::remove_all(root);
}
