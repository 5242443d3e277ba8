#include <doctest.h>

#include <cmath>
#include <numbers>

#include "vmr/corpus.hpp"
#include "vmr/error.hpp"
#include "vmr/signal.hpp"

using namespace vmr;
using namespace vmr::signal;

namespace {

corpus::MediaPair click_pair(double bpm, int seconds, double phase) {
  corpus::MediaPair p;
  p.pair_id = "click";
  p.music_id = "click";
  p.music = std::make_shared<const corpus::Pcm>(corpus::click_track(bpm, seconds, phase));
  p.video.assign(static_cast<std::size_t>(seconds), GrayFrame{8, 8, std::vector<std::uint8_t>(64, 0)});
  return p;
}

}  // namespace

TEST_CASE("filter bank of a 4-second clip is 398 x 80") {
  std::vector<double> pcm(kClipSamples, 0.0);
  const Matrix fb = fbank(pcm);
  CHECK(fb.rows() == 398);
  CHECK(fb.cols() == 80);
  CHECK(fb.minCoeff() == doctest::Approx(std::log(kLogOffset)));
  CHECK_THROWS_AS(fbank(std::vector<double>(kClipSamples - 1, 0.0)), ContractError);
}

TEST_CASE("a 1 kHz tone peaks in the mel bin whose centre is nearest 1 kHz") {
  std::vector<double> pcm(kClipSamples);
  for (int i = 0; i < kClipSamples; ++i) pcm[static_cast<std::size_t>(i)] = 0.5 * std::sin(2.0 * std::numbers::pi * 1000.0 * i / kSampleRate);
  const Matrix fb = fbank(pcm);
  const auto centres = mel_centers();
  int nearest = 0;
  for (int m = 1; m < kMelBins; ++m) {
    if (std::abs(centres[static_cast<std::size_t>(m)] - 1000.0) < std::abs(centres[static_cast<std::size_t>(nearest)] - 1000.0)) nearest = m;
  }
  for (Eigen::Index r = 0; r < fb.rows(); r += 37) {
    Eigen::Index best = 0;
    fb.row(r).maxCoeff(&best);
    CHECK(best == nearest);
  }
}

TEST_CASE("mel triangles peak at one at their centres and sum within (0, 1] between centres") {
  const auto centres = mel_centers();
  REQUIRE(centres.size() == kMelBins);
  for (int m = 0; m < kMelBins; ++m) CHECK(mel_weight(m, centres[static_cast<std::size_t>(m)]) == doctest::Approx(1.0));
  for (int m = 0; m + 1 < kMelBins; ++m) {
    const double mid = 0.5 * (centres[static_cast<std::size_t>(m)] + centres[static_cast<std::size_t>(m + 1)]);
    CHECK(mel_weight(m, mid) + mel_weight(m + 1, mid) == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("checkerboard frame resizes to uniform 0.5") {
  GrayFrame f{448, 448, std::vector<std::uint8_t>(448 * 448)};
  for (int r = 0; r < 448; ++r) {
    for (int c = 0; c < 448; ++c) f.pixels[static_cast<std::size_t>(r * 448 + c)] = ((r + c) % 2) ? 255 : 0;
  }
  const Matrix m = preprocess_frame(f);
  CHECK(m.rows() == 224);
  CHECK(m.cols() == 224);
  CHECK(m.minCoeff() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.maxCoeff() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("luminance uses the 601 weights") {
  CHECK(luminance(1, 0, 0) == doctest::Approx(0.299));
  CHECK(luminance(0, 1, 0) == doctest::Approx(0.587));
  CHECK(luminance(0, 0, 1) == doctest::Approx(0.114));
}

TEST_CASE("click tracks give the exact beat count per clip") {
  const std::pair<double, int> cases[] = {{60, 4}, {90, 6}, {120, 8}, {150, 10}};
  for (auto [bpm, n] : cases) {
    const auto stats = track_rhythm(click_pair(bpm, 16, 0.13), {});
    REQUIRE(stats.size() == 4);
    for (std::size_t t = 0; t < stats.size(); ++t) {
      INFO("bpm " << bpm << " clip " << t);
      CHECK(stats[t].n_beat == n);
      REQUIRE(stats[t].l_bar.has_value());
      CHECK(std::abs(*stats[t].l_bar - 60.0 / bpm) <= 0.02);
      CHECK(stats[t].s_beat > 0.0);
    }
  }
}

TEST_CASE("estimated tempo period matches the click spacing") {
  for (double bpm : {60.0, 90.0, 120.0, 150.0}) {
    const auto pcm = to_unit(corpus::click_track(bpm, 16, 0.13));
    const auto env = onset_envelope(pcm);
    CHECK(estimate_period_frames(env) == doctest::Approx(6000.0 / bpm).epsilon(0.03));
  }
}

TEST_CASE("silence has no beats and an undefined interval") {
  corpus::MediaPair p = click_pair(120, 8, 0.1);
  p.music = std::make_shared<const corpus::Pcm>(corpus::Pcm(8 * kSampleRate, 0));
  for (const auto& s : track_rhythm(p, {})) {
    CHECK(s.n_beat == 0);
    CHECK_FALSE(s.l_bar.has_value());
  }
}

TEST_CASE("rhythm_stats validates its input") {
  const std::vector<double> t = {0.5, 1.0, 1.5, 2.0};
  const std::vector<double> s = {1, 2, 3, 4};
  const auto r = rhythm_stats(t, s, 0.0, 4.0);
  CHECK(r.n_beat == 4);
  CHECK(r.s_beat == doctest::Approx(2.5));
  CHECK(*r.l_bar == doctest::Approx(0.5));
  const std::vector<double> one = {1.0};
  CHECK_FALSE(rhythm_stats(one, std::vector<double>{1.0}, 0.0, 4.0).l_bar.has_value());
  const std::vector<double> unsorted = {1.0, 0.5};
  CHECK_THROWS_AS(rhythm_stats(unsorted, std::vector<double>{1, 1}, 0.0, 4.0), ContractError);
  CHECK_THROWS_AS(rhythm_stats(t, s, 0.0, 1.0), ContractError);
}

TEST_CASE("block flow recovers a planted translation") {
  const auto frames = corpus::moving_block_video(2, 5.0, 3);
  const Matrix a = preprocess_frame(frames[0]);
  const Matrix b = preprocess_frame(frames[1]);
  bool found = false;
  for (const auto& v : block_flow(a, b)) {
    // Blocks fully inside the moving square (rows 80-143, cols 20-83).
    if (v.row >= 80 && v.row + 16 <= 144 && v.col >= 21 && v.col + 16 <= 84) {
      CHECK(v.dx == 5);
      CHECK(v.dy == 0);
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("identical frames have zero flow") {
  const auto frames = corpus::moving_block_video(1, 0.0, 3);
  std::vector<Matrix> same(4, preprocess_frame(frames[0]));
  CHECK(optical_flow_stat(same).m_bar == 0.0);
}

TEST_CASE("m_bar is strictly monotone in the planted speed") {
  double prev = -1.0;
  for (double speed : {0.0, 1.0, 2.0, 4.0, 6.0}) {
    const auto frames = corpus::moving_block_video(4, speed, 9);
    std::vector<Matrix> m;
    for (const auto& f : frames) m.push_back(preprocess_frame(f));
    const double v = optical_flow_stat(m).m_bar;
    INFO("speed " << speed << " m_bar " << v);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("chopping yields ceil(seconds / 4) aligned clips with padding flags") {
  corpus::MediaPair p = click_pair(120, 10, 0.1);
  const auto c = chop_pair(p);
  CHECK(c.clip_count == 3);
  REQUIRE(c.video.size() == 3);
  REQUIRE(c.music.size() == 3);
  CHECK(c.video[0].matrix.rows() == 896);
  CHECK(c.video[0].matrix.cols() == 224);
  CHECK(c.music[2].matrix.rows() == 398);
  CHECK_FALSE(c.video[1].padded);
  CHECK(c.video[2].padded);
  CHECK(c.music[2].padded);
}
