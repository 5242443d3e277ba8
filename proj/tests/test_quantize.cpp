#include <doctest.h>

#include <cmath>
#include <limits>

#include "vmr/error.hpp"
#include "vmr/nn/ops.hpp"
#include "vmr/quantize.hpp"

using namespace vmr;
using namespace vmr::quantize;

TEST_CASE("discretize maps into uniform bins and clamps out-of-range values") {
  const BinSpec b{0.0, 1.0, 4};
  CHECK(discretize(0.0, b) == 0);
  CHECK(discretize(0.24, b) == 0);
  CHECK(discretize(0.25, b) == 1);
  CHECK(discretize(0.99, b) == 3);
  CHECK(discretize(1.0, b) == 3);
  CHECK(discretize(-5.0, b) == 0);
  CHECK(discretize(7.0, b) == 3);
  CHECK(discretize(std::nullopt, b) == 4);
  CHECK(discretize(5.0, BinSpec{0.0, 10.0, 20}) == 10);
  CHECK(discretize(std::numeric_limits<double>::infinity(), b) == 3);
  CHECK_THROWS_AS(discretize(std::nan(""), b), ContractError);
  CHECK_THROWS_AS(discretize(0.5, BinSpec{0, 1, 0}), ValidationError);
}

TEST_CASE("discretize is monotone") {
  const BinSpec b{-2.0, 3.0, 17};
  int prev = -1;
  for (double v = -4.0; v <= 5.0; v += 0.01) {
    const int k = discretize(v, b);
    CHECK(k >= prev);
    CHECK(k >= 0);
    CHECK(k < 17);
    prev = k;
  }
}

TEST_CASE("beat counts saturate at the cap") {
  CHECK(count_bucket(0, 32) == 0);
  CHECK(count_bucket(31, 32) == 31);
  CHECK(count_bucket(40, 32) == 32);
  CHECK_THROWS_AS(count_bucket(-1, 32), ContractError);
}

TEST_CASE("percentile interpolates linearly between order statistics") {
  const std::vector<double> v = {4, 1, 3, 2, 5};
  CHECK(percentile(v, 0) == 1.0);
  CHECK(percentile(v, 100) == 5.0);
  CHECK(percentile(v, 50) == 3.0);
  CHECK(percentile(v, 12.5) == doctest::Approx(1.5));
  CHECK_THROWS_AS(percentile({}, 50), ContractError);
}

TEST_CASE("calibration skips undefined statistics and round-trips through JSON") {
  std::vector<signal::RhythmStats> r;
  for (int i = 0; i < 100; ++i) r.push_back({i % 7, 0.1 * i, i % 3 ? std::optional<double>(0.3 + 0.001 * i) : std::nullopt});
  r.push_back({0, 999.0, std::nullopt});  // no beats: strength ignored
  std::vector<signal::FlowStat> f;
  for (int i = 0; i < 50; ++i) f.push_back({0.2 * i});
  const auto c = calibrate(r, f, {});
  CHECK(c.strength.hi < 100.0);
  CHECK(c.interval.lo >= 0.3);
  CHECK(c.magnitude.hi <= 9.8);
  CHECK(calibration_from_json(to_json(c)) == c);

  const auto code = encode_rhythm({3, 0.5, std::nullopt}, c);
  CHECK(code.n == 3);
  CHECK(code.l == c.interval.bins);
}

TEST_CASE("plug-in tables have the documented widths and reject bad codes") {
  Calibration c;
  Rng rng(1);
  PlugInTables t(c, rng);
  const std::vector<RhythmCode> codes = {{0, 0, 0}, {32, 32, 32}};
  const auto r = t.rhythm(codes);
  CHECK(r.rows() == 2);
  CHECK(r.cols() == 512);
  const std::vector<int> fc = {0, 32};
  CHECK(t.flow(fc).cols() == 512);
  CHECK(t.rhythm(codes).value().cwiseAbs().maxCoeff() <= 0.05);
  const std::vector<RhythmCode> bad = {{33, 0, 0}};
  CHECK_THROWS_AS(t.rhythm(bad), ContractError);
  CHECK(t.params().size() == 4);
}

TEST_CASE("used table rows receive gradient and unused rows none") {
  Calibration c;
  Rng rng(2);
  PlugInTables t(c, rng);
  const std::vector<RhythmCode> codes = {{3, 5, 7}};
  nn::sum(t.rhythm(codes)).backward();
  const auto ps = t.params();
  const nn::Matrix& g_count = ps[0].tensor.grad();
  REQUIRE(g_count.size() > 0);
  CHECK(g_count.row(3).cwiseAbs().minCoeff() > 0.0);
  CHECK(g_count.row(4).cwiseAbs().maxCoeff() == 0.0);
  CHECK(ps[1].tensor.grad().row(5).cwiseAbs().minCoeff() > 0.0);
  CHECK(ps[2].tensor.grad().row(7).cwiseAbs().minCoeff() > 0.0);
  const nn::Matrix& g_flow = ps[3].tensor.grad();
  CHECK((g_flow.size() == 0 || g_flow.cwiseAbs().maxCoeff() == 0.0));
}

TEST_CASE("zero tables give zero embeddings") {
  Calibration c;
  Rng rng(3);
  PlugInTables t(c, rng);
  for (auto& p : t.params()) {
    nn::Tensor x = p.tensor;
    x.mutable_value().setZero();
  }
  const std::vector<RhythmCode> codes = {{1, 2, 3}};
  const std::vector<int> fc = {6};
  CHECK(t.rhythm(codes).value().isZero());
  CHECK(t.flow(fc).value().isZero());
}
