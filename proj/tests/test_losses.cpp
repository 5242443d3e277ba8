#include <doctest.h>

#include "grad_check.hpp"
#include "oracles.hpp"
#include "vmr/error.hpp"
#include "vmr/losses.hpp"
#include "vmr/nn/ops.hpp"

using namespace vmr;
using namespace vmr::nn;
using vmr::testing::random_matrix;

namespace {

struct Fixture {
  Matrix tv, tm, tt, tvn, tmn, ttn, pv, pm, pt, pvn, pmn;
  Matrix xv, xm, xrv, xrm, phv, phm, pht, xt, thv, thm, tht;
  explicit Fixture(std::uint64_t seed) {
    Rng rng(seed);
    for (Matrix* m : {&tv, &tm, &tt, &tvn, &tmn, &ttn}) *m = random_matrix(3, 4, rng, 0.5);
    for (Matrix* m : {&pv, &pm, &pt, &pvn, &pmn}) *m = random_matrix(3, 6, rng, 0.5);
    for (Matrix* m : {&xv, &xm, &xrv, &xrm, &phv, &phm, &pht, &xt}) *m = random_matrix(3, 6, rng);
    for (Matrix* m : {&thv, &thm, &tht}) *m = random_matrix(3, 4, rng);
  }
  losses::TripletBatch triplets() const {
    auto c = [](const Matrix& m) { return constant(m); };
    return {c(tv), c(tm), c(tt), c(tvn), c(tmn), c(ttn), c(pv), c(pm), c(pt), c(pvn), c(pmn)};
  }
  losses::RegularBatch regular() const {
    auto c = [](const Matrix& m) { return constant(m); };
    return {c(xv), c(xm), c(xrv), c(xrm), c(phv), c(phm), c(pht), c(xt), c(thv), c(thm), c(tht)};
  }
};

}  // namespace

TEST_CASE("each triplet term matches the scalar oracle") {
  for (double margin : {0.1, 1.0, 4.0}) {
    const Fixture f(7);
    const auto terms = losses::triplet_terms(f.triplets(), margin);
    const double want[8] = {
        oracle::triplet(f.tv, f.tm, f.tmn, margin), oracle::triplet(f.tm, f.tv, f.tvn, margin),
        oracle::triplet(f.tv, f.tt, f.tvn, margin), oracle::triplet(f.tt, f.tv, f.ttn, margin),
        oracle::triplet(f.pt, f.pv, f.pvn, margin), oracle::triplet(f.tm, f.tt, f.tmn, margin),
        oracle::triplet(f.tt, f.tm, f.tmn, margin), oracle::triplet(f.pt, f.pm, f.pmn, margin),
    };
    for (int i = 0; i < 8; ++i) {
      INFO("term " << i << " margin " << margin);
      CHECK(std::abs(terms[static_cast<std::size_t>(i)].item() - want[i]) <= 1e-12);
    }
    const auto sym = losses::triplet_terms(f.triplets(), margin, true);
    CHECK(std::abs(sym[6].item() - oracle::triplet(f.tt, f.tm, f.ttn, margin)) <= 1e-12);

    const auto b = f.triplets();
    CHECK(std::abs(losses::loss_av(b, margin).item() - (want[0] + want[1])) <= 1e-12);
    CHECK(std::abs(losses::loss_vtag(b, margin).item() - (want[2] + want[3] + want[4])) <= 1e-12);
    CHECK(std::abs(losses::loss_atag(b, margin).item() - (want[5] + want[6] + want[7])) <= 1e-12);
  }
}

TEST_CASE("each regularization term matches the scalar oracle") {
  const Fixture f(8);
  const auto terms = losses::regular_terms(f.regular());
  const double want[7] = {oracle::mse(f.xv, f.xrv), oracle::mse(f.xm, f.xrm), oracle::mse(f.phv, f.xt),
                          oracle::mse(f.phm, f.xt), oracle::mse(f.pht, f.xt), oracle::mse(f.thv, f.tht),
                          oracle::mse(f.thm, f.tht)};
  double total = 0.0;
  for (int i = 0; i < 7; ++i) {
    INFO("term " << i);
    CHECK(std::abs(terms[static_cast<std::size_t>(i)].item() - want[i]) <= 1e-12);
    total += want[i];
  }
  CHECK(std::abs(losses::loss_regular(f.regular()).item() - total) <= 1e-12);
}

TEST_CASE("triplet hinge is zero when the negative is far and margin-sized at a tie") {
  Matrix a = Matrix::Zero(2, 3), p = Matrix::Zero(2, 3), n = Matrix::Constant(2, 3, 10.0);
  CHECK(losses::triplet(constant(a), constant(p), constant(n), 1.0).item() == 0.0);
  CHECK(losses::triplet(constant(a), constant(p), constant(p), 0.7).item() == doctest::Approx(0.7));
}

TEST_CASE("cross entropy of matched/unmatched logits") {
  Matrix logits(2, 2);
  logits << 0.0, 0.0, 2.0, -1.0;
  const std::vector<int> labels = {1, 0};
  const double want = 0.5 * (std::log(2.0) + std::log1p(std::exp(-3.0)));
  CHECK(losses::loss_ce(constant(logits), labels).item() == doctest::Approx(want).epsilon(1e-12));
  CHECK_THROWS_AS(losses::loss_ce(constant(Matrix::Zero(2, 3)), labels), ContractError);
}

TEST_CASE("total loss weights the parts and rejects missing weighted parts") {
  const Fixture f(9);
  const auto b = f.triplets();
  Matrix logits = Matrix::Zero(3, 2);
  const std::vector<int> labels = {1, 1, 0};
  losses::LossParts parts{losses::loss_av(b, 1.0), losses::loss_vtag(b, 1.0), losses::loss_atag(b, 1.0),
                          losses::loss_regular(f.regular()), losses::loss_ce(constant(logits), labels)};
  losses::LossWeights w{0.5, 2.0, 3.0, 0.1, 4.0, 1.0};
  const double want = 0.5 * parts.av.item() + 2.0 * parts.vtag.item() + 3.0 * parts.atag.item() +
                      0.1 * parts.regular.item() + 4.0 * parts.ce.item();
  CHECK(losses::total_loss(parts, w).item() == doctest::Approx(want).epsilon(1e-12));
  parts.ce = Tensor();
  CHECK_THROWS_AS(losses::total_loss(parts, w), ContractError);
  w.ce = 0.0;
  CHECK_NOTHROW(losses::total_loss(parts, w));
}

TEST_CASE("loss weights validation") {
  losses::LossWeights w;
  CHECK_NOTHROW(w.validate());
  w.margin = 0.0;
  CHECK_THROWS_AS(w.validate(), ValidationError);
  w = {};
  w.av = -1.0;
  CHECK_THROWS_AS(w.validate(), ValidationError);
}

TEST_CASE("mismatched triplet shapes are contract errors") {
  CHECK_THROWS_AS(losses::triplet(constant(Matrix::Zero(2, 3)), constant(Matrix::Zero(2, 4)),
                                  constant(Matrix::Zero(2, 3)), 1.0),
                  ContractError);
}
