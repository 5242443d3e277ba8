#include <doctest.h>

#include "fixtures.hpp"
#include "vmr/error.hpp"
#include "vmr/nn/extractor.hpp"
#include "vmr/nn/layers.hpp"
#include "vmr/nn/matcher.hpp"
#include "vmr/nn/ops.hpp"
#include "vmr/nn/optim.hpp"
#include "vmr/nn/text_embed.hpp"

using namespace vmr;
using namespace vmr::nn;
using vmr::testing::random_matrix;

TEST_CASE("attention never mixes segments") {
  Rng rng(1);
  Matrix q = random_matrix(4, 6, rng), k = random_matrix(5, 6, rng), v = random_matrix(5, 6, rng);
  const Segments qs = {{0, 2}, {2, 2}}, ks = {{0, 3}, {3, 2}};
  const Matrix a = attention(constant(q), constant(k), constant(v), qs, ks, 2).value();
  k.row(4).setRandom();
  v.row(4).setRandom();
  const Matrix b = attention(constant(q), constant(k), constant(v), qs, ks, 2).value();
  CHECK(a.topRows(2) == b.topRows(2));
  CHECK(a.bottomRows(2) != b.bottomRows(2));
}

TEST_CASE("masked clips never influence the sequence encoding") {
  MatcherConfig cfg = testing::small_matcher();
  Rng rng(2);
  SequenceEncoder enc(cfg, rng);
  Matrix clips = random_matrix(5, 512, rng);
  Matrix plug = random_matrix(5, 512, rng);
  SequenceInput in{constant(clips), {true, false, true, true, false}, constant(plug), constant(random_matrix(1, 512, rng))};
  for (Setting s : {Setting::kASE, Setting::kSE, Setting::kSER}) {
    const Matrix before = enc(std::vector<SequenceInput>{in}, s).value();
    Matrix c2 = clips, p2 = plug;
    c2.row(1).setConstant(100.0);
    p2.row(4).setConstant(-100.0);
    SequenceInput changed{constant(c2), in.mask, constant(p2), in.track};
    CHECK(enc(std::vector<SequenceInput>{changed}, s).value() == before);
  }
  SequenceInput none{constant(clips), std::vector<bool>(5, false), constant(plug), Tensor()};
  CHECK_THROWS_AS(enc(std::vector<SequenceInput>{none}, Setting::kSE), ContractError);
}

TEST_CASE("batched encoding equals one-at-a-time encoding") {
  const auto feats = testing::random_features(3, 1, 4);
  const auto m = testing::small_model(Setting::kSER, 5);
  std::vector<const features::PairFeatures*> all = {&feats[0], &feats[1], &feats[2]};
  const Matrix batched = m.encode_music(all).value();
  for (std::size_t i = 0; i < all.size(); ++i) {
    std::vector<const features::PairFeatures*> one = {all[i]};
    CHECK((m.encode_music(one).value() - batched.row(static_cast<Index>(i))).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("zeroed plug-in tables make SE&R identical to SE") {
  const auto feats = testing::random_features(3, 1, 6);
  const auto se = testing::small_model(Setting::kSE, 7);
  const auto ser = testing::small_model(Setting::kSER, 7);
  for (auto& p : ser.plugins().params()) {
    Tensor t = p.tensor;
    t.mutable_value().setZero();
  }
  std::vector<const features::PairFeatures*> all = {&feats[0], &feats[1], &feats[2]};
  CHECK(se.encode_video(all).value() == ser.encode_video(all).value());
  CHECK(se.encode_music(all).value() == ser.encode_music(all).value());
}

TEST_CASE("matching model dimensions") {
  const auto feats = testing::random_features(2, 1, 8);
  Rng rng(1);
  const model::Model m(MatcherConfig{}, Setting::kSER, quantize::Calibration{}, {"a"}, rng);
  std::vector<const features::PairFeatures*> all = {&feats[0], &feats[1]};
  const Tensor xv = m.encode_video(all), xm = m.encode_music(all);
  CHECK(xv.cols() == 768);
  CHECK(xm.cols() == 768);
  const Tensor tv = m.theta_video(xv, xm);
  CHECK(tv.cols() == 256);
  CHECK(m.matcher().decode(tv).cols() == 768);
  CHECK(m.matcher().reconstruct_video(tv).cols() == 768);
  const std::vector<std::string> tags = {"a"};
  CHECK(m.tag_embeddings(tags).cols() == 768);
  CHECK(m.matcher().match_logits(tv, m.theta_music(xm, xv)).cols() == 2);
}

TEST_CASE("extractor token layouts and embedding width") {
  Rng rng(3);
  const Matrix clip = Matrix::Constant(896, 224, 0.5);
  const Matrix vt = video_clip_tokens(clip);
  CHECK(vt.rows() == 28);
  CHECK(vt.cols() == token_dim(Modality::kVideo));
  const Matrix mt = music_clip_tokens(Matrix::Zero(398, 80));
  CHECK(mt.rows() == 50);
  CHECK(mt.cols() == token_dim(Modality::kMusic));
  ExtractorConfig cfg;
  cfg.num_classes = 3;
  cfg.blocks = 1;
  const ClipExtractor ex(Modality::kVideo, cfg, rng);
  const Matrix e = ex.embed({&vt, &vt});
  CHECK(e.rows() == 2);
  CHECK(e.cols() == 512);
  CHECK(e.row(0) == e.row(1));
}

TEST_CASE("Adam drives a quadratic to its minimum") {
  Tensor x = parameter(Matrix::Constant(1, 3, 5.0));
  Adam opt({{"x", x}}, 0.1);
  const Matrix target = (Matrix(1, 3) << 1.0, -2.0, 0.5).finished();
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    const Tensor d = sub(x, constant(target));
    sum(mul(d, d)).backward();
    opt.step();
  }
  CHECK((x.value() - target).cwiseAbs().maxCoeff() < 1e-3);
  CHECK(opt.steps() == 500);
}

TEST_CASE("no graph is recorded under NoGradGuard") {
  Tensor a = parameter(Matrix::Ones(2, 2));
  {
    NoGradGuard g;
    CHECK_FALSE(mul(a, a).requires_grad());
  }
  CHECK(mul(a, a).requires_grad());
  CHECK_THROWS_AS(a.backward(), ContractError);
}

TEST_CASE("tag text embeddings are unit-norm, deterministic and vocabulary-bound") {
  TextEmbedder t({"dance", "lofi", "dancing"});
  CHECK(t.embed("dance").norm() == doctest::Approx(1.0));
  CHECK(t.embed("dance").cols() == 768);
  TextEmbedder again({"dance"});
  CHECK(t.embed("dance") == again.embed("dance"));
  // Shared trigrams pull related tags together.
  CHECK(t.embed("dance").cwiseProduct(t.embed("dancing")).sum() > t.embed("dance").cwiseProduct(t.embed("lofi")).sum());
  CHECK_THROWS_AS(t.embed("rock"), DomainError);
}

TEST_CASE("unknown settings are rejected") {
  CHECK(parse_setting("SE&R") == Setting::kSER);
  CHECK(std::string(setting_name(Setting::kASE)) == "A-SE");
  CHECK_THROWS_AS(parse_setting("SER"), ValidationError);
}
