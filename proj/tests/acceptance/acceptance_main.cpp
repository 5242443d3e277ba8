// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "../fixtures.hpp"
#include "../grad_suite.hpp"
#include "../oracles.hpp"
#include "vmr/config.hpp"
#include "vmr/losses.hpp"
#include "vmr/nn/extractor.hpp"
#include "vmr/pipeline.hpp"
#include "vmr/retrieval.hpp"
#include "vmr/signal.hpp"

using namespace vmr;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path work_dir(const std::string& name) {
  const fs::path p = fs::current_path() / "acceptance_runs" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void quiet(const std::string&) {}

// 1. Label assignment against the brute-force scorer.
Outcome tfidf_oracle() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(1, "acceptance-tfidf"));
  int mismatches = 0;
  for (int i = 0; i < 50; ++i) {
    const auto cols = oracle::random_collections(rng, 20, 10);
    if (tagset::assign_labels(cols).label_of_music != oracle::brute_force_labels(cols)) ++mismatches;
  }
  const double s = seconds_since(t0);
  return {mismatches == 0 && s < 10.0, std::to_string(50 - mismatches) + "/50 corpora match, " + fmt("%.2f s", s)};
}

// 2. Every triplet and regularisation term against scalar loops.
Outcome loss_oracle() {
  using nn::constant;
  double worst = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    auto m = [&](nn::Index c) { return testing::random_matrix(3, c, rng, 0.5); };
    const nn::Matrix tv = m(4), tm = m(4), tt = m(4), tvn = m(4), tmn = m(4), ttn = m(4);
    const nn::Matrix pv = m(6), pm = m(6), pt = m(6), pvn = m(6), pmn = m(6);
    const losses::TripletBatch b{constant(tv), constant(tm), constant(tt), constant(tvn), constant(tmn), constant(ttn),
                                 constant(pv), constant(pm), constant(pt), constant(pvn), constant(pmn)};
    const double margin = 0.5;
    const auto got = losses::triplet_terms(b, margin);
    const double want[8] = {oracle::triplet(tv, tm, tmn, margin), oracle::triplet(tm, tv, tvn, margin),
                            oracle::triplet(tv, tt, tvn, margin), oracle::triplet(tt, tv, ttn, margin),
                            oracle::triplet(pt, pv, pvn, margin), oracle::triplet(tm, tt, tmn, margin),
                            oracle::triplet(tt, tm, tmn, margin), oracle::triplet(pt, pm, pmn, margin)};
    for (int i = 0; i < 8; ++i) worst = std::max(worst, std::abs(got[static_cast<std::size_t>(i)].item() - want[i]));

    const nn::Matrix xv = m(6), xm = m(6), rv = m(6), rm = m(6), fv = m(6), fm = m(6), ft = m(6), xt = m(6);
    const nn::Matrix hv = m(4), hm = m(4), ht = m(4);
    const losses::RegularBatch r{constant(xv), constant(xm), constant(rv), constant(rm), constant(fv), constant(fm),
                                 constant(ft), constant(xt), constant(hv), constant(hm), constant(ht)};
    const auto reg = losses::regular_terms(r);
    const double want_r[7] = {oracle::mse(xv, rv), oracle::mse(xm, rm), oracle::mse(fv, xt), oracle::mse(fm, xt),
                              oracle::mse(ft, xt), oracle::mse(hv, ht), oracle::mse(hm, ht)};
    for (int i = 0; i < 7; ++i) worst = std::max(worst, std::abs(reg[static_cast<std::size_t>(i)].item() - want_r[i]));
  }
  return {worst <= 1e-12, "8 triplet + 7 MSE terms, 3 batches, max |diff| " + fmt("%.2e", worst)};
}

// 3. Finite-difference gradient checks.
Outcome gradient_checks() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string where;
  std::size_t cases = 0;
  for (std::uint64_t seed : {11u, 22u, 33u}) {
    for (const auto& [name, r] : testing::grad_suite(seed)) {
      ++cases;
      if (r.worst > worst) {
        worst = r.worst;
        where = name;
      }
    }
  }
  const double s = seconds_since(t0);
  return {worst < 1e-4 && s < 300.0,
          std::to_string(cases) + " checks over 3 seeds, worst rel err " + fmt("%.2e", worst) + " (" + where + "), " +
              fmt("%.1f s", s)};
}

// 4. Shapes across a synthetic corpus.
Outcome shape_contracts() {
  const auto c = corpus::synth_corpus({}, derive_seed(1, "acceptance-shapes"));
  std::vector<std::string> bad;
  Rng rng(5);
  nn::ExtractorConfig ec;
  ec.blocks = 1;
  const nn::ClipExtractor vx(nn::Modality::kVideo, ec, rng), mx(nn::Modality::kMusic, ec, rng);
  std::vector<features::PairFeatures> feats;
  std::size_t clips = 0;
  for (const auto& p : c.pairs()) {
    const auto chopped = signal::chop_pair(p);
    features::PairFeatures f;
    f.pair_id = p.pair_id;
    f.music_id = p.music_id;
    std::vector<nn::Matrix> vt, mt;
    for (const auto& v : chopped.video) {
      if (v.matrix.rows() != 896 || v.matrix.cols() != 224) bad.push_back(p.pair_id + " video clip");
      vt.push_back(nn::video_clip_tokens(v.matrix));
    }
    for (const auto& m : chopped.music) {
      if (m.matrix.rows() != 398 || m.matrix.cols() != 80) bad.push_back(p.pair_id + " fbank");
      mt.push_back(nn::music_clip_tokens(m.matrix));
    }
    std::vector<const nn::Matrix*> vp, mp;
    for (auto& m : vt) vp.push_back(&m);
    for (auto& m : mt) mp.push_back(&m);
    f.video = vx.embed(vp);
    f.music = mx.embed(mp);
    if (f.video.cols() != 512 || f.music.cols() != 512) bad.push_back(p.pair_id + " f");
    f.video_track = f.video.colwise().mean();
    f.music_track = f.music.colwise().mean();
    f.rhythm.assign(static_cast<std::size_t>(chopped.clip_count), {4, 1.0, 0.5});
    f.flow.assign(static_cast<std::size_t>(chopped.clip_count), {1.0});
    clips += static_cast<std::size_t>(chopped.clip_count);
    feats.push_back(std::move(f));
  }
  Rng mr(6);
  const model::Model model(nn::MatcherConfig{}, nn::Setting::kSER, quantize::Calibration{}, {"t"}, mr);
  nn::NoGradGuard g;
  std::vector<const features::PairFeatures*> ps;
  for (const auto& f : feats) ps.push_back(&f);
  const auto xv = model.encode_video(ps), xm = model.encode_music(ps);
  const auto tv = model.theta_video(xv, xm), tm = model.theta_music(xm, xv);
  const auto& mt = model.matcher();
  auto need = [&](nn::Index got, nn::Index want, const char* what) {
    if (got != want) bad.push_back(std::string(what) + " width " + std::to_string(got));
  };
  need(xv.cols(), 768, "xi_v");
  need(xm.cols(), 768, "xi_m");
  need(mt.decode(tv).cols(), 768, "phi");
  need(mt.reconstruct_video(tv).cols(), 768, "xi_rec_v");
  need(mt.reconstruct_music(tm).cols(), 768, "xi_rec_m");
  need(tv.cols(), 256, "theta_v");
  need(tm.cols(), 256, "theta_m");
  const std::vector<std::string> tag = {"t"};
  need(mt.project_text(nn::constant(model.tag_embeddings(tag))).cols(), 256, "theta_tag");
  const std::vector<quantize::RhythmCode> rc = {{1, 2, 3}};
  const std::vector<int> fc = {4};
  need(model.plugins().rhythm(rc).cols(), 512, "rhythm plug-in");
  need(model.plugins().flow(fc).cols(), 512, "flow plug-in");
  return {bad.empty(), std::to_string(feats.size()) + " pairs, " + std::to_string(clips) + " clips" +
                           (bad.empty() ? "" : ", first violation: " + bad.front())};
}

// 5. Click tracks and translating blocks.
Outcome beat_flow_oracles() {
  std::ostringstream d;
  bool ok = true;
  const std::pair<double, int> cases[] = {{60, 4}, {90, 6}, {120, 8}, {150, 10}};
  for (auto [bpm, n] : cases) {
    corpus::MediaPair p;
    p.pair_id = p.music_id = "click";
    p.music = std::make_shared<const corpus::Pcm>(corpus::click_track(bpm, 16, 0.13));
    p.video.assign(16, GrayFrame{8, 8, std::vector<std::uint8_t>(64, 0)});
    double worst_l = 0.0;
    bool counts = true;
    for (const auto& s : signal::track_rhythm(p)) {
      counts = counts && s.n_beat == n;
      worst_l = std::max(worst_l, s.l_bar ? std::abs(*s.l_bar - 60.0 / bpm) : 1e9);
    }
    ok = ok && counts && worst_l <= 0.02;
    d << bpm << "bpm:" << (counts ? "ok" : "count!") << " dL=" << fmt("%.4f", worst_l) << "; ";
  }
  double prev = -1.0;
  d << "m_bar";
  for (double speed : {0.0, 1.0, 2.0, 4.0, 6.0}) {
    std::vector<nn::Matrix> frames;
    for (const auto& f : corpus::moving_block_video(4, speed, 9)) frames.push_back(signal::preprocess_frame(f));
    const double v = signal::optical_flow_stat(frames).m_bar;
    ok = ok && v > prev;
    prev = v;
    d << ' ' << fmt("%.3f", v);
  }
  return {ok, d.str()};
}

// 6. Identity embeddings, chance level, brute-force ranking.
Outcome retrieval_sanity() {
  std::ostringstream d;
  bool ok = true;

  const int p = 30;
  retrieval::MusicIndex idx;
  idx.theta = nn::Matrix::Identity(p, p);
  for (int i = 0; i < p; ++i) idx.music_ids.push_back("m" + std::to_string(100 + i));
  std::vector<retrieval::QueryResult> res;
  for (int i = 0; i < p; ++i) {
    res.push_back({"q", idx.music_ids[static_cast<std::size_t>(i)], retrieval::query(idx.theta.row(i), idx, p)});
  }
  const auto id_rep = retrieval::recall_at_k(res, {1, 5, 10, 25}, p);
  const bool identity = std::all_of(id_rep.recall.begin(), id_rep.recall.end(), [](double r) { return r == 100.0; });
  ok = ok && identity;
  d << "identity " << (identity ? "100%" : "FAILED");

  const auto feats = testing::random_features(50, 12, 5);
  nn::MatcherConfig mc;
  mc.model_dim = 64;
  mc.proj_dim = 32;
  mc.mlp_hidden = 64;
  mc.ffn_dim = 64;
  Rng rng(6);
  const model::Model m(mc, nn::Setting::kSE, quantize::Calibration{}, {"a"}, rng);
  const auto rep = retrieval::evaluate(m, feats, {});
  double worst = 0.0;
  for (std::size_t i = 0; i < rep.ks.size(); ++i) {
    worst = std::max(worst, std::abs(rep.recall[i] - 100.0 * std::min(rep.ks[i], 50) / 50.0));
  }
  ok = ok && worst <= 5.0 && rep.queries >= 500;
  d << "; untrained " << rep.queries << " queries, pool 50, max |R@K - chance| " << fmt("%.2f", worst) << " pts";

  Rng rr(7);
  bool same = true;
  for (std::size_t pool : {10u, 100u, 1000u}) {
    std::vector<double> dist(pool);
    std::vector<std::string> ids(pool);
    for (std::size_t i = 0; i < pool; ++i) {
      dist[i] = static_cast<double>(rr.index(pool / 4 + 1)) + (rr.uniform() < 0.5 ? 0.0 : rr.uniform());
      ids[i] = "id" + std::to_string(rr.next_u64() % 1000000);
    }
    same = same && retrieval::rank_candidates(dist, ids) == oracle::brute_force_rank(dist, ids);
  }
  ok = ok && same;
  d << "; ranking vs brute force " << (same ? "identical" : "DIFFERS") << " (pools 10/100/1000)";
  return {ok, d.str()};
}

config::RunConfig load_config(const char* name) {
  return config::load(fs::path(VMR_SOURCE_DIR) / "configs" / name);
}

// 7. Overfitting a 32-pair corpus in SE mode.
Outcome overfit_probe() {
  const auto t0 = Clock::now();
  auto cfg = load_config("overfit.json");
  const fs::path dir = work_dir("overfit");
  cfg.output_dir = dir.string();
  const auto data = pipeline::prepare(cfg, dir, quiet);
  const auto out = pipeline::train_and_evaluate(cfg, data, dir, quiet);
  const auto rep = retrieval::evaluate(out.fit.model, data.train, cfg.eval);
  const double s = seconds_since(t0);
  return {rep.at(1) >= 90.0 && s < 600.0 && data.features.size() == 32,
          std::to_string(data.features.size()) + " pairs, " + std::to_string(cfg.train.epochs) + " epochs, train R@1 " +
              fmt("%.2f%%", rep.at(1)) + ", " + fmt("%.0f s", s)};
}

// 8. Ordering of the four settings.
Outcome trend_reproduction() {
  const auto t0 = Clock::now();
  auto cfg = load_config("trend.json");
  const fs::path dir = work_dir("trend");
  cfg.output_dir = dir.string();
  const auto res = pipeline::run_ablation(cfg, quiet);
  const double s = seconds_since(t0);
  std::ostringstream d;
  d << "median R@1";
  for (const auto& name : res.settings) d << ' ' << name << '=' << fmt("%.2f", res.median.at(name).at(1));
  for (const auto& c : res.checks) {
    if (!c.passed) d << "; failed: " << c.name;
  }
  d << "; " << fmt("%.0f s", s);
  return {res.all_passed() && s < 3600.0, d.str()};
}

// 9. Byte-identical reruns and bitwise checkpoint round trip.
Outcome determinism() {
  auto cfg = load_config("smoke.json");
  const fs::path a = work_dir("determinism_a"), b = work_dir("determinism_b");
  cfg.output_dir = a.string();
  pipeline::run_e2e(cfg, quiet);
  cfg.output_dir = b.string();
  pipeline::run_e2e(cfg, quiet);
  const bool reports = pipeline::read_text(a / "report.json") == pipeline::read_text(b / "report.json") &&
                       pipeline::read_text(a / "report.txt") == pipeline::read_text(b / "report.txt");
  const bool ckpt_files = pipeline::read_text(a / "checkpoint.utcm") == pipeline::read_text(b / "checkpoint.utcm");

  const auto data = pipeline::prepare(cfg, b, quiet);
  const auto m1 = model::load_checkpoint(a / "checkpoint.utcm");
  const fs::path copy = a / "resaved.utcm";
  model::save_checkpoint(copy, m1, {});
  const auto m2 = model::load_checkpoint(copy);
  std::vector<const features::PairFeatures*> ps;
  for (const auto& f : data.features) ps.push_back(&f);
  nn::NoGradGuard g;
  const auto xv1 = m1.encode_video(ps), xm1 = m1.encode_music(ps);
  const auto xv2 = m2.encode_video(ps), xm2 = m2.encode_music(ps);
  const bool forward = xv1.value() == xv2.value() && xm1.value() == xm2.value() &&
                       m1.theta_video(xv1, xm1).value() == m2.theta_video(xv2, xm2).value() &&
                       m1.theta_music(xm1, xv1).value() == m2.theta_music(xm2, xv2).value();
  return {reports && ckpt_files && forward, std::string("reports ") + (reports ? "identical" : "DIFFER") +
                                                ", checkpoints " + (ckpt_files ? "identical" : "DIFFER") +
                                                ", reloaded forward " + (forward ? "bitwise equal" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"TF-IDF label oracle", tfidf_oracle},
      {"loss-stack oracle", loss_oracle},
      {"gradient checks", gradient_checks},
      {"shape contracts", shape_contracts},
      {"beat/flow oracles", beat_flow_oracles},
      {"retrieval sanity", retrieval_sanity},
      {"overfit probe", overfit_probe},
      {"trend reproduction", trend_reproduction},
      {"determinism & persistence", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(n)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << n << ". " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
