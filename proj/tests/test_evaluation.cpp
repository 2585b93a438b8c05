#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "clipscope/error.hpp"
#include "clipscope/evaluation.hpp"
#include "clipscope/rng.hpp"
#include "clipscope/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace clipscope;

namespace {

// Scores on a coarse grid so ties are common.
std::vector<double> coarse(support::Gen& g, std::size_t n, int levels) {
  std::vector<double> v(n);
  for (double& x : v) x = static_cast<double>(g.index(0, static_cast<std::size_t>(levels))) / levels;
  return v;
}

struct Small {
  SynthData data;
  MinedLabelSet neg;
};

Small small_world(std::uint64_t seed, std::size_t n_classes = 8) {
  SynthSpec spec;
  spec.dim = 16;
  spec.n_classes = n_classes;
  spec.samples_per_class = 10;
  spec.ood_clusters = 2;
  spec.ood_samples = 60;
  spec.separation = 1.5;
  spec.lexicon_size = 90;
  spec.seed = seed;
  Small s{generate(spec), {}};
  MiningConfig mc;
  mc.m = 20;
  s.neg = mine(s.data.candidates, s.data.id_table, mc);
  return s;
}

}  // namespace

TEST_CASE("auroc examples") {
  CHECK(auroc(std::vector<double>{1.0}, std::vector<double>{0.0}) == 1.0);
  CHECK(auroc(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}) == 0.5);
  CHECK(auroc(std::vector<double>{0.9, 0.8}, std::vector<double>{0.7, 0.85}) == 0.75);
  CHECK_THROWS_AS(auroc(std::vector<double>{}, std::vector<double>{1.0}), Error);
  CHECK_THROWS_AS(auroc(std::vector<double>{NAN}, std::vector<double>{1.0}), Error);
}

TEST_CASE("fpr examples") {
  std::vector<double> id;
  for (int i = 1; i <= 20; ++i) id.push_back(0.05 * i);
  CHECK(tpr_threshold(id, 0.95) == 0.05 * 2);
  CHECK(fpr_at_tpr(id, std::vector<double>{0.05, 0.12, 0.50}, 0.95) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(fpr_at_tpr(id, std::vector<double>{0.0, 0.01, 0.04}) == 0.0);
  CHECK(fpr_at_tpr(id, id, 1.0) == 1.0);
  CHECK_THROWS_AS(tpr_threshold(id, 0.0), Error);
  CHECK_THROWS_AS(tpr_threshold(id, 1.5), Error);
}

TEST_CASE("property: rank-sum auroc equals the pairwise oracle") {
  support::Gen g(51);
  for (int c = 0; c < 1000; ++c) {
    const int levels = static_cast<int>(g.index(1, 40));
    auto id = coarse(g, g.index(1, 200), levels);
    auto ood = coarse(g, g.index(1, 200), levels);
    REQUIRE(auroc(id, ood) == oracle::auroc_pairwise(id, ood));
  }
}

TEST_CASE("property: auroc is antisymmetric without ties") {
  support::Gen g(52);
  for (int c = 0; c < 1000; ++c) {
    std::vector<double> id(g.index(1, 100)), ood(g.index(1, 100));
    for (double& x : id) x = g.real(0.0, 1.0);
    for (double& x : ood) x = g.real(0.0, 1.0);
    REQUIRE(std::fabs(auroc(id, ood) + auroc(ood, id) - 1.0) <= 1e-12);
  }
}

TEST_CASE("property: fpr matches threshold enumeration") {
  support::Gen g(53);
  for (int c = 0; c < 1000; ++c) {
    const int levels = static_cast<int>(g.index(1, 50));
    auto id = coarse(g, g.index(1, 200), levels);
    auto ood = coarse(g, g.index(1, 200), levels);
    const double target = c % 4 == 0 ? 0.95 : g.real(0.01, 1.0);
    REQUIRE(fpr_at_tpr(id, ood, target) == oracle::fpr_enumerated(id, ood, target));
  }
}

TEST_CASE("property: the threshold is non-increasing in the target") {
  support::Gen g(54);
  for (int c = 0; c < 1000; ++c) {
    auto id = coarse(g, g.index(1, 150), static_cast<int>(g.index(1, 30)));
    auto ood = coarse(g, g.index(1, 150), 30);
    double a = g.real(0.01, 1.0), b = g.real(0.01, 1.0);
    if (a > b) std::swap(a, b);
    REQUIRE(tpr_threshold(id, a) >= tpr_threshold(id, b));
    REQUIRE(fpr_at_tpr(id, ood, 1.0) >= fpr_at_tpr(id, ood, a));
  }
}

TEST_CASE("stream orders") {
  CHECK(stream_order(2, 3, OrderKind::Forward, 9) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(stream_order(2, 3, OrderKind::Reverse, 9) == std::vector<std::size_t>{2, 3, 4, 0, 1});
  auto r = stream_order(20, 30, OrderKind::Random, 4);
  CHECK(r == stream_order(20, 30, OrderKind::Random, 4));
  CHECK(r != stream_order(20, 30, OrderKind::Random, 5));
  std::sort(r.begin(), r.end());
  CHECK(r == stream_order(20, 30, OrderKind::Forward, 0));
  CHECK(parse_order_kind("reverse") == OrderKind::Reverse);
  CHECK_THROWS_AS(parse_order_kind("sideways"), Error);
  CHECK(StreamOrdering::forward().effective_trials() == 1);
  CHECK(StreamOrdering::random(3).effective_trials() == 5);
  CHECK(StreamOrdering::random(3).trial_seed(2) == 5);
}

TEST_CASE("two-point separable stream") {
  EmbeddingTable id_table(2, {"a", "b"}, {1, 0, 0, 1});
  EmbeddingTable id_stream(2, {"x"}, {1, 0});
  EmbeddingTable ood_stream(2, {"y"}, {-1, 0});
  MinedLabelSet neg;
  neg.table = EmbeddingTable(2, {"n"}, {-1, 0});
  neg.distances = {1.0};
  neg.sides = {Side::Farthest};
  neg.candidate_index = {0};
  for (auto ord : {StreamOrdering::forward(), StreamOrdering::reverse(), StreamOrdering::random(1)}) {
    auto r = run_stream(id_stream, ood_stream, id_table, neg, ScorerConfig{}, ord);
    CHECK(r.auroc == 1.0);
    CHECK(r.fpr95 == 0.0);
  }
}

TEST_CASE("reports are deterministic and trials well formed") {
  auto w = small_world(3);
  ScorerConfig cfg;
  auto a = run_stream(w.data.id_stream, w.data.ood_stream, w.data.id_table, w.neg, cfg, StreamOrdering::random(11, 7));
  auto b = run_stream(w.data.id_stream, w.data.ood_stream, w.data.id_table, w.neg, cfg, StreamOrdering::random(11, 7));
  CHECK(a == b);
  REQUIRE(a.per_trial.size() == 7);
  std::set<std::uint64_t> seeds;
  double sa = 0.0, sf = 0.0;
  for (const auto& t : a.per_trial) {
    seeds.insert(t.seed);
    sa += t.auroc;
    sf += t.fpr95;
  }
  CHECK(seeds.size() == 7);
  CHECK(std::fabs(a.auroc - sa / 7) <= 1e-12);
  CHECK(std::fabs(a.fpr95 - sf / 7) <= 1e-12);
  CHECK(a.rng_algorithm == Rng::kAlgorithm);
  CHECK(a.n_negatives == w.neg.size());

  // forward and reverse ignore the seed
  StreamOrdering f1 = StreamOrdering::forward(), f2 = StreamOrdering::forward();
  f2.seed = 99;
  auto rf1 = run_stream(w.data.id_stream, w.data.ood_stream, w.data.id_table, w.neg, cfg, f1);
  auto rf2 = run_stream(w.data.id_stream, w.data.ood_stream, w.data.id_table, w.neg, cfg, f2);
  CHECK(rf1.auroc == rf2.auroc);
  CHECK(rf1.per_trial.size() == 1);
}

TEST_CASE("property: permuting the stream keeps the ground-truth multiset") {
  auto w = small_world(4);
  StreamScorer scorer(w.data.id_table, w.neg, ScorerConfig{});
  auto ip = scorer.estimate(w.data.id_stream);
  auto op = scorer.estimate(w.data.ood_stream);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto tr = run_trial(ip, op, w.data.id_table.size(), ScorerConfig{}, OrderKind::Random, seed);
    const auto n_id = std::count(tr.origin.begin(), tr.origin.end(), Origin::ID);
    REQUIRE(static_cast<std::size_t>(n_id) == ip.size());
    REQUIRE(tr.origin.size() == ip.size() + op.size());
  }
}

TEST_CASE("an empty mined set turns the full score into p1 / p0") {
  auto w = small_world(5);
  ScorerConfig full, p1p0;
  p1p0.mode = ScoreMode::P1_over_P0;
  StreamScorer a(w.data.id_table, MinedLabelSet::none(16), full);
  StreamScorer b(w.data.id_table, MinedLabelSet::none(16), p1p0);
  ClassHistogram ha(8), hb(8);
  auto ra = a.score_stream(w.data.ood_stream, ha);
  auto rb = b.score_stream(w.data.ood_stream, hb);
  for (std::size_t i = 0; i < ra.size(); ++i) CHECK(std::fabs(ra[i].score - rb[i].score) <= 1e-12 * rb[i].score);

  SweepInputs in{w.data.id_stream, w.data.ood_stream, w.data.id_table, w.data.candidates, MiningConfig{},
                 ScorerConfig{}, StreamOrdering::random(0)};
  auto grid = parse_grid("m=0");
  auto swept = ablation_sweep(grid, in);
  auto direct = run_stream(w.data.id_stream, w.data.ood_stream, w.data.id_table, MinedLabelSet::none(16), p1p0,
                           StreamOrdering::random(0));
  CHECK(swept[0].auroc == direct.auroc);
  CHECK(swept[0].n_negatives == 0);
  CHECK(swept[0].label == "m=0");
}

TEST_CASE("eta grid mines different sets") {
  // 0.001 and 0.05 only land on different ranks once N > 20
  auto w = small_world(6, 40);
  SweepInputs in{w.data.id_stream, w.data.ood_stream, w.data.id_table, w.data.candidates, MiningConfig{},
                 ScorerConfig{}, StreamOrdering::forward()};
  in.mining.m = 10;
  auto grid = parse_grid("eta=0.001,0.05,0.5,0.999");
  REQUIRE(grid.size() == 4);
  auto reports = ablation_sweep(grid, in);
  CHECK(reports.size() == 4);
  std::set<std::vector<std::size_t>> sets;
  for (const auto& p : grid) {
    MiningConfig mc = in.mining;
    mc.eta = *p.eta;
    auto idx = mine(w.data.candidates, w.data.id_table, mc).candidate_index;
    std::sort(idx.begin(), idx.end());
    sets.insert(idx);
  }
  CHECK(sets.size() == 4);
}

TEST_CASE("separable world is mode insensitive") {
  auto spec = preset("separable");
  spec.seed = 2;
  auto d = generate(spec);
  SweepInputs in{d.id_stream, d.ood_stream, d.id_table, d.candidates, MiningConfig{}, ScorerConfig{},
                 StreamOrdering::random(0)};
  auto reports = ablation_sweep(parse_grid("mode=P1,P1P2_over_P0"), in);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].auroc == 1.0);
  CHECK(reports[1].auroc == 1.0);
}

TEST_CASE("grid parsing") {
  auto g = parse_grid("mode=P1,P1P2_over_P0; m=0,100 ;eta=0.05;selection=nearest");
  REQUIRE(g.size() == 6);
  CHECK(*g[0].mode == ScoreMode::P1);
  CHECK(*g[3].m == 100);
  CHECK(*g[4].eta == 0.05);
  CHECK(*g[5].selection == Selection::NearestOnly);
  CHECK(g[3].describe() == "m=100");
  CHECK_THROWS_AS(parse_grid(""), Error);
  CHECK_THROWS_AS(parse_grid("m=x"), Error);
  CHECK_THROWS_AS(parse_grid("eta=2"), Error);
  CHECK_THROWS_AS(parse_grid("depth=3"), Error);
  CHECK_THROWS_AS(parse_grid("mode"), Error);
}

TEST_CASE("class likelihood profile examples") {
  std::vector<ScoreRecord> recs(4);
  std::vector<Origin> origin = {Origin::ID, Origin::OOD, Origin::ID, Origin::OOD};
  for (auto& r : recs) r.i_star = 0;
  auto all0 = class_likelihood_profile(recs, origin, 3);
  CHECK(all0.p0_all == std::vector<double>{1.0, 0.0, 0.0});
  CHECK(all0.p_ood_given_class[2] == 0.0);

  for (auto& r : recs) r.i_star = 3;
  auto p = class_likelihood_profile(recs, origin, 5);
  CHECK(p.p_ood_given_class[3] == 0.5);
  CHECK(p.p0_id[3] == 1.0);
  CHECK_THROWS_AS(class_likelihood_profile(recs, origin, 3), Error);
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0));
}

TEST_CASE("property: profiles are distributions") {
  support::Gen g(55);
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = g.index(1, 20);
    std::vector<ScoreRecord> recs(g.index(1, 100));
    std::vector<Origin> origin(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      recs[i].i_star = g.index(0, n - 1);
      origin[i] = g.index(0, 1) ? Origin::ID : Origin::OOD;
    }
    auto p = class_likelihood_profile(recs, origin, n);
    double s = 0.0;
    for (double x : p.p0_all) s += x;
    REQUIRE(std::fabs(s - 1.0) <= 1e-12);
    for (double x : p.p_ood_given_class) REQUIRE((x >= 0.0 && x <= 1.0));
  }
}
