#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "support.hpp"
#include "transnet/counterfact.hpp"
#include "transnet/errors.hpp"
#include "transnet/genmodels.hpp"

using namespace transnet;
using namespace transnet::counterfact;
using genmodels::PoissonParams;

namespace {

struct Fixture {
  genmodels::LinkCovariates cov;
  Matrix proximity;
};

Fixture small_economy(std::size_t ns, std::size_t nb, std::uint64_t seed) {
  genmodels::DgpConfig c;
  c.n_sellers = ns;
  c.n_buyers = nb;
  c.seed = seed;
  const genmodels::CrossSection cs = genmodels::simulate_cross_section(c);
  return {cs.covariates, cs.nodes.proximity.proximity};
}

EquilibriumDraw draw_of(std::vector<std::vector<std::uint32_t>> links) {
  EquilibriumDraw d;
  d.buyers_of = std::move(links);
  d.converged = true;
  return d;
}

}  // namespace

TEST(Ensemble, DegreesAndDensities) {
  Ensemble e;
  e.cov = {{1, 1, 1}, {1, 1, 1, 1}};
  e.draws = {draw_of({{0, 1}, {}, {1, 3}}), draw_of({{0}, {0}, {0}})};
  EXPECT_EQ(e.degrees(0, true), (std::vector<double>{2, 0, 2}));
  EXPECT_EQ(e.degrees(0, false), (std::vector<double>{1, 2, 0, 1}));
  EXPECT_EQ(e.degrees(1, false), (std::vector<double>{3, 0, 0, 0}));
  EXPECT_EQ(e.densities(), (std::vector<double>{4.0 / 12, 3.0 / 12}));
  EXPECT_THROW(e.degrees(2, true), DomainError);
  e.draws[1].converged = false;
  EXPECT_EQ(e.nonconverged(), 1u);
}

TEST(Compare, HandTallyOverTwentySellers) {
  // Seller i has baseline degree i in draw 0 and i + 2 in draw 1 (expected i + 1);
  // the counterfactual adds one link in draw 0 and three in draw 1.
  const std::size_t ns = 20, nb = 30;
  Ensemble base, cf;
  base.cov = cf.cov = {std::vector<double>(ns, 1.0), std::vector<double>(nb, 1.0)};
  auto first = [](std::size_t k) {
    std::vector<std::uint32_t> v(k);
    std::iota(v.begin(), v.end(), 0u);
    return v;
  };
  for (std::size_t n = 0; n < 2; ++n) {
    std::vector<std::vector<std::uint32_t>> b(ns), c(ns);
    for (std::size_t i = 0; i < ns; ++i) {
      b[i] = first(i + 2 * n);
      c[i] = first(i + 2 * n + (n == 0 ? 1 : 3));
    }
    base.draws.push_back(draw_of(b));
    cf.draws.push_back(draw_of(c));
  }
  const auto rows = compare(base, cf, Side::sellers);
  ASSERT_EQ(rows.size(), 10u);
  for (std::size_t q = 0; q < 10; ++q) {
    // decile q holds sellers 2q and 2q + 1, expected degrees 2q + 1 and 2q + 2
    EXPECT_EQ(rows[q].decile, q + 1);
    EXPECT_EQ(rows[q].nodes, 2u);
    EXPECT_DOUBLE_EQ(rows[q].baseline_degree, 2.0 * q + 1.5);
    EXPECT_DOUBLE_EQ(rows[q].change, 2.0);
    EXPECT_DOUBLE_EQ(rows[q].relative_change, 2.0 / (2.0 * q + 1.5));
    // per-draw changes 1 and 3: sd sqrt(2), se 1
    EXPECT_NEAR(rows[q].change_se, 1.0, 1e-15);
  }
}

TEST(Compare, SmallSidesDropEmptyDeciles) {
  Ensemble e;
  e.cov = {{1, 1, 1}, {1, 1}};
  e.draws = {draw_of({{0}, {0, 1}, {}})};
  const auto rows = compare(e, e, Side::sellers);
  ASSERT_EQ(rows.size(), 3u);
  // ranking is ascending and stable: seller 2 (0), seller 0 (1), seller 1 (2)
  EXPECT_EQ(rows[0].decile, 1u);
  EXPECT_DOUBLE_EQ(rows[0].baseline_degree, 0.0);
  EXPECT_DOUBLE_EQ(rows[0].relative_change, 0.0);
  EXPECT_DOUBLE_EQ(rows[2].baseline_degree, 2.0);
  for (const auto& r : rows) EXPECT_DOUBLE_EQ(r.change, 0.0);
}

TEST(Compare, MismatchedEnsemblesThrow) {
  Ensemble a, b;
  a.cov = b.cov = {{1, 1}, {1, 1}};
  a.draws = {draw_of({{0}, {1}})};
  b.draws = {draw_of({{0}, {1}}), draw_of({{}, {}})};
  EXPECT_THROW(compare(a, b, Side::buyers), InputError);
  b.draws.pop_back();
  b.cov.buyer.push_back(1);
  EXPECT_THROW(compare(a, b, Side::buyers), InputError);
}

TEST(Equilibrium, DrawIsAFixedPoint) {
  const Fixture f = small_economy(40, 60, 2);
  const PoissonParams p{0.83, 0.19, 0.35, 20};
  const EquilibriumDraw d = solve_equilibrium_draw(p, f.cov, f.proximity, 11);
  ASSERT_TRUE(d.converged);
  // resampling at the draw's own support with the same seed reproduces it
  const Matrix s = netcore::common_support(d.buyers_of, 60, f.proximity);
  const Adjacency y = genmodels::sample_network(genmodels::LinkModel::make(p), f.cov, &s, 11);
  EXPECT_EQ(netcore::buyer_lists(y), d.buyers_of);
  EXPECT_NEAR(d.mean_support, std::accumulate(s.flat().begin(), s.flat().end(), 0.0) / s.flat().size(), 1e-15);
}

TEST(Equilibrium, IterationCapThrowsWithSeed) {
  const Fixture f = small_economy(40, 60, 2);
  EquilibriumOptions o;
  o.max_iter = 1;
  try {
    solve_equilibrium_draw({0.83, 0.19, 0.35, 20}, f.cov, f.proximity, 12345, o);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("12345"), std::string::npos);
  }
}

TEST(EnsembleBuild, IndependentOfWorkers) {
  const Fixture f = small_economy(40, 60, 3);
  const PoissonParams p{0.83, 0.19, 0.35, 20};
  const Ensemble a = build_ensemble(p, f.cov, f.proximity, 7, 99, 1);
  const Ensemble b = build_ensemble(p, f.cov, f.proximity, 7, 99, 3);
  ASSERT_EQ(a.draws.size(), 7u);
  for (std::size_t n = 0; n < 7; ++n) {
    EXPECT_EQ(a.draws[n].seed, draw_seed(99, n));
    EXPECT_EQ(a.draws[n].buyers_of, b.draws[n].buyers_of);
  }
  const Ensemble c1a = run_counterfactual(a, f.proximity, {1 / 0.9, Scenario::full, false}, 1);
  const Ensemble c1b = run_counterfactual(a, f.proximity, {1 / 0.9, Scenario::full, false}, 4);
  const Ensemble c2a = run_counterfactual(a, f.proximity, {1 / 0.9, Scenario::frozen, true}, 1);
  const Ensemble c2b = run_counterfactual(a, f.proximity, {1 / 0.9, Scenario::frozen, true}, 2);
  for (std::size_t n = 0; n < 7; ++n) {
    EXPECT_EQ(c1a.draws[n].buyers_of, c1b.draws[n].buyers_of);
    EXPECT_EQ(c2a.draws[n].buyers_of, c2b.draws[n].buyers_of);
  }
  EXPECT_DOUBLE_EQ(c1a.params.alpha, p.alpha / 0.9);
}

TEST(Scenarios, NoTransitivityMeansNoDifference) {
  const Fixture f = small_economy(40, 60, 4);
  const PoissonParams p{0.83, 0.19, 0.35, 0};
  const Ensemble base = build_ensemble(p, f.cov, f.proximity, 20, 5);
  const Ensemble c1 = run_counterfactual(base, f.proximity, {1 / 0.9, Scenario::full, false});
  const Ensemble c2 = run_counterfactual(base, f.proximity, {1 / 0.9, Scenario::frozen, false});
  // with gamma = 0 both scenarios are one keyed Bernoulli draw at the same seed
  for (std::size_t n = 0; n < 20; ++n) EXPECT_EQ(c1.draws[n].buyers_of, c2.draws[n].buyers_of);
}

TEST(Scenarios, CheaperTradeRaisesDegrees) {
  const Fixture f = small_economy(40, 60, 5);
  const PoissonParams p{0.83, 0.19, 0.35, 20};
  const Ensemble base = build_ensemble(p, f.cov, f.proximity, 20, 6);
  const Ensemble c1 = run_counterfactual(base, f.proximity, {1 / 0.9, Scenario::full, false});
  const Ensemble c2 = run_counterfactual(base, f.proximity, {1 / 0.9, Scenario::frozen, false});
  const EnsembleSummary s0 = summarize(base), s1 = summarize(c1), s2 = summarize(c2);
  EXPECT_EQ(s0.nonconverged, 0u);
  EXPECT_GT(s1.mean_density, s0.mean_density);
  EXPECT_GT(s2.mean_density, s0.mean_density);
  // shared uniforms make the draws monotone in lambda link by link
  for (std::size_t n = 0; n < 20; ++n)
    for (std::size_t i = 0; i < 40; ++i)
      EXPECT_TRUE(std::includes(c2.draws[n].buyers_of[i].begin(), c2.draws[n].buyers_of[i].end(),
                                base.draws[n].buyers_of[i].begin(), base.draws[n].buyers_of[i].end()));
  EXPECT_THROW(run_counterfactual(base, f.proximity, {0.0, Scenario::full, false}), DomainError);
}

TEST(Summary, MatchesDirectMoments) {
  Ensemble e;
  e.cov = {{1, 1}, {1, 1}};
  e.draws = {draw_of({{0}, {}}), draw_of({{0, 1}, {1}}), draw_of({{}, {}})};
  e.draws[0].iterations = 3;
  e.draws[1].iterations = 5;
  e.draws[2].iterations = 1;
  e.draws[1].mean_support = 0.3;
  const EnsembleSummary s = summarize(e);
  EXPECT_DOUBLE_EQ(s.mean_density, (0.25 + 0.75 + 0.0) / 3);
  // sample variance of {0.25, 0.75, 0} is 0.145833...; se = sqrt(var / 3)
  EXPECT_NEAR(s.density_se, std::sqrt(0.1458333333333333 / 3), 1e-15);
  EXPECT_DOUBLE_EQ(s.mean_support, 0.1);
  EXPECT_DOUBLE_EQ(s.mean_iterations, 3.0);
  EXPECT_EQ(s.max_iterations, 5u);
}
