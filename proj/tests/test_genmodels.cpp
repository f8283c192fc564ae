#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "support.hpp"
#include "transnet/errors.hpp"
#include "transnet/genmodels.hpp"

using namespace transnet;
using namespace transnet::genmodels;

// ---------------------------------------------------------------------------
// Link probabilities

TEST(Logistic, MatchesClosedForm) {
  LogisticParams p;
  p.alpha = -1.0;
  p.delta = 0.5;
  EXPECT_DOUBLE_EQ(logistic_prob(0.3, 0.2, 2.0, p), 1.0 / (1.0 + std::exp(-(-1.0 + 0.3 + 0.2 + 1.0))));
  EXPECT_DOUBLE_EQ(logistic_prob(0, 0, 0, LogisticParams{}), 0.5);
}

TEST(BallsBins, OccupancyProbability) {
  const BallsBinsParams p{2.0, 10.0, std::nullopt};
  // 1 - (1 - 0.1)^(2 * 1.5 + 10 * 0.2) = 1 - 0.9^5
  EXPECT_NEAR(ballsbins_prob(0.1, 1.5, 1.0, 0.2, p), 1.0 - std::pow(0.9, 5.0), 1e-15);
  EXPECT_EQ(ballsbins_prob(0.0, 1.5, 1.0, 0.0, p), 0.0);
  EXPECT_EQ(ballsbins_prob(1.0, 1.5, 1.0, 0.0, p), 1.0);
  EXPECT_THROW(ballsbins_prob(0.1, 1.0, 0.0, 0.0, p), DomainError);
  EXPECT_THROW(ballsbins_prob(2.0, 1.0, 1.0, 0.0, p), NumericError);
}

TEST(Poisson, RateAndProbability) {
  const PoissonParams p{0.83, 0.19, 0.35, 20.0};
  const double lam = 0.83 * std::pow(0.01, 0.19) * std::pow(0.002, 0.35) * (1 + 20 * 0.05);
  EXPECT_DOUBLE_EQ(poisson_rate(0.01, 0.002, 0.05, p), lam);
  EXPECT_DOUBLE_EQ(poisson_prob(lam), 1.0 - std::exp(-lam));
  EXPECT_EQ(poisson_prob(0.0), 0.0);
  EXPECT_THROW(poisson_rate(-0.1, 0.1, 0.0, p), DomainError);
}

TEST(Poisson, ProbabilityIncreasesInSupport) {
  const PoissonParams p;
  double last = -1;
  for (double s = 0; s <= 1.0; s += 0.05) {
    const double q = poisson_prob(poisson_rate(0.01, 0.001, s, p));
    EXPECT_GT(q, last);
    last = q;
  }
}

TEST(Validation, RejectsInvalidParameters) {
  EXPECT_THROW(validate(PoissonParams{0.0, 0.2, 0.3, 1.0}), DomainError);
  EXPECT_THROW(validate(PoissonParams{1.0, 0.2, 0.3, -1.0}), DomainError);
  EXPECT_THROW(validate(BallsBinsParams{0.0, 1.0, std::nullopt}), DomainError);
  LogisticParams l;
  l.scale = 0;
  EXPECT_THROW(validate(l), DomainError);
  EXPECT_NO_THROW(validate(PoissonParams{}));
}

// ---------------------------------------------------------------------------
// Expected surplus

TEST(ExpectedSurplus, MatchesQuadratureOfSurplusIntegral) {
  // integral over [0, L] of (L - e) dF(e) with F(e) = 1 - exp(-e)
  for (double lam : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    auto integrand = [lam](double e) { return (lam - e) * std::exp(-e); };
    const double q = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, lam, 0, 1e-14);
    EXPECT_NEAR(expected_surplus(lam), q, 1e-12) << "lambda=" << lam;
  }
}

TEST(ExpectedSurplus, SlopeIsLinkProbability) {
  for (double lam : {1e-6, 0.01, 0.3, 2.0, 30.0}) {
    const double h = 1e-6 * std::max(1.0, lam);
    const double slope = (expected_surplus(lam + h) - expected_surplus(lam - h)) / (2 * h);
    EXPECT_NEAR(slope, poisson_prob(lam), 1e-6);
  }
  EXPECT_EQ(expected_surplus(0.0), 0.0);
  EXPECT_NEAR(expected_surplus(1e-8), 0.5e-16, 1e-22);  // lambda^2 / 2 for small lambda
}

TEST(TradeCost, ScalesAlphaOnly) {
  const PoissonParams p;
  const PoissonParams q = apply_trade_cost(p, 10.0);
  EXPECT_DOUBLE_EQ(q.alpha, p.alpha * 100.0 / 110.0);
  EXPECT_EQ(q.eta, p.eta);
  EXPECT_EQ(q.gamma, p.gamma);
  EXPECT_THROW(apply_trade_cost(p, -100.0), DomainError);
}

// ---------------------------------------------------------------------------
// Covariates and sampling

TEST(Covariates, SharesAndMeanNormalization) {
  const std::vector<double> x{1, 3, 4};
  EXPECT_EQ(shares(x), (std::vector<double>{0.125, 0.375, 0.5}));
  const auto m = mean_normalized(x);
  EXPECT_DOUBLE_EQ(m[0], 0.375);
  EXPECT_DOUBLE_EQ(m[2], 1.5);
  EXPECT_THROW(shares(std::vector<double>{0, 0}), DomainError);
  const LinkCovariates c = ballsbins_covariates(x, x);
  EXPECT_DOUBLE_EQ(std::accumulate(c.seller.begin(), c.seller.end(), 0.0), 1.0);
  EXPECT_DOUBLE_EQ(std::accumulate(c.buyer.begin(), c.buyer.end(), 0.0), 3.0);
}

namespace {
LinkCovariates lognormal_covariates(std::size_t ns, std::size_t nb, std::uint64_t seed) {
  CounterEngine rng(seed);
  std::vector<double> s(ns), b(nb);
  for (auto& v : s) v = std::exp(1.5 * rng.normal());
  for (auto& v : b) v = std::exp(1.5 * rng.normal());
  return poisson_covariates(s, b);
}
}  // namespace

TEST(Sampling, KeyedUniformsAreOrderAndWorkerIndependent) {
  const LinkCovariates cov = lognormal_covariates(40, 60, 3);
  const LinkModel m = LinkModel::make(PoissonParams{5.0, 0.3, 0.3, 0.0});
  const Adjacency a = sample_network(m, cov, nullptr, 77, 1);
  EXPECT_EQ(a, sample_network(m, cov, nullptr, 77, 4));
  EXPECT_NE(a, sample_network(m, cov, nullptr, 78, 1));
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 60; ++j)
      EXPECT_EQ(a(i, j), dyad_uniform(77, i, j, 60) < m.prob(cov, i, j, 0.0) ? 1 : 0);
}

TEST(Sampling, FrequencyMatchesProbability) {
  Matrix p(1, 20000, 0.3);
  const Adjacency a = sample_from_probabilities(p, 5, false);
  const double freq = std::accumulate(a.flat().begin(), a.flat().end(), 0.0) / 20000.0;
  EXPECT_NEAR(freq, 0.3, 4 * std::sqrt(0.21 / 20000));
  p(0, 0) = 1.2;
  EXPECT_THROW(sample_from_probabilities(p, 5, false), NumericError);
  EXPECT_NO_THROW(sample_from_probabilities(p, 5, true));
}

TEST(FixedPoint, ZeroTransitivityStopsAfterOneConfiguration) {
  const LinkCovariates cov = lognormal_covariates(30, 50, 4);
  const netcore::ProximityMatrix prox =
      netcore::build_proximity(transnet::testing::random_proximity(30, 8));
  const LinkModel m = LinkModel::make(PoissonParams{5.0, 0.3, 0.3, 0.0});
  const FixedPoint fp = solve_fixed_point(m, cov, prox.proximity, 9);
  EXPECT_TRUE(fp.converged);
  EXPECT_EQ(fp.iterations, 1u);
  EXPECT_EQ(to_adjacency(fp.buyers_of, 50), sample_network(m, cov, nullptr, 9));
}

TEST(FixedPoint, SolutionReproducesItself) {
  const LinkCovariates cov = lognormal_covariates(60, 90, 5);
  const netcore::ProximityMatrix prox =
      netcore::build_proximity(transnet::testing::random_proximity(60, 10));
  const LinkModel m = LinkModel::make(PoissonParams{0.83, 0.19, 0.35, 20.0});
  const FixedPoint fp = solve_fixed_point(m, cov, prox.proximity, 11);
  ASSERT_TRUE(fp.converged);
  const Adjacency y = to_adjacency(fp.buyers_of, 90);
  const Matrix s = netcore::common_support(y, prox.proximity);
  EXPECT_EQ(sample_network(m, cov, &s, 11), y);
  // gamma >= 0: the equilibrium contains the gamma = 0 draw
  const Adjacency base = sample_network(m, cov, nullptr, 11);
  for (std::size_t k = 0; k < y.size(); ++k) EXPECT_GE(y.flat()[k], base.flat()[k]);
  EXPECT_EQ(link_count(fp.buyers_of), static_cast<std::size_t>(std::accumulate(y.flat().begin(), y.flat().end(), 0)));
}

TEST(LinkProbabilities, AgreesWithScalarPath) {
  const LinkCovariates cov = lognormal_covariates(10, 12, 6);
  const Matrix s = transnet::testing::random_proximity(12, 3);  // any non-negative values
  Matrix support(10, 12);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 12; ++j) support(i, j) = s(i, j);
  const LinkModel m = LinkModel::make(PoissonParams{});
  Matrix p;
  link_probabilities(m, cov, &support, p);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 12; ++j) EXPECT_EQ(p(i, j), m.prob(cov, i, j, support(i, j)));
}

// ---------------------------------------------------------------------------
// Synthetic data

TEST(Dgp, NodesAreSeededAndShaped) {
  DgpConfig c;
  c.n_sellers = 25;
  c.n_buyers = 40;
  const SyntheticNodes a = simulate_nodes(c), b = simulate_nodes(c);
  EXPECT_EQ(a.seller_size, b.seller_size);
  EXPECT_EQ(a.seller_size.size(), 25u);
  EXPECT_EQ(a.buyer_size.size(), 40u);
  EXPECT_EQ(a.proximity.size(), 25u);
  for (const auto& p : a.locations) {
    EXPECT_GE(p.lat, c.geo.lat_min - 1);
    EXPECT_LE(p.lat, c.geo.lat_max + 1);
  }
  c.seed = 2;
  EXPECT_NE(simulate_nodes(c).seller_size, a.seller_size);
}

TEST(Dgp, PanelCarriesInstrumentInputs) {
  DgpConfig c;
  c.model = DgpModel::lpm;
  c.n_sellers = 30;
  c.n_buyers = 40;
  c.horizon = 4;
  const SimulatedPanel sim = simulate_dgp_panel(c);
  const PanelDataset& p = sim.panel;
  EXPECT_EQ(p.n_years(), 4u);
  EXPECT_EQ(p.graph.years().front(), 2007);
  EXPECT_EQ(p.destinations.size(), 5u);
  EXPECT_EQ(p.fx.rows(), 4u);
  EXPECT_EQ(sim.truth.theta, 0.5);
  for (std::size_t t = 0; t < 4; ++t) {
    const Matrix chi = p.dest_share(t);
    for (std::size_t i = 0; i < 30; ++i) {
      double total = 0;
      for (std::size_t k = 0; k < chi.cols(); ++k) total += chi(i, k);
      EXPECT_LT(total, 1.0);
    }
  }
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(simulate_dgp_panel(c).panel.graph.links(3), p.graph.links(3));
}

TEST(Dgp, InvalidConfigurationRejected) {
  DgpConfig c;
  c.n_sellers = 1;
  EXPECT_THROW(validate(c), Error);
  c = DgpConfig{};
  c.horizon = 0;
  EXPECT_THROW(validate(c), Error);
}
