#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "support.hpp"
#include "transnet/errors.hpp"
#include "transnet/genmodels.hpp"
#include "transnet/netcore.hpp"
#include "transnet/panel.hpp"

using namespace transnet;
using namespace transnet::panel;

namespace {

genmodels::DgpConfig lpm_config(std::size_t ns, std::size_t nb, std::size_t horizon, std::uint64_t seed) {
  genmodels::DgpConfig c;
  c.model = genmodels::DgpModel::lpm;
  c.n_sellers = ns;
  c.n_buyers = nb;
  c.horizon = horizon;
  c.seed = seed;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Regressor and instrument

TEST(Regressor, AsinhOfLaggedSupport) {
  const auto sim = genmodels::simulate_dgp_panel(lpm_config(20, 30, 4, 3));
  const PanelDataset& p = sim.panel;
  const Matrix& r = p.proximity.proximity;
  const Matrix x = build_regressor(p, r, 3, 2);
  const Matrix s = netcore::common_support(p.graph.links(1), r);
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_DOUBLE_EQ(x.flat()[k], std::asinh(s.flat()[k]));
  EXPECT_THROW(build_regressor(p, r, 1, 2), DomainError);
  EXPECT_THROW(build_regressor(p, r, 3, 0), DomainError);
}

TEST(Instrument, ExposureIndexCases) {
  EXPECT_DOUBLE_EQ(z_index(0.2, 0.0, 0.0, 1.1, 1.0), 0.8 + 0.2 * 1.1);
  EXPECT_EQ(z_index(0.2, 0.1, 0.0, 1.1, 1.0), 1.0);  // seller i exposed
  EXPECT_EQ(z_index(0.2, 0.0, 0.3, 1.1, 1.0), 1.0);
  EXPECT_EQ(z_index(0.0, 0.0, 0.0, 3.0, 1.0), 1.0);  // seller k unexposed
  EXPECT_THROW(z_index(1.2, 0, 0, 1, 1), DomainError);
  EXPECT_THROW(z_index(0.2, 0, 0, 0, 1), DomainError);
}

TEST(Instrument, ConstantRatesGiveUnitIndexForEveryShare) {
  CounterEngine rng(4);
  for (int k = 0; k < 100000; ++k) {
    const double chi = rng.uniform(), rate = std::exp(3 * rng.normal());
    ASSERT_EQ(z_index(chi, 0.0, 0.0, rate, rate), 1.0) << chi << " " << rate;
  }
}

TEST(Instrument, ConstantRatesMakeInstrumentTimeInvariant) {
  auto c = lpm_config(25, 30, 5, 6);
  c.instrument.fx_sigma = 0.0;
  const auto sim = genmodels::simulate_dgp_panel(c);
  const PanelDataset& p = sim.panel;
  for (std::size_t t = 1; t < p.n_years(); ++t)
    for (std::size_t d = 0; d < p.destinations.size(); ++d) ASSERT_EQ(p.fx(t, d), p.fx(0, d));
  const InstrumentSpec spec{"EUR", 1};
  const Matrix z2 = build_instrument(p, p.proximity.proximity, spec, 2);
  const std::vector<double> rbar = mean_proximity(p.proximity.proximity);
  const std::vector<double> xbar = p.sizes.buyer_mean();
  for (std::size_t i = 0; i < 25; ++i)
    for (std::size_t j = 0; j < 30; ++j) EXPECT_EQ(z2(i, j), std::asinh(rbar[i]) * std::asinh(1.0) * std::asinh(xbar[j]));
  for (std::size_t t = 3; t < 5; ++t) EXPECT_EQ(build_instrument(p, p.proximity.proximity, spec, t), z2);
}

TEST(Instrument, MeanProximityExcludesSelf) {
  Matrix r(3, 3);
  r(0, 1) = r(1, 0) = 1.0;
  r(0, 2) = r(2, 0) = 0.5;
  const auto m = mean_proximity(r);
  EXPECT_DOUBLE_EQ(m[0], 0.75);
  EXPECT_DOUBLE_EQ(m[1], 0.5);
  EXPECT_DOUBLE_EQ(m[2], 0.25);
}

// ---------------------------------------------------------------------------
// Two-way effects

namespace {

struct TwoWayFixture {
  std::vector<double> v;
  EffectGroups g;
};

TwoWayFixture unbalanced_groups(std::uint64_t seed) {
  TwoWayFixture f;
  CounterEngine rng(seed);
  f.g.n_first = 6;
  f.g.n_second = 5;
  for (std::uint32_t a = 0; a < 6; ++a)
    for (std::uint32_t b = 0; b < 5; ++b) {
      if (rng.uniform() < 0.25) continue;  // missing cells
      const int reps = 1 + static_cast<int>(rng.uniform() * 2);
      for (int r = 0; r < reps; ++r) {
        f.g.first.push_back(a);
        f.g.second.push_back(b);
        f.v.push_back(rng.normal() + a - 0.5 * b);
      }
    }
  return f;
}

std::vector<double> dense_residuals(const TwoWayFixture& f) {
  const auto n = static_cast<Eigen::Index>(f.v.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(f.g.n_first + f.g.n_second));
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    y(r) = f.v[static_cast<std::size_t>(r)];
    x(r, f.g.first[static_cast<std::size_t>(r)]) = 1;
    x(r, static_cast<Eigen::Index>(f.g.n_first + f.g.second[static_cast<std::size_t>(r)])) = 1;
  }
  const Eigen::VectorXd e = y - x * x.completeOrthogonalDecomposition().solve(y);
  return {e.data(), e.data() + e.size()};
}

}  // namespace

TEST(TwoWay, WithinTransformEqualsDummyRegression) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const TwoWayFixture f = unbalanced_groups(seed);
    const auto oracle = dense_residuals(f);
    const auto w = within_transform(f.v, f.g, {1e-14, 100000});
    ASSERT_EQ(w.size(), oracle.size());
    for (std::size_t r = 0; r < w.size(); ++r) EXPECT_NEAR(w[r], oracle[r], 1e-9);
  }
}

TEST(TwoWay, MaskedFitIgnoresHeldOutRows) {
  TwoWayFixture f = unbalanced_groups(4);
  std::vector<std::uint8_t> mask(f.v.size(), 1);
  mask[0] = 0;
  const TwoWayFit a = fit_two_way(f.v, f.g, mask);
  f.v[0] += 1000.0;
  const TwoWayFit b = fit_two_way(f.v, f.g, mask);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(TwoWay, SweepCapRaises) {
  const TwoWayFixture f = unbalanced_groups(5);
  EXPECT_THROW(fit_two_way(f.v, f.g, {}, {1e-300, 1}), ConvergenceError);
}

// ---------------------------------------------------------------------------
// Clustered inference

TEST(Clustered, OlsCoefficientAndSandwich) {
  const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 5};
  const std::vector<std::uint32_t> cl{0, 0, 1, 1};
  const ClusteredCoef c = clustered_ols(y, x, cl);
  // b = 33 / 30; scores per cluster sum x e
  const double b = 33.0 / 30.0;
  const double g0 = 1 * (1 - b) + 2 * (3 - 2 * b), g1 = 3 * (2 - 3 * b) + 4 * (5 - 4 * b);
  EXPECT_DOUBLE_EQ(c.coef, b);
  EXPECT_NEAR(c.se, std::sqrt(g0 * g0 + g1 * g1) / 30.0, 1e-14);
  EXPECT_EQ(c.clusters, 2u);
  EXPECT_THROW(clustered_ols(y, x, std::vector<std::uint32_t>(4, 0)), DomainError);
}

TEST(Clustered, IvWithOwnInstrumentIsOls) {
  CounterEngine rng(8);
  std::vector<double> x(200), y(200);
  std::vector<std::uint32_t> cl(200);
  for (std::size_t r = 0; r < 200; ++r) {
    x[r] = rng.normal();
    y[r] = 0.7 * x[r] + rng.normal();
    cl[r] = static_cast<std::uint32_t>(r % 10);
  }
  const ClusteredCoef a = clustered_ols(y, x, cl), b = clustered_iv(y, x, x, cl);
  EXPECT_DOUBLE_EQ(a.coef, b.coef);
  EXPECT_NEAR(a.se, b.se, 1e-15);
}

TEST(Folds, BalancedAndSeeded) {
  const auto f = dyad_folds(103, 5, 9, 0);
  std::vector<std::size_t> count(5, 0);
  for (auto v : f) ++count[v];
  for (auto c : count) EXPECT_TRUE(c == 20 || c == 21);
  EXPECT_EQ(f, dyad_folds(103, 5, 9, 0));
  EXPECT_NE(f, dyad_folds(103, 5, 9, 1));
  EXPECT_THROW(dyad_folds(3, 5, 9, 0), SizeError);
}

// ---------------------------------------------------------------------------
// Estimation

TEST(Sample, RowLayoutAndClusters) {
  const auto sim = genmodels::simulate_dgp_panel(lpm_config(15, 20, 5, 10));
  SampleSpec spec;
  spec.instrument.country = "EUR";
  const EstimationSample s = build_sample(sim.panel, sim.panel.proximity.proximity, spec);
  EXPECT_EQ(s.years, (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_EQ(s.size(), 3u * 15 * 20);
  const std::size_t r = (1 * 15 + 4) * 20 + 7;
  EXPECT_EQ(s.y[r], sim.panel.graph.links(3)(4, 7));
  EXPECT_EQ(s.groups.first[r], 1u * 15 + 4);
  EXPECT_EQ(s.groups.second[r], 7u);
  EXPECT_EQ(s.dyad[r], 4u * 20 + 7);
  EXPECT_LE(s.n_clusters, 100u);
  spec.first_year = 3;
  EXPECT_EQ(build_sample(sim.panel, sim.panel.proximity.proximity, spec).years, (std::vector<std::size_t>{3, 4}));
}

TEST(Ddml, DeterministicAcrossWorkers) {
  const auto sim = genmodels::simulate_dgp_panel(lpm_config(40, 60, 5, 12));
  SampleSpec spec;
  spec.instrument.country = "EUR";
  const EstimationSample s = build_sample(sim.panel, sim.panel.proximity.proximity, spec);
  DdmlConfig cfg;
  cfg.repetitions = 2;
  const EstimateReport a = ddml_iv_estimate(s, cfg);
  cfg.workers = 3;
  const EstimateReport b = ddml_iv_estimate(s, cfg);
  EXPECT_EQ(a.theta_hat, b.theta_hat);
  EXPECT_EQ(a.se_theta, b.se_theta);
  ASSERT_EQ(a.repetitions.size(), 2u);
  EXPECT_NEAR(a.theta_hat, 0.5 * (a.repetitions[0].theta + a.repetitions[1].theta), 1e-15);
  EXPECT_TRUE(a.identified);
  EXPECT_GT(a.se_theta, 0.0);
  cfg.use_instrument = false;
  const EstimateReport o = ddml_iv_estimate(s, cfg);
  EXPECT_FALSE(o.instrumented);
  EXPECT_TRUE(std::isfinite(o.theta_hat));
}

TEST(Ddml, RecoversPlantedEffectWithinNoise) {
  const auto sim = genmodels::simulate_dgp_panel(lpm_config(120, 200, 6, 13));
  SampleSpec spec;
  spec.instrument.country = "EUR";
  const EstimationSample s = build_sample(sim.panel, sim.panel.proximity.proximity, spec);
  const EstimateReport r = ddml_iv_estimate(s, {});
  EXPECT_LT(std::abs(r.theta_hat - sim.truth.theta), 3.5 * r.se_theta)
      << "theta " << r.theta_hat << " se " << r.se_theta;
}

TEST(Profiles, ContributionScalesWithTheta) {
  const auto sim = genmodels::simulate_dgp_panel(lpm_config(30, 40, 4, 14));
  SampleSpec spec;
  spec.with_instrument = false;
  const EstimationSample s = build_sample(sim.panel, sim.panel.proximity.proximity, spec);
  const auto a = contribution_profile(1.0, s, sim.panel, ProfileSide::buyers, ProfileGrouping::size, 10);
  const auto b = contribution_profile(2.0, s, sim.panel, ProfileSide::buyers, ProfileGrouping::size, 10);
  ASSERT_EQ(a.size(), b.size());
  std::size_t firms = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_NEAR(b[k].mean_contribution, 2 * a[k].mean_contribution, 1e-14);
    EXPECT_GE(a[k].mean_contribution, 0.0);
    if (k) {
      EXPECT_GE(a[k].mean_key, a[k - 1].mean_key);
    }
    firms += a[k].firms;
  }
  EXPECT_LE(firms, 40u);
  EXPECT_GT(firms, 0u);
}
