#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "support.hpp"
#include "transnet/errors.hpp"
#include "transnet/genmodels.hpp"
#include "transnet/netcore.hpp"
#include "transnet/transtest.hpp"

using namespace transnet;
using namespace transnet::transtest;
using transnet::testing::random_adjacency;
using transnet::testing::random_proximity;

namespace {

std::vector<double> lognormal(std::size_t n, std::uint64_t seed) {
  CounterEngine rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = std::exp(rng.normal());
  return v;
}

Matrix as_matrix(const Adjacency& a) {
  Matrix m(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.size(); ++k) m.flat()[k] = a.flat()[k];
  return m;
}

/// Projection of the outcome on the explicit indicator design by dense least squares.
Matrix dense_projection(const Matrix& y, const BinScheme& b) {
  const std::size_t ns = y.rows(), nb = y.cols(), qs = b.n_seller_bins, qb = b.n_buyer_bins;
  const std::size_t np = b.has_pair_bins() ? b.n_pair_bins : 0;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ns * nb),
                                            static_cast<Eigen::Index>(ns * qb + nb * qs + np));
  Eigen::VectorXd v(static_cast<Eigen::Index>(ns * nb));
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      const auto r = static_cast<Eigen::Index>(i * nb + j);
      v(r) = y(i, j);
      x(r, static_cast<Eigen::Index>(i * qb + b.buyer_bin[j])) = 1;
      x(r, static_cast<Eigen::Index>(ns * qb + j * qs + b.seller_bin[i])) = 1;
      if (np) x(r, static_cast<Eigen::Index>(ns * qb + nb * qs + b.pair_bin(i, j))) = 1;
    }
  const Eigen::VectorXd fit = x * x.completeOrthogonalDecomposition().solve(v);
  Matrix out(ns, nb);
  for (std::size_t k = 0; k < out.size(); ++k) out.flat()[k] = fit(static_cast<Eigen::Index>(k));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Bins

TEST(QuantileBins, EqualCountBins) {
  std::vector<double> v{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  std::size_t n = 0;
  std::vector<double> edges;
  const auto b = quantile_bins(v, 5, n, &edges);
  EXPECT_EQ(n, 5u);
  EXPECT_EQ(b, (std::vector<std::uint32_t>{4, 4, 3, 3, 2, 2, 1, 1, 0, 0}));
  EXPECT_EQ(edges, (std::vector<double>{2, 4, 6, 8, 10}));
}

TEST(QuantileBins, TiesMergeEmptyBins) {
  std::vector<double> v{1, 1, 1, 1, 2};
  std::size_t n = 0;
  const auto b = quantile_bins(v, 4, n);
  EXPECT_EQ(n, 2u);
  EXPECT_EQ(b, (std::vector<std::uint32_t>{0, 0, 0, 0, 1}));
  EXPECT_THROW(quantile_bins(std::vector<double>{}, 3, n), SizeError);
}

// ---------------------------------------------------------------------------
// Saturated fit

TEST(SaturatedFit, BlockSolverEqualsDenseProjection) {
  const Adjacency y = random_adjacency(14, 18, 0.3, 2);
  const BinScheme bins = make_bins(lognormal(14, 3), lognormal(18, 4), 3);
  const Matrix oracle = dense_projection(as_matrix(y), bins);
  for (FitSolver s : {FitSolver::block, FitSolver::conjugate_gradient}) {
    const SaturatedFit f = fit_saturated_lpm(as_matrix(y), bins, {s, 1e-12, 0});
    EXPECT_TRUE(f.converged);
    for (std::size_t k = 0; k < oracle.size(); ++k) {
      EXPECT_NEAR(f.fitted.flat()[k], oracle.flat()[k], 1e-8);
      EXPECT_NEAR(f.fitted.flat()[k] + f.residual.flat()[k], y.flat()[k], 1e-12);
    }
    EXPECT_LT(max_design_correlation(f, as_matrix(y), bins), 1e-7);
  }
}

TEST(SaturatedFit, PairBinsEqualDenseProjection) {
  const Adjacency y = random_adjacency(12, 15, 0.3, 5);
  BinScheme bins = make_bins(lognormal(12, 6), lognormal(15, 7), 3);
  add_pair_bins(bins, as_matrix(random_adjacency(12, 15, 0.5, 8)), 2);
  ASSERT_TRUE(bins.has_pair_bins());
  const Matrix oracle = dense_projection(as_matrix(y), bins);
  const SaturatedFit f = fit_saturated_lpm(as_matrix(y), bins, {FitSolver::automatic, 1e-12, 0});
  EXPECT_EQ(f.solver, FitSolver::conjugate_gradient);
  for (std::size_t k = 0; k < oracle.size(); ++k) EXPECT_NEAR(f.fitted.flat()[k], oracle.flat()[k], 1e-7);
}

TEST(MinNormalization, MinimumBecomesZero) {
  Matrix r(2, 2, std::vector<double>{0.5, -0.25, 1.0, 0.0});
  const Matrix m = minnorm(r);
  EXPECT_EQ(m, Matrix(2, 2, std::vector<double>{0.75, 0.0, 1.25, 0.25}));
  EXPECT_EQ(minnorm(r, -1.0), Matrix(2, 2, std::vector<double>{1.5, 0.75, 2.0, 1.0}));
  Matrix fitted(2, 2, 0.25);
  EXPECT_EQ(residualize_minnorm(r, fitted), m);
}

// ---------------------------------------------------------------------------
// Statistics

TEST(Statistics, TIsElementwiseProductSum) {
  const Matrix a(2, 2, std::vector<double>{1, 2, 3, 4}), b(2, 2, std::vector<double>{0.5, 0, 1, 2});
  EXPECT_DOUBLE_EQ(t_statistic(a, b), 0.5 + 3 + 8);
  EXPECT_THROW(t_statistic(a, Matrix(1, 2)), SizeError);
}

TEST(Statistics, TCheckMatchesTripleSum) {
  CounterEngine rng(12);
  Matrix y(9, 11), r(9, 9);
  for (auto& v : y.flat()) v = rng.uniform();
  for (auto& v : r.flat()) v = rng.uniform();
  double oracle = 0;
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 11; ++j)
      for (std::size_t k = 0; k < 9; ++k)
        if (k != i) oracle += y(i, j) * r(k, i) * y(k, j);
  EXPECT_NEAR(t_check_statistic(y, r), oracle, 1e-10 * oracle);
  EXPECT_NEAR(t_check_statistic_buyer_order(y, r), oracle, 1e-10 * oracle);
}

TEST(QuasiIndependence, LeaveOneOutBlockCounts) {
  const Adjacency y = random_adjacency(16, 20, 0.35, 13);
  const BinScheme bins = make_bins(lognormal(16, 14), lognormal(20, 15), 3);
  const Matrix p = quasi_independence_probabilities(y, bins);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 20; ++j) {
      const auto a = bins.seller_bin[i], b = bins.buyer_bin[j];
      double r = 0, c = 0, g = 0;
      for (std::size_t jj = 0; jj < 20; ++jj)
        if (bins.buyer_bin[jj] == b && jj != j) r += y(i, jj);
      for (std::size_t ii = 0; ii < 16; ++ii)
        if (bins.seller_bin[ii] == a && ii != i) c += y(ii, j);
      for (std::size_t ii = 0; ii < 16; ++ii)
        for (std::size_t jj = 0; jj < 20; ++jj)
          if (ii != i && jj != j && bins.seller_bin[ii] == a && bins.buyer_bin[jj] == b) g += y(ii, jj);
      EXPECT_NEAR(p(i, j), g > 0 ? r * c / g : 0.0, 1e-12) << i << "," << j;
      EXPECT_GE(p(i, j), 0.0);
    }
}

TEST(Summary, PercentilesAndDistance) {
  TestReport rep;
  for (int k = 1; k <= 100; ++k) rep.null_draws.push_back(k);
  rep.t_data = 99.5;
  summarize(rep);
  EXPECT_EQ(rep.null_p50, 50);
  EXPECT_EQ(rep.null_p95, 95);
  EXPECT_DOUBLE_EQ(rep.p_value, 0.01);
  const double sd = std::sqrt(100.0 * 101.0 / 12.0);  // sample sd of 1..100
  EXPECT_NEAR(rep.null_sd, sd, 1e-12);
  EXPECT_NEAR(rep.z_distance, 4.5 / sd, 1e-12);
  EXPECT_TRUE(rep.reject);
  rep.t_data = 95;
  summarize(rep);
  EXPECT_FALSE(rep.reject);
}

// ---------------------------------------------------------------------------
// Bootstrap and end-to-end

namespace {
struct Fixture {
  Adjacency y;
  std::vector<double> xs, xb;
  Matrix r;
};

Fixture small_network() {
  genmodels::DgpConfig c;
  c.n_sellers = 40;
  c.n_buyers = 60;
  c.seed = 21;
  const genmodels::CrossSection cs = genmodels::simulate_cross_section(c);
  return {cs.links, cs.nodes.seller_size, cs.nodes.buyer_size, cs.nodes.proximity.proximity};
}
}  // namespace

TEST(NullDistribution, WorkerCountDoesNotChangeDraws) {
  const Fixture f = small_network();
  TestConfig cfg;
  cfg.replicates = 100;
  cfg.bins = 4;
  cfg.seed = 5;
  const TestReport a = run_test(f.y, f.xs, f.xb, f.r, cfg);
  cfg.workers = 3;
  const TestReport b = run_test(f.y, f.xs, f.xb, f.r, cfg);
  EXPECT_EQ(a.null_draws, b.null_draws);
  EXPECT_EQ(a.t_data, b.t_data);
  cfg.seed = 6;
  EXPECT_NE(run_test(f.y, f.xs, f.xb, f.r, cfg).null_draws, a.null_draws);
}

TEST(NullDistribution, DeterministicDrawReproducesProbabilities) {
  const Fixture f = small_network();
  const BinScheme bins = make_bins(f.xs, f.xb, 4);
  TestConfig cfg;
  cfg.replicates = 100;
  cfg.draw = NullDraw::deterministic;
  const DataStatistic ds = data_statistic(f.y, f.r, bins, Variant::T);
  const Matrix p = null_probabilities(f.y, ds.fit_y, bins, NullModel::quasi_independence);
  const auto draws = null_distribution(p, bins, f.r, cfg, ds.anchors);
  ASSERT_EQ(draws.size(), 100u);
  for (double d : draws) EXPECT_EQ(d, draws.front());
}

TEST(RunTest, VariantsAndValidation) {
  const Fixture f = small_network();
  TestConfig cfg;
  cfg.replicates = 100;
  cfg.bins = 4;
  cfg.variant = Variant::T_check;
  const TestReport r = run_test(f.y, f.xs, f.xb, f.r, cfg);
  EXPECT_EQ(r.null_draws.size(), 100u);
  EXPECT_TRUE(std::isfinite(r.z_distance));
  EXPECT_EQ(r.reject, r.t_data > r.null_p95);
  cfg.replicates = 10;
  EXPECT_THROW(run_test(f.y, f.xs, f.xb, f.r, cfg), DomainError);
  cfg.replicates = 100;
  EXPECT_THROW(run_test(f.y, std::vector<double>(3, 1.0), f.xb, f.r, cfg), SizeError);
}

TEST(MonteCarlo, SmallRunIsReproducible) {
  MonteCarloConfig mc;
  mc.dgp.n_sellers = 30;
  mc.dgp.n_buyers = 50;
  mc.runs = 3;
  mc.test.replicates = 100;
  mc.test.bins = 4;
  const MonteCarloResult a = monte_carlo_validation(mc);
  mc.workers = 2;
  const MonteCarloResult b = monte_carlo_validation(mc);
  EXPECT_EQ(a.z_distance, b.z_distance);
  EXPECT_EQ(a.density, b.density);
  EXPECT_EQ(a.rejected.size(), 3u);
}
