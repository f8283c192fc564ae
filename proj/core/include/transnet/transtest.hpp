#pragma once

// Cross-sectional transitivity test: saturated linear-probability fits,
// min-normalized residuals, the T and T-check statistics, a bootstrap null and
// the Monte Carlo validation harness.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "transnet/genmodels.hpp"
#include "transnet/grid.hpp"

namespace transnet::transtest {

/// Quantile bins for node sizes and optional pair-covariate bins.
struct BinScheme {
  std::vector<std::uint32_t> seller_bin;  // X(x_i) per seller
  std::vector<std::uint32_t> buyer_bin;   // X(x_j) per buyer
  std::size_t n_seller_bins = 0;
  std::size_t n_buyer_bins = 0;
  std::vector<double> seller_edges;  // upper edges, nearest-rank quantiles
  std::vector<double> buyer_edges;
  Grid<std::uint32_t> pair_bin;  // H(h_ij); empty when no pair covariate
  std::size_t n_pair_bins = 0;

  bool has_pair_bins() const noexcept { return n_pair_bins > 0; }
};

/// Assigns values to q quantile bins; empty bins are merged into their upper
/// neighbour so labels are consecutive. edges receives the retained upper edges.
std::vector<std::uint32_t> quantile_bins(std::span<const double> values, std::size_t q, std::size_t& n_bins,
                                         std::vector<double>* edges = nullptr);

BinScheme make_bins(std::span<const double> seller_size, std::span<const double> buyer_size, std::size_t q = 10);
/// Adds quantile bins of a seller x buyer pair covariate.
void add_pair_bins(BinScheme& bins, const Matrix& h, std::size_t q);

enum class FitSolver : std::uint8_t { automatic, block, conjugate_gradient };

struct FitOptions {
  FitSolver solver = FitSolver::automatic;
  double tol = 1e-10;        // relative residual of the normal equations
  std::size_t max_iter = 0;  // 0 -> 10 x parameter count
};

struct SaturatedFit {
  Matrix fitted;
  Matrix residual;
  Matrix seller_coef;  // alpha^O[i][q], q over buyer bins
  Matrix buyer_coef;   // alpha^D[j][q], q over seller bins
  std::vector<double> pair_coef;  // delta[q]
  std::size_t iterations = 0;
  bool converged = true;
  FitSolver solver = FitSolver::block;
};

/// Least squares of outcome on {i x X(x_j)} and {j x X(x_i)} indicators, plus
/// H(h_ij) indicators when pair bins exist. Without pair bins the design splits
/// into independent two-way blocks solved exactly; otherwise Jacobi-
/// preconditioned conjugate gradients on the normal equations.
SaturatedFit fit_saturated_lpm(const Matrix& outcome, const BinScheme& bins, const FitOptions& opts = {});

/// Max over design columns of |<column, residual>| / (||column|| ||outcome||).
double max_design_correlation(const SaturatedFit& fit, const Matrix& outcome, const BinScheme& bins);

/// values - fitted, shifted so the minimum is zero.
Matrix residualize_minnorm(const Matrix& values, const Matrix& fitted);
/// residual - min(residual).
Matrix minnorm(const Matrix& residual);
/// residual - anchor, for a minimum fixed elsewhere.
Matrix minnorm(const Matrix& residual, double anchor);

/// Sum of elementwise products.
double t_statistic(const Matrix& y_nr, const Matrix& s_nr);

/// Sum over i, j, k != i of y_nr[i][j] r_nr[k][i] y_nr[k][j], r_nr seller x seller.
double t_check_statistic(const Matrix& y_nr, const Matrix& r_nr);
/// Same sum evaluated buyer-first, for cross-checking.
double t_check_statistic_buyer_order(const Matrix& y_nr, const Matrix& r_nr);

enum class Variant : std::uint8_t { T, T_check };
enum class NullDraw : std::uint8_t { bernoulli, deterministic };

/// Which minimum min-normalizes replicate residuals: each sample's own, or the
/// data sample's (shared), which makes every replicate comparable to the data
/// up to the same additive constant.
enum class MinAnchor : std::uint8_t { per_sample, shared };

/// Link probabilities replicates are drawn from.
///  lpm_clamped: the saturated LPM fit clamped to [0,1].
///  quasi_independence: within each (seller bin, buyer bin) block,
///    p_ij = (R_i - y_ij)(C_j - y_ij) / (G - R_i - C_j + y_ij), with R_i the
///    seller's links into the block, C_j the buyer's links from it and G the
///    block total; every factor leaves out dyad (i,j) and the estimate is
///    non-negative by construction.
enum class NullModel : std::uint8_t { lpm_clamped, quasi_independence };

struct TestConfig {
  std::size_t bins = 10;
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  Variant variant = Variant::T;
  NullDraw draw = NullDraw::bernoulli;
  MinAnchor anchor = MinAnchor::shared;
  NullModel null_model = NullModel::quasi_independence;
  bool resample = false;  // resample sellers and buyers with replacement per replicate
  std::size_t workers = 1;
  FitOptions fit;

  /// Resampled nodes, clamped LPM probabilities and per-sample minima.
  static TestConfig literal();
};

struct TestReport {
  double t_data = 0.0;
  std::vector<double> null_draws;
  double p_value = 1.0;
  double null_p50 = 0.0;
  double null_p95 = 0.0;
  double null_sd = 0.0;
  double z_distance = 0.0;  // (t_data - p95) / sd
  bool reject = false;      // t_data > p95
  std::uint64_t seed = 0;
  Variant variant = Variant::T;
  std::size_t replicates_with_empty_bins = 0;
};

/// Minimum residuals of the data sample.
struct Anchors {
  double y = 0.0;
  double support = 0.0;  // unused by T_check
};

/// Data-side statistic of either variant given a link matrix.
struct DataStatistic {
  double value = 0.0;
  SaturatedFit fit_y;
  Anchors anchors;
};

DataStatistic data_statistic(const Adjacency& y, const Matrix& proximity, const BinScheme& bins,
                             Variant variant, const FitOptions& fit = {});

/// Leave-one-out quasi-independence probabilities (see NullModel). Pair bins
/// are not supported.
Matrix quasi_independence_probabilities(const Adjacency& y, const BinScheme& bins);

/// Base probabilities of the chosen null model, not yet clamped.
Matrix null_probabilities(const Adjacency& y, const SaturatedFit& fit_y, const BinScheme& bins, NullModel model);

/// B bootstrap replicates of the statistic under conditional independence,
/// drawn from prob (clamped to [0,1]). Replicate b depends only on (seed, b).
/// anchors is used when cfg.anchor is shared.
std::vector<double> null_distribution(const Matrix& prob, const BinScheme& bins, const Matrix& proximity,
                                      const TestConfig& cfg, const Anchors& anchors = {},
                                      std::size_t* empty_bin_replicates = nullptr);

TestReport run_test(const Adjacency& y, std::span<const double> seller_size, std::span<const double> buyer_size,
                    const Matrix& proximity, const TestConfig& cfg);

/// Summary of a null sample against a data statistic.
void summarize(TestReport& report);

struct MonteCarloConfig {
  genmodels::DgpConfig dgp;
  std::size_t runs = 500;
  TestConfig test;
  std::uint64_t seed = 1;
  std::size_t workers = 1;  // parallel over runs
};

struct MonteCarloResult {
  std::vector<double> dist_p50;  // T - null 50th percentile
  std::vector<double> dist_p95;  // T - null 95th percentile
  std::vector<double> z_distance;
  std::vector<double> p_value;
  std::vector<std::uint8_t> rejected;
  std::vector<double> density;
  std::size_t nonconverged_dgp = 0;
  double rejection_fraction() const;
};

MonteCarloResult monte_carlo_validation(const MonteCarloConfig& cfg);

}  // namespace transnet::transtest
