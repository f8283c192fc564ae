#pragma once

// Longitudinal estimation of the transitivity effect: lagged common-support
// regressor, the exchange-rate shift-share instrument, two-way fixed-effect
// residualization, cross-fitted IV estimation with clustered inference and
// contribution profiles.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "transnet/grid.hpp"
#include "transnet/panel_data.hpp"

namespace transnet::panel {

/// asinh S~_{ij,t-lag} for outcome year t, S~ from the t-lag adjacency slice.
/// Throws DomainError when lag is 0, lag >= horizon or t < lag.
Matrix build_regressor(const PanelDataset& panel, const Matrix& proximity, std::size_t t, std::size_t lag = 1);

/// Shift-share exposure index of seller k relative to seller i:
/// (1 - chi_k_prev) + chi_k_prev * cex_cur / cex_prev when i is unexposed in
/// both periods, else 1.
double z_index(double chi_k_prev, double chi_i_prev, double chi_i_cur, double cex_cur, double cex_prev);

struct InstrumentSpec {
  std::string country;
  std::size_t lag = 1;
};

/// r_bar_{-i} = mean over k != i of r_ik (proximity is static across years).
std::vector<double> mean_proximity(const Matrix& proximity);

/// Z_{ij,t-lag} = asinh r_bar_{-i} * asinh x_bar_j * asinh(mean_{k != i} z_{ki,t-lag})
/// for outcome year t. Requires t >= lag + 1.
Matrix build_instrument(const PanelDataset& panel, const Matrix& proximity, const InstrumentSpec& spec,
                        std::size_t t);

// ---------------------------------------------------------------------------
// Two-way fixed effects

/// Observation groups for the (seller x year) and buyer effects.
struct EffectGroups {
  std::vector<std::uint32_t> first;   // seller-year id per observation
  std::vector<std::uint32_t> second;  // buyer id per observation
  std::size_t n_first = 0;
  std::size_t n_second = 0;
};

struct TwoWayFit {
  std::vector<double> first;   // effect per first-group id; 0 for unseen groups
  std::vector<double> second;
  std::vector<std::uint8_t> first_seen;
  std::vector<std::uint8_t> second_seen;
  std::size_t sweeps = 0;
};

struct WithinOptions {
  double tol = 1e-10;          // max change of any fitted cell between sweeps
  std::size_t max_sweeps = 10000;
};

/// Alternating-projection least squares of values on both effect groups, using
/// only rows with mask[r] != 0 (an empty mask uses all rows). Throws
/// ConvergenceError after max_sweeps.
TwoWayFit fit_two_way(std::span<const double> values, const EffectGroups& groups,
                      std::span<const std::uint8_t> mask = {}, const WithinOptions& opts = {});

/// values minus both fitted effects over all rows.
std::vector<double> within_transform(std::span<const double> values, const EffectGroups& groups,
                                     const WithinOptions& opts = {});

/// values minus the effects of a fit; unseen groups contribute 0.
std::vector<double> residualize(std::span<const double> values, const EffectGroups& groups, const TwoWayFit& fit);

// ---------------------------------------------------------------------------
// Clustered inference

struct ClusteredCoef {
  double coef = 0.0;
  double se = 0.0;
  std::size_t clusters = 0;
};

/// OLS of y on x without intercept with a cluster-robust sandwich variance,
/// sum_g (sum_{r in g} x_r e_r)^2 / (sum x^2)^2. Throws DomainError with fewer
/// than two clusters and when x has no variation.
ClusteredCoef clustered_ols(std::span<const double> y, std::span<const double> x,
                            std::span<const std::uint32_t> cluster);

/// Just-identified IV of y on x instrumented by z without intercept;
/// variance sum_g (sum z e)^2 / (sum z x)^2.
ClusteredCoef clustered_iv(std::span<const double> y, std::span<const double> x, std::span<const double> z,
                           std::span<const std::uint32_t> cluster);

struct ClusteredSe {
  double se = 0.0;
  double f_statistic = 0.0;  // (coef / se)^2, the single-instrument Wald F
  std::size_t clusters = 0;
};

/// Cluster-robust standard error of a coefficient with scores s_r = w_r e_r and
/// denominator sum w_r x_r; F = (coef / se)^2.
ClusteredSe clustered_se(double coef, std::span<const double> residuals, std::span<const double> weights,
                         double denominator, std::span<const std::uint32_t> cluster);

enum class ClusterScheme : std::uint8_t {
  seller_buyer_size,         // deciles of mean seller size x deciles of mean buyer size
  buyer_size_seller_distance  // deciles of mean buyer size x deciles of mean seller distance
};

/// Cluster id per (seller, buyer) pair, row-major; ids are compacted so empty
/// bins are skipped. n_clusters receives the count.
std::vector<std::uint32_t> dyad_clusters(const PanelDataset& panel, ClusterScheme scheme,
                                         std::size_t& n_clusters, std::size_t bins_per_axis = 10);

// ---------------------------------------------------------------------------
// Estimation sample and cross-fitted IV

/// Stacked dyad-year observations for outcome years t in years; row index
/// ((year position) * sellers + i) * buyers + j.
struct EstimationSample {
  std::vector<std::size_t> years;  // panel year indices of the outcome
  std::size_t n_sellers = 0;
  std::size_t n_buyers = 0;
  std::vector<double> y;
  std::vector<double> regressor;   // asinh S~_{ij,t-lag}
  std::vector<double> instrument;  // Z_{ij,t-lag}; empty for no-IV samples
  EffectGroups groups;
  std::vector<std::uint32_t> dyad;     // i * buyers + j per row
  std::vector<std::uint32_t> cluster;  // per row
  std::size_t n_clusters = 0;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t n_dyads() const noexcept { return n_sellers * n_buyers; }
};

struct SampleSpec {
  std::size_t lag = 1;
  bool with_instrument = true;
  InstrumentSpec instrument;  // lag is taken from this struct's lag
  ClusterScheme clusters = ClusterScheme::seller_buyer_size;
  std::size_t first_year = 0;  // 0 -> earliest year with all inputs defined
};

EstimationSample build_sample(const PanelDataset& panel, const Matrix& proximity, const SampleSpec& spec);

struct DdmlConfig {
  std::size_t folds = 5;
  std::size_t repetitions = 3;
  std::uint64_t seed = 1;
  bool use_instrument = true;
  double weak_f = 10.0;
  std::size_t workers = 1;
  WithinOptions within;
};

struct RepetitionResult {
  double theta = 0.0;
  double se = 0.0;
  double first_stage_coef = 0.0;
  double first_stage_se = 0.0;
  double f_statistic = 0.0;
};

struct EstimateReport {
  double theta_hat = 0.0;
  double se_theta = 0.0;
  double first_stage_coef = 0.0;
  double first_stage_se = 0.0;
  double f_statistic = 0.0;
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0;
  bool instrumented = true;
  bool identified = true;      // false when the instrument has no residual variation
  bool weak_instrument = false;  // F below the configured floor
  std::vector<RepetitionResult> repetitions;
  // Cross-fitted residuals averaged over repetitions, per sample row.
  std::vector<double> y_perp;
  std::vector<double> x_perp;
  std::vector<double> x_iv_perp;  // first-stage projection pi * z_perp; x_perp without IV
};

/// Fold of dyad d in repetition rep; every fold receives floor or ceil of
/// dyads / folds members.
std::vector<std::uint32_t> dyad_folds(std::size_t n_dyads, std::size_t folds, std::uint64_t seed, std::size_t rep);

/// Cross-fitted estimator: per repetition, residualize y, the regressor and the
/// instrument on effects fitted on the complement of each fold, pool held-out
/// residuals and run 2SLS (or OLS) with clustered errors; average across
/// repetitions.
EstimateReport ddml_iv_estimate(const EstimationSample& sample, const DdmlConfig& cfg);

// ---------------------------------------------------------------------------
// Contribution profiles

enum class ProfileSide : std::uint8_t { sellers, buyers };
enum class ProfileGrouping : std::uint8_t { support, size };

struct ProfileRow {
  std::size_t group = 0;       // 1-based percentile group
  std::size_t firms = 0;
  double mean_key = 0.0;       // mean grouping variable
  double mean_contribution = 0.0;
};

/// Firm-level theta * asinh S~: averaged over the firm's links within each year,
/// then over years with links. Firms are grouped into nearest-rank percentile
/// groups of the firm-level S~ (or time-averaged size).
std::vector<ProfileRow> contribution_profile(double theta, const EstimationSample& sample,
                                             const PanelDataset& panel, ProfileSide side,
                                             ProfileGrouping grouping, std::size_t groups = 100);

}  // namespace transnet::panel
