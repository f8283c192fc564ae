#pragma once

// Dyadic link-formation models (logistic, balls-and-bins, generalized Poisson),
// the expected-surplus layer, seeded network sampling and synthetic data
// generators.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "transnet/grid.hpp"
#include "transnet/netcore.hpp"
#include "transnet/panel_data.hpp"
#include "transnet/rng.hpp"

namespace transnet::genmodels {

struct LogisticParams {
  double alpha = 0.0;
  double delta = 0.0;
  double scale = 1.0;  // logistic error scale; kept for completeness
  std::vector<double> x_origin;  // attractiveness per seller
  std::vector<double> x_dest;    // gregariousness per buyer
};

struct BallsBinsParams {
  double beta = 1.0;
  double gamma = 0.0;
  std::optional<double> kappa;  // homophily exponent on h_ij, unused unless set
};

struct PoissonParams {
  double alpha = 0.83;
  double eta = 0.19;
  double beta = 0.35;
  double gamma = 20.0;
  friend bool operator==(const PoissonParams&, const PoissonParams&) = default;
};

void validate(const LogisticParams& p);
void validate(const BallsBinsParams& p);
void validate(const PoissonParams& p);

/// 1 / (1 + exp(-(alpha + xo + xd + delta h))).
double logistic_prob(double x_origin, double x_dest, double h, const LogisticParams& p);

/// 1 - (1 - x_i/total)^(beta x_j + gamma S) with the base clamped to [0,1].
double ballsbins_prob(double x_i, double x_j, double total, double s, const BallsBinsParams& p,
                      double h = 1.0);

/// alpha x_i^eta x_j^beta (1 + gamma S).
double poisson_rate(double x_i, double x_j, double s, const PoissonParams& p);

/// 1 - exp(-lambda).
double poisson_prob(double lambda);

/// lambda - 1 + exp(-lambda), the expected surplus of a pair.
double expected_surplus(double lambda);

/// Iceberg cost change of x percent: alpha scaled by 100 / (100 + x).
PoissonParams apply_trade_cost(const PoissonParams& p, double pct_increase);

// ---------------------------------------------------------------------------
// Covariates and sampling

/// x / sum(x). Throws DomainError when the sum is not positive.
std::vector<double> shares(std::span<const double> sizes);
/// x / mean(x). Throws DomainError when the mean is not positive.
std::vector<double> mean_normalized(std::span<const double> sizes);

/// Model-ready node covariates.
struct LinkCovariates {
  std::vector<double> seller;
  std::vector<double> buyer;
};

/// Seller and buyer shares, the Poisson model's normalization.
LinkCovariates poisson_covariates(std::span<const double> seller_size, std::span<const double> buyer_size);
/// Seller shares and mean-normalized buyer sizes for balls-and-bins.
LinkCovariates ballsbins_covariates(std::span<const double> seller_size, std::span<const double> buyer_size);

enum class ModelKind : std::uint8_t { logistic, balls_bins, poisson };

struct LinkModel {
  ModelKind kind = ModelKind::poisson;
  LogisticParams logistic;
  BallsBinsParams balls;
  PoissonParams poisson;

  static LinkModel make(const PoissonParams& p) { return {ModelKind::poisson, {}, {}, p}; }
  static LinkModel make(const BallsBinsParams& p) { return {ModelKind::balls_bins, {}, p, {}}; }
  static LinkModel make(LogisticParams p) { return {ModelKind::logistic, std::move(p), {}, {}}; }

  /// Whether probabilities depend on S~.
  bool uses_support() const noexcept;
  /// Link probability for seller i, buyer j. For the logistic model the
  /// covariates are ignored and the node terms come from the params.
  double prob(const LinkCovariates& cov, std::size_t i, std::size_t j, double s, double h = 0.0) const;
};

/// Per-dyad uniform keyed by (key, dyad index).
inline double dyad_uniform(std::uint64_t key, std::size_t i, std::size_t j, std::size_t n_buyers) noexcept {
  return counter_uniform(key, static_cast<std::uint64_t>(i) * n_buyers + j);
}

/// Independent Bernoulli links: y_ij = 1{u_ij < p_ij} with u_ij keyed by (key, i, j).
/// support may be null (treated as zero). Throws NumericError for invalid probabilities.
Adjacency sample_network(const LinkModel& model, const LinkCovariates& cov, const Matrix* support,
                         std::uint64_t key, std::size_t workers = 1);

/// Draws links from an explicit probability matrix (used for bootstrap draws).
Adjacency sample_from_probabilities(const Matrix& prob, std::uint64_t key, bool clamp);

struct FixedPoint {
  std::vector<std::vector<std::uint32_t>> buyers_of;  // links per seller
  std::size_t iterations = 0;  // distinct link configurations generated
  bool converged = false;
  double last_support_change = 0.0;
};

/// Iterates y <- 1{u < p(S~(y))} with the uniforms fixed by key, starting from
/// S~ = 0, until y repeats or the sup-norm change
/// of S~ drops below tol. With gamma >= 0 the sequence is monotone.
FixedPoint solve_fixed_point(const LinkModel& model, const LinkCovariates& cov, const Matrix& proximity,
                             std::uint64_t key, double tol = 1e-10, std::size_t max_iter = 500);

/// Converts sparse links back to a dense adjacency.
Adjacency to_adjacency(const std::vector<std::vector<std::uint32_t>>& buyers_of, std::size_t n_buyers);
std::size_t link_count(const std::vector<std::vector<std::uint32_t>>& buyers_of);

// ---------------------------------------------------------------------------
// Synthetic data generation

struct SizeSpec {
  double mu = 0.0;
  double sigma = 1.5;
  double year_sigma = 0.1;  // log-size innovation between years
};

/// Rectangle in which seller locations are drawn around a few town centers.
struct GeoSpec {
  double lat_min = 4.55, lat_max = 5.15;
  double lon_min = -74.35, lon_max = -73.75;
  std::size_t towns = 8;
  double town_spread_deg = 0.03;
};

enum class DgpModel : std::uint8_t { poisson, balls_bins, logistic, lpm };

/// Linear-probability panel: p_ijt = (a_it + b_j) m_it + theta asinh S~_{ij,t-l}.
struct LpmSpec {
  double theta = 0.5;
  double seller_base = 0.02;  // a_it = seller_base * (x_it / mean)^seller_elasticity
  double seller_elasticity = 0.3;
  double buyer_base = 0.02;   // b_j = buyer_base * (x_j / mean)^buyer_elasticity
  double buyer_elasticity = 0.3;
};

/// Destination exposure and exchange-rate process driving the diversion
/// multiplier m_kt = 1 - phi * sum_c chi_kc (CEX_ct / CEX_c,t-1 - 1).
struct InstrumentDgp {
  std::vector<std::string> destinations{"EUR", "JPN", "GBR", "RUS", "CAN"};
  double exposure_prob = 0.5;   // probability a seller exports to a destination
  double share_max = 0.15;      // per-destination share ~ U(0.02, share_max)
  double fx_sigma = 0.15;       // sd of annual log exchange-rate changes
  double diversion = 2.0;       // phi; 0 disables the channel
};

enum class InitialState : std::uint8_t { empty, equilibrium };

struct DgpConfig {
  DgpModel model = DgpModel::poisson;
  std::size_t n_sellers = 300;
  std::size_t n_buyers = 500;
  SizeSpec sizes;
  GeoSpec geo;
  netcore::ProximitySpec proximity;
  bool transitivity = true;
  std::size_t horizon = 1;
  std::size_t lag = 1;
  int first_year = 2007;
  InitialState initial = InitialState::empty;
  std::uint64_t seed = 1;
  PoissonParams poisson;
  BallsBinsParams balls{2.72, 22.83, std::nullopt};
  LogisticParams logistic;
  LpmSpec lpm;
  InstrumentDgp instrument;
};

void validate(const DgpConfig& c);

/// Ground truth emitted alongside simulated data.
struct DgpTruth {
  DgpModel model = DgpModel::poisson;
  PoissonParams poisson;
  BallsBinsParams balls;
  double theta = 0.0;  // planted LPM transitivity effect
  bool transitivity = false;
};

/// Node sizes and seller geography of a synthetic economy.
struct SyntheticNodes {
  std::vector<double> seller_size;  // base sizes
  std::vector<double> buyer_size;
  std::vector<netcore::LatLon> locations;
  netcore::ProximityMatrix proximity;
};

SyntheticNodes simulate_nodes(const DgpConfig& c);

/// One cross-section drawn at the model's fixed point (or independently when
/// transitivity is off).
struct CrossSection {
  SyntheticNodes nodes;
  LinkCovariates covariates;
  Adjacency links;
  std::size_t iterations = 0;
  bool converged = true;
};

CrossSection simulate_cross_section(const DgpConfig& c);

/// The link model implied by the configuration (gamma forced to 0 when
/// transitivity is off). Not defined for the LPM.
LinkModel link_model(const DgpConfig& c);

struct SimulatedPanel {
  PanelDataset panel;
  DgpTruth truth;
};

/// Year-by-year panel. Period-t probabilities use S~ from the t-lag links when
/// transitivity is on. Year 0 uses S~ = 0 (or the fixed point when the initial
/// state is equilibrium).
SimulatedPanel simulate_dgp_panel(const DgpConfig& c);

/// Key of the per-dyad uniforms for panel year t.
std::uint64_t panel_link_key(std::uint64_t seed, std::size_t t) noexcept;

/// Fills prob(i,j) for every dyad; support may be null.
void link_probabilities(const LinkModel& model, const LinkCovariates& cov, const Matrix* support, Matrix& prob);

}  // namespace transnet::genmodels

