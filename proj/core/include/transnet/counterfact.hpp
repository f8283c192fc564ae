#pragma once

// Stochastic fixed-point equilibria of the generalized Poisson model, seeded
// ensembles and the trade-cost counterfactuals with and without the
// transitivity response.

#include <cstdint>
#include <vector>

#include "transnet/genmodels.hpp"
#include "transnet/grid.hpp"

namespace transnet::counterfact {

struct EquilibriumDraw {
  std::uint64_t seed = 0;
  std::vector<std::vector<std::uint32_t>> buyers_of;  // links per seller
  std::size_t iterations = 0;
  bool converged = false;
  double last_support_change = 0.0;
  double mean_support = 0.0;  // mean of S~ over all dyads
};

struct EquilibriumOptions {
  double tol = 1e-10;
  std::size_t max_iter = 500;
};

/// Throws ConvergenceError (message names the seed) when max_iter is reached.
EquilibriumDraw solve_equilibrium_draw(const genmodels::PoissonParams& params, const genmodels::LinkCovariates& cov,
                                       const Matrix& proximity, std::uint64_t seed,
                                       const EquilibriumOptions& opts = {});

struct Ensemble {
  genmodels::PoissonParams params;
  genmodels::LinkCovariates cov;
  std::uint64_t master_seed = 0;
  std::vector<EquilibriumDraw> draws;

  std::size_t n_sellers() const noexcept { return cov.seller.size(); }
  std::size_t n_buyers() const noexcept { return cov.buyer.size(); }
  std::size_t nonconverged() const noexcept;
  /// Link density per draw.
  std::vector<double> densities() const;
  /// Out-degree (sellers) or in-degree (buyers) of every node in draw n.
  std::vector<double> degrees(std::size_t n, bool sellers) const;
};

/// Seed of draw n: derive_key(master_seed, {n}).
std::uint64_t draw_seed(std::uint64_t master_seed, std::size_t n) noexcept;

/// n_draws equilibria keyed by draw_seed; non-converged draws keep their last
/// iterate and are counted, not dropped. Independent of the worker count.
Ensemble build_ensemble(const genmodels::PoissonParams& params, const genmodels::LinkCovariates& cov,
                        const Matrix& proximity, std::size_t n_draws, std::uint64_t master_seed,
                        std::size_t workers = 1, const EquilibriumOptions& opts = {});

enum class Scenario : std::uint8_t {
  full,    // C1: S~ re-equilibrates
  frozen   // C2: gamma * S~ held at the baseline values
};

struct ScenarioConfig {
  double xi = 1.0 / 0.9;  // alpha multiplier
  Scenario mode = Scenario::full;
  bool freeze_at_mean = false;  // C2 only: freeze at the ensemble-mean S~ instead of per draw
};

/// C1: fresh fixed points at xi * alpha with the baseline seeds. C2: one
/// Bernoulli draw per baseline draw at xi * alpha with that draw's S~ (or the
/// ensemble mean) held fixed, same seeds.
Ensemble run_counterfactual(const Ensemble& baseline, const Matrix& proximity, const ScenarioConfig& scenario,
                            std::size_t workers = 1, const EquilibriumOptions& opts = {});

enum class Side : std::uint8_t { sellers, buyers };

struct DecileRow {
  std::size_t decile = 0;  // 1-based, by baseline expected degree
  std::size_t nodes = 0;
  double baseline_degree = 0.0;  // mean expected degree in the decile
  double change = 0.0;           // mean expected degree change
  double relative_change = 0.0;  // change / baseline_degree (0 when baseline is 0)
  double change_se = 0.0;        // Monte Carlo standard error across paired draws
};

/// Per-node expected degrees are averaged over draws; nodes are ranked by the
/// baseline expectation (stable, ascending) and split into ten position
/// deciles. Draws are paired by index. Throws InputError when the ensembles
/// differ in nodes or draw count.
std::vector<DecileRow> compare(const Ensemble& baseline, const Ensemble& counterfactual, Side side);

struct EnsembleSummary {
  std::size_t draws = 0;
  std::size_t nonconverged = 0;
  double mean_density = 0.0;
  double density_se = 0.0;
  double mean_support = 0.0;
  double support_se = 0.0;
  double mean_iterations = 0.0;
  std::size_t max_iterations = 0;
};

EnsembleSummary summarize(const Ensemble& e);

}  // namespace transnet::counterfact
