#include "transnet/counterfact.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "transnet/errors.hpp"
#include "transnet/netcore.hpp"
#include "transnet/parallel.hpp"
#include "transnet/rng.hpp"

namespace transnet::counterfact {

using genmodels::LinkModel;
using genmodels::PoissonParams;

namespace {

double matrix_mean(const Matrix& m) {
  double s = 0.0;
  for (double v : m.flat()) s += v;
  return m.flat().empty() ? 0.0 : s / static_cast<double>(m.flat().size());
}

EquilibriumDraw solve_draw(const PoissonParams& params, const genmodels::LinkCovariates& cov, const Matrix& proximity,
                           std::uint64_t seed, const EquilibriumOptions& opts) {
  auto fp = genmodels::solve_fixed_point(LinkModel::make(params), cov, proximity, seed, opts.tol, opts.max_iter);
  EquilibriumDraw d;
  d.seed = seed;
  d.iterations = fp.iterations;
  d.converged = fp.converged;
  d.last_support_change = fp.last_support_change;
  d.mean_support = matrix_mean(netcore::common_support(fp.buyers_of, cov.buyer.size(), proximity));
  d.buyers_of = std::move(fp.buyers_of);
  return d;
}

void check_inputs(const genmodels::LinkCovariates& cov, const Matrix& proximity) {
  const std::size_t ns = cov.seller.size();
  if (ns == 0 || cov.buyer.empty()) throw SizeError("counterfactual: empty covariates");
  if (proximity.rows() != ns || proximity.cols() != ns) throw SizeError("counterfactual: proximity does not match sellers");
}

}  // namespace

EquilibriumDraw solve_equilibrium_draw(const PoissonParams& params, const genmodels::LinkCovariates& cov,
                                       const Matrix& proximity, std::uint64_t seed, const EquilibriumOptions& opts) {
  genmodels::validate(params);
  check_inputs(cov, proximity);
  if (!(opts.tol > 0.0)) throw DomainError("solve_equilibrium_draw: tol must be positive");
  EquilibriumDraw d = solve_draw(params, cov, proximity, seed, opts);
  if (!d.converged)
    throw ConvergenceError("solve_equilibrium_draw: no fixed point for seed " + std::to_string(seed) + " after " +
                           std::to_string(d.iterations) + " iterations, last S~ change " +
                           std::to_string(d.last_support_change));
  return d;
}

std::size_t Ensemble::nonconverged() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(draws.begin(), draws.end(), [](const EquilibriumDraw& d) { return !d.converged; }));
}

std::vector<double> Ensemble::densities() const {
  std::vector<double> out;
  out.reserve(draws.size());
  const double cells = static_cast<double>(n_sellers() * n_buyers());
  for (const auto& d : draws) out.push_back(static_cast<double>(genmodels::link_count(d.buyers_of)) / cells);
  return out;
}

std::vector<double> Ensemble::degrees(std::size_t n, bool sellers) const {
  if (n >= draws.size()) throw DomainError("Ensemble::degrees: draw index out of range");
  const auto& b = draws[n].buyers_of;
  std::vector<double> deg(sellers ? n_sellers() : n_buyers(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (sellers) deg[i] = static_cast<double>(b[i].size());
    else
      for (std::uint32_t j : b[i]) deg[j] += 1.0;
  }
  return deg;
}

std::uint64_t draw_seed(std::uint64_t master_seed, std::size_t n) noexcept {
  return derive_key(master_seed, {static_cast<std::uint64_t>(n)});
}

Ensemble build_ensemble(const PoissonParams& params, const genmodels::LinkCovariates& cov, const Matrix& proximity,
                        std::size_t n_draws, std::uint64_t master_seed, std::size_t workers,
                        const EquilibriumOptions& opts) {
  genmodels::validate(params);
  check_inputs(cov, proximity);
  if (n_draws == 0) throw DomainError("build_ensemble: at least one draw required");
  Ensemble e;
  e.params = params;
  e.cov = cov;
  e.master_seed = master_seed;
  e.draws.resize(n_draws);
  parallel_for(n_draws, workers,
               [&](std::size_t n) { e.draws[n] = solve_draw(params, cov, proximity, draw_seed(master_seed, n), opts); });
  return e;
}

Ensemble run_counterfactual(const Ensemble& baseline, const Matrix& proximity, const ScenarioConfig& scenario,
                            std::size_t workers, const EquilibriumOptions& opts) {
  if (!(scenario.xi > 0.0) || !std::isfinite(scenario.xi)) throw DomainError("run_counterfactual: xi must be positive");
  if (baseline.draws.empty()) throw InputError("run_counterfactual: empty baseline ensemble");
  check_inputs(baseline.cov, proximity);
  Ensemble out;
  out.params = baseline.params;
  out.params.alpha *= scenario.xi;
  out.cov = baseline.cov;
  out.master_seed = baseline.master_seed;
  out.draws.resize(baseline.draws.size());
  const std::size_t nb = baseline.n_buyers();

  if (scenario.mode == Scenario::full) {
    parallel_for(out.draws.size(), workers, [&](std::size_t n) {
      out.draws[n] = solve_draw(out.params, out.cov, proximity, baseline.draws[n].seed, opts);
    });
    return out;
  }

  Matrix mean_support;
  if (scenario.freeze_at_mean) {
    mean_support = Matrix(baseline.n_sellers(), nb);
    for (const auto& d : baseline.draws) {
      const Matrix s = netcore::common_support(d.buyers_of, nb, proximity);
      for (std::size_t k = 0; k < s.flat().size(); ++k) mean_support.flat()[k] += s.flat()[k];
    }
    for (double& v : mean_support.flat()) v /= static_cast<double>(baseline.draws.size());
  }
  const LinkModel model = LinkModel::make(out.params);
  parallel_for(out.draws.size(), workers, [&](std::size_t n) {
    const EquilibriumDraw& b = baseline.draws[n];
    const Matrix s = scenario.freeze_at_mean ? mean_support : netcore::common_support(b.buyers_of, nb, proximity);
    const Adjacency y = genmodels::sample_network(model, out.cov, &s, b.seed);
    EquilibriumDraw d;
    d.seed = b.seed;
    d.iterations = 1;
    d.converged = true;
    d.buyers_of = netcore::buyer_lists(y);
    d.mean_support = matrix_mean(netcore::common_support(d.buyers_of, nb, proximity));
    out.draws[n] = std::move(d);
  });
  return out;
}

std::vector<DecileRow> compare(const Ensemble& baseline, const Ensemble& counterfactual, Side side) {
  if (baseline.n_sellers() != counterfactual.n_sellers() || baseline.n_buyers() != counterfactual.n_buyers())
    throw InputError("compare: ensembles cover different nodes");
  if (baseline.draws.size() != counterfactual.draws.size() || baseline.draws.empty())
    throw InputError("compare: ensembles must have the same positive number of draws");
  const bool sellers = side == Side::sellers;
  const std::size_t n_nodes = sellers ? baseline.n_sellers() : baseline.n_buyers();
  const std::size_t n_draws = baseline.draws.size();

  std::vector<std::vector<double>> base(n_draws), diff(n_draws);
  std::vector<double> expected(n_nodes, 0.0);
  for (std::size_t n = 0; n < n_draws; ++n) {
    base[n] = baseline.degrees(n, sellers);
    diff[n] = counterfactual.degrees(n, sellers);
    for (std::size_t v = 0; v < n_nodes; ++v) {
      diff[n][v] -= base[n][v];
      expected[v] += base[n][v] / static_cast<double>(n_draws);
    }
  }
  std::vector<std::size_t> order(n_nodes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return expected[a] < expected[b]; });
  std::vector<std::size_t> decile(n_nodes);
  for (std::size_t pos = 0; pos < n_nodes; ++pos) decile[order[pos]] = pos * 10 / n_nodes;

  std::vector<DecileRow> rows(10);
  for (std::size_t q = 0; q < 10; ++q) rows[q].decile = q + 1;
  for (std::size_t v = 0; v < n_nodes; ++v) {
    rows[decile[v]].nodes += 1;
    rows[decile[v]].baseline_degree += expected[v];
  }
  for (std::size_t q = 0; q < 10; ++q) {
    DecileRow& r = rows[q];
    if (r.nodes == 0) continue;
    r.baseline_degree /= static_cast<double>(r.nodes);
    // Per-draw decile mean changes; their spread gives the Monte Carlo error.
    std::vector<double> per_draw(n_draws, 0.0);
    for (std::size_t n = 0; n < n_draws; ++n) {
      for (std::size_t v = 0; v < n_nodes; ++v)
        if (decile[v] == q) per_draw[n] += diff[n][v];
      per_draw[n] /= static_cast<double>(r.nodes);
    }
    const double mean = std::accumulate(per_draw.begin(), per_draw.end(), 0.0) / static_cast<double>(n_draws);
    double ss = 0.0;
    for (double d : per_draw) ss += (d - mean) * (d - mean);
    r.change = mean;
    r.change_se = n_draws > 1 ? std::sqrt(ss / static_cast<double>(n_draws - 1) / static_cast<double>(n_draws)) : 0.0;
    r.relative_change = r.baseline_degree > 0.0 ? mean / r.baseline_degree : 0.0;
  }
  rows.erase(std::remove_if(rows.begin(), rows.end(), [](const DecileRow& r) { return r.nodes == 0; }), rows.end());
  return rows;
}

EnsembleSummary summarize(const Ensemble& e) {
  EnsembleSummary s;
  s.draws = e.draws.size();
  if (s.draws == 0) return s;
  s.nonconverged = e.nonconverged();
  const auto dens = e.densities();
  const double n = static_cast<double>(s.draws);
  auto mean_se = [&](const std::vector<double>& v, double& mean, double& se) {
    mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = s.draws > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  };
  mean_se(dens, s.mean_density, s.density_se);
  std::vector<double> sup;
  for (const auto& d : e.draws) {
    sup.push_back(d.mean_support);
    s.mean_iterations += static_cast<double>(d.iterations) / n;
    s.max_iterations = std::max(s.max_iterations, d.iterations);
  }
  mean_se(sup, s.mean_support, s.support_se);
  return s;
}

}  // namespace transnet::counterfact
