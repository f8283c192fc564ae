#include "transnet/genmodels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "transnet/parallel.hpp"

namespace transnet::genmodels {

void validate(const LogisticParams& p) {
  if (!(p.scale > 0.0)) throw DomainError("logistic scale must be positive");
  if (!std::isfinite(p.alpha) || !std::isfinite(p.delta)) throw DomainError("logistic parameters must be finite");
}

void validate(const BallsBinsParams& p) {
  if (!(p.beta > 0.0) || !std::isfinite(p.beta)) throw DomainError("balls-and-bins beta must be positive");
  if (!(p.gamma >= 0.0) || !std::isfinite(p.gamma)) throw DomainError("balls-and-bins gamma must be non-negative");
}

void validate(const PoissonParams& p) {
  if (!(p.alpha > 0.0) || !(p.eta > 0.0) || !(p.beta > 0.0) || !std::isfinite(p.alpha) || !std::isfinite(p.eta) ||
      !std::isfinite(p.beta))
    throw DomainError("Poisson alpha, eta and beta must be positive");
  if (!(p.gamma >= 0.0) || !std::isfinite(p.gamma)) throw DomainError("Poisson gamma must be non-negative");
}

double logistic_prob(double x_origin, double x_dest, double h, const LogisticParams& p) {
  const double v = p.alpha + x_origin + x_dest + p.delta * h;
  return 1.0 / (1.0 + std::exp(-v));
}

double ballsbins_prob(double x_i, double x_j, double total, double s, const BallsBinsParams& p, double h) {
  if (!(total > 0.0)) throw DomainError("ballsbins_prob: total seller size must be positive");
  double base = 1.0 - x_i / total;
  if (base < -1e-12 || base > 1.0 + 1e-12) throw NumericError("ballsbins_prob: seller share outside [0,1]");
  base = std::clamp(base, 0.0, 1.0);
  double trials = p.beta * x_j;
  if (p.kappa) trials *= std::pow(h, *p.kappa);
  trials += p.gamma * s;
  if (trials <= 0.0) return 0.0;
  if (base == 0.0) return 1.0;
  return -std::expm1(trials * std::log(base));
}

double poisson_rate(double x_i, double x_j, double s, const PoissonParams& p) {
  if (x_i < 0.0 || x_j < 0.0 || s < 0.0) throw DomainError("poisson_rate: arguments must be non-negative");
  return p.alpha * std::pow(x_i, p.eta) * std::pow(x_j, p.beta) * (1.0 + p.gamma * s);
}

double poisson_prob(double lambda) { return -std::expm1(-lambda); }

double expected_surplus(double lambda) {
  // lambda - 1 + exp(-lambda) = lambda + expm1(-lambda), accurate for small lambda
  return lambda + std::expm1(-lambda);
}

PoissonParams apply_trade_cost(const PoissonParams& p, double pct_increase) {
  if (!(pct_increase > -100.0)) throw DomainError("apply_trade_cost: cost change must exceed -100%");
  PoissonParams q = p;
  q.alpha = p.alpha * (100.0 / (100.0 + pct_increase));
  return q;
}

std::vector<double> shares(std::span<const double> sizes) {
  const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) throw DomainError("shares: sizes must have a positive finite sum");
  std::vector<double> out(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 0.0) throw DomainError("shares: negative size");
    out[i] = sizes[i] / total;
  }
  return out;
}

std::vector<double> mean_normalized(std::span<const double> sizes) {
  if (sizes.empty()) throw DomainError("mean_normalized: empty input");
  const double mean = std::accumulate(sizes.begin(), sizes.end(), 0.0) / static_cast<double>(sizes.size());
  if (!(mean > 0.0) || !std::isfinite(mean)) throw DomainError("mean_normalized: mean must be positive");
  std::vector<double> out(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 0.0) throw DomainError("mean_normalized: negative size");
    out[i] = sizes[i] / mean;
  }
  return out;
}

LinkCovariates poisson_covariates(std::span<const double> seller_size, std::span<const double> buyer_size) {
  return {shares(seller_size), shares(buyer_size)};
}

LinkCovariates ballsbins_covariates(std::span<const double> seller_size, std::span<const double> buyer_size) {
  return {shares(seller_size), mean_normalized(buyer_size)};
}

bool LinkModel::uses_support() const noexcept {
  switch (kind) {
    case ModelKind::poisson: return poisson.gamma != 0.0;
    case ModelKind::balls_bins: return balls.gamma != 0.0;
    case ModelKind::logistic: return false;
  }
  return false;
}

double LinkModel::prob(const LinkCovariates& cov, std::size_t i, std::size_t j, double s, double h) const {
  switch (kind) {
    case ModelKind::poisson: return poisson_prob(poisson_rate(cov.seller[i], cov.buyer[j], s, poisson));
    case ModelKind::balls_bins: return ballsbins_prob(cov.seller[i], cov.buyer[j], 1.0, s, balls, h);
    case ModelKind::logistic: return logistic_prob(logistic.x_origin.at(i), logistic.x_dest.at(j), h, logistic);
  }
  return 0.0;
}

void link_probabilities(const LinkModel& model, const LinkCovariates& cov, const Matrix* support, Matrix& prob) {
  const std::size_t ns = cov.seller.size(), nb = cov.buyer.size();
  if (support && (support->rows() != ns || support->cols() != nb))
    throw SizeError("link_probabilities: support shape differs from covariates");
  if (prob.rows() != ns || prob.cols() != nb) prob = Matrix(ns, nb);
  if (model.kind == ModelKind::poisson) {
    // Same operation order as poisson_rate so both paths agree bit-for-bit.
    const PoissonParams& p = model.poisson;
    std::vector<double> pi(ns), pj(nb);
    for (std::size_t i = 0; i < ns; ++i) {
      if (cov.seller[i] < 0.0) throw DomainError("link_probabilities: negative covariate");
      pi[i] = p.alpha * std::pow(cov.seller[i], p.eta);
    }
    for (std::size_t j = 0; j < nb; ++j) {
      if (cov.buyer[j] < 0.0) throw DomainError("link_probabilities: negative covariate");
      pj[j] = std::pow(cov.buyer[j], p.beta);
    }
    for (std::size_t i = 0; i < ns; ++i) {
      double* out = prob.row(i).data();
      const double* s = support ? support->row(i).data() : nullptr;
      for (std::size_t j = 0; j < nb; ++j) {
        const double lam = pi[i] * pj[j] * (1.0 + p.gamma * (s ? s[j] : 0.0));
        out[j] = -std::expm1(-lam);
      }
    }
    return;
  }
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < nb; ++j) prob(i, j) = model.prob(cov, i, j, support ? (*support)(i, j) : 0.0);
}

namespace {

void check_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw NumericError("link probability outside [0,1]");
}

}  // namespace

Adjacency sample_network(const LinkModel& model, const LinkCovariates& cov, const Matrix* support,
                         std::uint64_t key, std::size_t workers) {
  const std::size_t ns = cov.seller.size(), nb = cov.buyer.size();
  Matrix prob(ns, nb);
  link_probabilities(model, cov, support, prob);
  Adjacency y(ns, nb);
  parallel_for(ns, workers, [&](std::size_t i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const double p = prob(i, j);
      check_probability(p);
      y(i, j) = dyad_uniform(key, i, j, nb) < p ? 1 : 0;
    }
  });
  return y;
}

Adjacency sample_from_probabilities(const Matrix& prob, std::uint64_t key, bool clamp) {
  Adjacency y(prob.rows(), prob.cols());
  const std::size_t nb = prob.cols();
  for (std::size_t i = 0; i < prob.rows(); ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      double p = prob(i, j);
      if (std::isnan(p)) throw NumericError("sample_from_probabilities: NaN probability");
      if (clamp)
        p = std::clamp(p, 0.0, 1.0);
      else
        check_probability(p);
      y(i, j) = dyad_uniform(key, i, j, nb) < p ? 1 : 0;
    }
  }
  return y;
}

Adjacency to_adjacency(const std::vector<std::vector<std::uint32_t>>& buyers_of, std::size_t n_buyers) {
  Adjacency y(buyers_of.size(), n_buyers);
  for (std::size_t i = 0; i < buyers_of.size(); ++i)
    for (std::uint32_t j : buyers_of[i]) y(i, j) = 1;
  return y;
}

std::size_t link_count(const std::vector<std::vector<std::uint32_t>>& buyers_of) {
  std::size_t n = 0;
  for (const auto& b : buyers_of) n += b.size();
  return n;
}

FixedPoint solve_fixed_point(const LinkModel& model, const LinkCovariates& cov, const Matrix& proximity,
                             std::uint64_t key, double tol, std::size_t max_iter) {
  if (!(tol > 0.0)) throw DomainError("solve_fixed_point: tol must be positive");
  if (max_iter == 0) throw DomainError("solve_fixed_point: max_iter must be positive");
  const std::size_t ns = cov.seller.size(), nb = cov.buyer.size();
  if (proximity.rows() != ns) throw SizeError("solve_fixed_point: proximity does not match sellers");

  std::vector<double> u(ns * nb);
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < nb; ++j) u[i * nb + j] = dyad_uniform(key, i, j, nb);

  FixedPoint out;
  Matrix prob(ns, nb);
  Matrix support;
  bool have_support = false;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    link_probabilities(model, cov, have_support ? &support : nullptr, prob);
    std::vector<std::vector<std::uint32_t>> next(ns);
    for (std::size_t i = 0; i < ns; ++i) {
      const double* p = prob.row(i).data();
      const double* ui = u.data() + i * nb;
      for (std::size_t j = 0; j < nb; ++j) {
        check_probability(p[j]);
        if (ui[j] < p[j]) next[i].push_back(static_cast<std::uint32_t>(j));
      }
    }
    if (it > 1 && next == out.buyers_of) {
      out.converged = true;
      out.last_support_change = 0.0;
      return out;
    }
    out.buyers_of = std::move(next);
    out.iterations = it;
    if (!model.uses_support()) {
      // probabilities ignore S~, so the next draw repeats this one
      out.converged = true;
      return out;
    }
    Matrix updated = netcore::common_support(out.buyers_of, nb, proximity);
    if (have_support) {
      double change = 0.0;
      for (std::size_t k = 0; k < updated.size(); ++k)
        change = std::max(change, std::abs(updated.flat()[k] - support.flat()[k]));
      out.last_support_change = change;
      if (change < tol) {
        out.converged = true;
        return out;
      }
    }
    support = std::move(updated);
    have_support = true;
  }
  return out;
}

}  // namespace transnet::genmodels
