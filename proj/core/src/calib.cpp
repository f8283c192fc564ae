#include "transnet/calib.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "transnet/netcore.hpp"
#include "transnet/parallel.hpp"
#include "transnet/rng.hpp"

namespace transnet::calib {

using genmodels::PoissonParams;

void CalibrationProblem::validate(bool need_artifacts) const {
  const std::size_t ns = y.rows(), nb = y.cols();
  if (ns == 0 || nb == 0) throw SizeError("calibration: empty problem");
  if (cov.seller.size() != ns || cov.buyer.size() != nb) throw SizeError("calibration: covariates do not match links");
  if (support.rows() != ns || support.cols() != nb) throw SizeError("calibration: support does not match links");
  for (double v : cov.seller)
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("calibration: invalid seller covariate");
  for (double v : cov.buyer)
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("calibration: invalid buyer covariate");
  if (!need_artifacts) return;
  if (y_perp.size() != ns * nb || x_iv_perp.size() != ns * nb)
    throw SizeError("calibration: residual artifacts do not match links");
  if (!std::isfinite(theta_hat)) throw DomainError("calibration: theta_hat must be finite");
}

CalibrationProblem make_problem(const PanelDataset& panel, const panel::EstimationSample& sample,
                                const panel::EstimateReport& report, std::size_t year_pos) {
  if (year_pos >= sample.years.size()) throw DomainError("make_problem: year position outside the sample");
  if (report.y_perp.size() != sample.size()) throw SizeError("make_problem: report does not match the sample");
  const std::size_t t = sample.years[year_pos];
  const std::size_t ns = sample.n_sellers, nb = sample.n_buyers;
  CalibrationProblem p;
  p.y = panel.graph.links(t);
  const auto srow = panel.sizes.seller_size.row(t);
  const auto brow = panel.sizes.buyer_size.row(t);
  p.cov = genmodels::poisson_covariates(srow, brow);
  p.support = netcore::common_support(p.y, panel.proximity.proximity);
  const std::size_t off = year_pos * ns * nb;
  p.y_perp.assign(report.y_perp.begin() + static_cast<std::ptrdiff_t>(off),
                  report.y_perp.begin() + static_cast<std::ptrdiff_t>(off + ns * nb));
  p.x_iv_perp.assign(report.x_iv_perp.begin() + static_cast<std::ptrdiff_t>(off),
                     report.x_iv_perp.begin() + static_cast<std::ptrdiff_t>(off + ns * nb));
  p.theta_hat = report.theta_hat;
  return p;
}

namespace {

/// log of covariates with 0 mapped to -inf (rate 0).
std::vector<double> logs(const std::vector<double>& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::log(x[i]);
  return out;
}

struct Terms {
  double ll = 0.0;
  double g[3] = {0.0, 0.0, 0.0};
  double h[6] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0};  // upper triangle, row-major
};

enum class Order { value, gradient, hessian };

/// Row-wise likelihood terms summed in row order for worker-independent
/// results. Derivatives are in (log alpha, log eta, log beta); dyads whose
/// probability is clamped contribute none.
Terms evaluate(const PoissonParams& p, const CalibrationProblem& prob, Order order, std::size_t workers) {
  const std::size_t ns = prob.n_sellers(), nb = prob.n_buyers();
  const std::vector<double> lx = logs(prob.cov.seller), lz = logs(prob.cov.buyer);
  const double la = std::log(p.alpha);
  std::vector<Terms> rows(ns);
  parallel_for(ns, workers, [&](std::size_t i) {
    Terms t;
    const double* s = prob.support.row(i).data();
    for (std::size_t j = 0; j < nb; ++j) {
      const bool link = prob.y(i, j) != 0;
      double lambda = 0.0;
      if (std::isfinite(lx[i]) && std::isfinite(lz[j]))
        lambda = std::exp(la + p.eta * lx[i] + p.beta * lz[j]) * (1.0 + p.gamma * s[j]);
      if (std::isnan(lambda)) throw NumericError("loglik: NaN rate");
      const double g = -std::expm1(-lambda);
      if (std::isnan(g)) throw NumericError("loglik: NaN probability");
      const double gc = std::clamp(g, kProbFloor, 1.0 - kProbFloor);
      t.ll += link ? std::log(gc) : std::log1p(-gc);
      if (order == Order::value || gc != g || lambda == 0.0) continue;
      // First and second derivatives of the term with respect to log lambda.
      double d1, d2;
      if (link) {
        const double em1 = std::expm1(lambda);
        d1 = lambda / em1;
        d2 = d1 - lambda * lambda * (em1 + 1.0) / (em1 * em1);
      } else {
        d1 = -lambda;
        d2 = -lambda;
      }
      const double a[3] = {1.0, p.eta * lx[i], p.beta * lz[j]};
      for (int k = 0; k < 3; ++k) t.g[k] += d1 * a[k];
      if (order != Order::hessian) continue;
      t.h[0] += d2 * a[0] * a[0];
      t.h[1] += d2 * a[0] * a[1];
      t.h[2] += d2 * a[0] * a[2];
      t.h[3] += d2 * a[1] * a[1] + d1 * a[1];
      t.h[4] += d2 * a[1] * a[2];
      t.h[5] += d2 * a[2] * a[2] + d1 * a[2];
    }
    rows[i] = t;
  });
  Terms total;
  for (const Terms& t : rows) {
    total.ll += t.ll;
    for (int k = 0; k < 3; ++k) total.g[k] += t.g[k];
    for (int k = 0; k < 6; ++k) total.h[k] += t.h[k];
  }
  return total;
}

void check_params(const PoissonParams& p) {
  if (!(p.alpha > 0.0) || !(p.eta > 0.0) || !(p.beta > 0.0) || !std::isfinite(p.alpha) || !std::isfinite(p.eta) ||
      !std::isfinite(p.beta))
    throw DomainError("calibration: alpha, eta and beta must be positive and finite");
  if (!(p.gamma >= 0.0) || !std::isfinite(p.gamma)) throw DomainError("calibration: gamma must be non-negative");
}

}  // namespace

double loglik(const PoissonParams& p, const CalibrationProblem& prob, std::size_t workers) {
  check_params(p);
  prob.validate(false);
  return evaluate(p, prob, Order::value, workers).ll;
}

double loglik_gradient(const PoissonParams& p, const CalibrationProblem& prob, double grad[3], std::size_t workers) {
  check_params(p);
  prob.validate(false);
  const Terms t = evaluate(p, prob, Order::gradient, workers);
  for (int k = 0; k < 3; ++k) grad[k] = t.g[k];
  return t.ll;
}

MleResult mle_given_gamma(const CalibrationProblem& prob, double gamma, const PoissonParams& init,
                          const MleOptions& opts) {
  prob.validate(false);
  check_params({init.alpha, init.eta, init.beta, gamma});
  auto params_of = [&](const Eigen::Vector3d& u) {
    return PoissonParams{std::exp(u[0]), std::exp(u[1]), std::exp(u[2]), gamma};
  };
  auto eval = [&](const Eigen::Vector3d& u, Order order, Eigen::Vector3d& g, Eigen::Matrix3d& h) {
    const Terms t = evaluate(params_of(u), prob, order, opts.workers);
    g = {t.g[0], t.g[1], t.g[2]};
    h << t.h[0], t.h[1], t.h[2], t.h[1], t.h[3], t.h[4], t.h[2], t.h[4], t.h[5];
    return t.ll;
  };

  Eigen::Vector3d u(std::log(init.alpha), std::log(init.eta), std::log(init.beta)), g;
  Eigen::Matrix3d h;
  double f = eval(u, Order::hessian, g, h);
  MleResult res;
  res.initial_loglik = f;
  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    res.iterations = it;
    if (g.norm() < opts.grad_tol) {
      res.converged = true;
      break;
    }
    // Newton direction on the negative Hessian, shifted until positive definite.
    Eigen::Matrix3d neg = -h;
    double shift = 0.0;
    Eigen::LLT<Eigen::Matrix3d> llt(neg);
    while (llt.info() != Eigen::Success || !std::isfinite(llt.matrixLLT().sum())) {
      shift = shift == 0.0 ? 1e-8 * std::max(1.0, neg.diagonal().cwiseAbs().maxCoeff()) : shift * 10.0;
      llt.compute(neg + shift * Eigen::Matrix3d::Identity());
      if (shift > 1e300) throw NumericError("mle_given_gamma: cannot form an ascent direction");
    }
    Eigen::Vector3d d = llt.solve(g);
    const double slope = d.dot(g);
    double step = 1.0;
    Eigen::Vector3d un, gn;
    Eigen::Matrix3d hn;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      un = u + step * d;
      if (std::abs(un[0]) < 700.0 && std::abs(un[1]) < 50.0 && std::abs(un[2]) < 50.0) {
        const double fn = eval(un, Order::gradient, gn, hn);
        // Near the optimum the gain falls below the rounding of f; then a
        // smaller gradient decides.
        const bool flat = std::abs(fn - f) <= 1e-13 * std::max(1.0, std::abs(f));
        if (fn >= f + 1e-4 * step * slope || (flat && gn.norm() < g.norm())) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no ascent left at machine precision
    u = un;
    f = eval(u, Order::hessian, g, h);
  }
  if (!res.converged && g.norm() < opts.grad_tol) res.converged = true;
  const PoissonParams best = params_of(u);
  res.alpha = best.alpha;
  res.eta = best.eta;
  res.beta = best.beta;
  res.loglik = f;
  res.grad_norm = g.norm();
  res.at_boundary = best.alpha < 1e-8;
  return res;
}

double theta_implied(const PoissonParams& p, const CalibrationProblem& prob, std::size_t workers) {
  check_params(p);
  prob.validate(true);
  const std::size_t ns = prob.n_sellers(), nb = prob.n_buyers();
  const double n = static_cast<double>(ns * nb);
  double mx = 0.0;
  for (double v : prob.x_iv_perp) mx += v;
  mx /= n;
  std::vector<double> num(ns, 0.0), sum_w(ns, 0.0), den(ns, 0.0);
  Matrix g(ns, nb);
  genmodels::link_probabilities(genmodels::LinkModel::make(p), prob.cov, &prob.support, g);
  parallel_for(ns, workers, [&](std::size_t i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const std::size_t r = i * nb + j;
      const double w = prob.y_perp[r] - static_cast<double>(prob.y(i, j)) + g(i, j);
      const double dx = prob.x_iv_perp[r] - mx;
      num[i] += dx * w;
      den[i] += dx * dx;
    }
  });
  // sum dx = 0, so the covariance needs no mean of w.
  const double cov = std::accumulate(num.begin(), num.end(), 0.0);
  const double var = std::accumulate(den.begin(), den.end(), 0.0);
  if (!(var > 0.0)) throw DomainError("theta_implied: regressor residual has zero variance");
  return cov / var;
}

double solve_gamma(const CalibrationProblem& prob, double alpha, double eta, double beta,
                   const CalibrationOptions& opts) {
  auto theta_at = [&](double g) { return theta_implied({alpha, eta, beta, g}, prob, opts.mle.workers) - prob.theta_hat; };
  double lo = 0.0;
  const double f0 = theta_at(lo);
  if (f0 == 0.0) return 0.0;
  double hi = 1.0, fhi = theta_at(hi);
  while ((f0 < 0.0) == (fhi < 0.0) && fhi != 0.0) {
    if (hi >= opts.gamma_max) throw CalibrationError("solve_gamma: no bracket for gamma in [0, gamma_max]");
    lo = hi;
    hi = std::min(2.0 * hi, opts.gamma_max);
    fhi = theta_at(hi);
  }
  if (fhi == 0.0) return hi;
  double flo = theta_at(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = theta_at(mid);
    if (std::abs(fm) < opts.theta_tol || hi - lo < 1e-12 * std::max(1.0, hi)) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

CalibrationResult hybrid_calibrate(const CalibrationProblem& prob, const CalibrationOptions& opts) {
  prob.validate(true);
  if (!(opts.damping > 0.0 && opts.damping <= 1.0)) throw ConfigError("hybrid_calibrate: damping must lie in (0,1]");
  if (!(opts.gamma_tol > 0.0)) throw ConfigError("hybrid_calibrate: tolerance must be positive");
  CalibrationResult res;
  double gamma = opts.init.gamma;
  PoissonParams start = opts.init;
  MleResult mle;
  double gamma_root = gamma;
  for (std::size_t it = 1; it <= opts.max_outer; ++it) {
    mle = mle_given_gamma(prob, gamma, start, opts.mle);
    start = {mle.alpha, mle.eta, mle.beta, 0.0};
    gamma_root = solve_gamma(prob, mle.alpha, mle.eta, mle.beta, opts);
    const double next = opts.damping * gamma_root + (1.0 - opts.damping) * gamma;
    res.gamma_path.push_back(next);
    res.iterations = it;
    const bool done = std::abs(next - gamma) < opts.gamma_tol * std::max(1.0, std::abs(gamma));
    gamma = next;
    if (done) {
      res.converged = true;
      break;
    }
  }
  // Report the moment condition's root with the last likelihood optimum.
  res.params = {mle.alpha, mle.eta, mle.beta, gamma_root};
  double grad[3];
  res.loglik = loglik_gradient(res.params, prob, grad, opts.mle.workers);
  res.grad_norm = std::sqrt(grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]);
  res.theta_gap = std::abs(prob.theta_hat - theta_implied(res.params, prob, opts.mle.workers));
  res.mle_grad_norm = mle.grad_norm;
  res.mle_converged = mle.converged;
  return res;
}

// ---------------------------------------------------------------------------
// Fit moments

Moments network_moments(const Adjacency& y) {
  const std::size_t ns = y.rows(), nb = y.cols();
  if (ns == 0 || nb == 0) throw SizeError("network_moments: empty network");
  std::vector<double> out(ns, 0.0), in(nb, 0.0);
  std::size_t links = 0;
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < nb; ++j)
      if (y(i, j)) {
        out[i] += 1.0;
        in[j] += 1.0;
        ++links;
      }
  Moments m;
  m.density = static_cast<double>(links) / static_cast<double>(ns * nb);
  m.outdeg_p25 = netcore::nearest_rank_percentile(out, 25.0);
  m.outdeg_p50 = netcore::nearest_rank_percentile(out, 50.0);
  m.outdeg_p75 = netcore::nearest_rank_percentile(out, 75.0);
  m.indeg_p25 = netcore::nearest_rank_percentile(in, 25.0);
  m.indeg_p50 = netcore::nearest_rank_percentile(in, 50.0);
  m.indeg_p75 = netcore::nearest_rank_percentile(in, 75.0);
  return m;
}

FitReport fit_report(const genmodels::LinkModel& model, const genmodels::LinkCovariates& cov, const Matrix& proximity,
                     const Adjacency& observed, std::size_t n, std::uint64_t seed, std::size_t workers) {
  if (n < 50) throw DomainError("fit_report: at least 50 draws required");
  if (observed.rows() != cov.seller.size() || observed.cols() != cov.buyer.size())
    throw SizeError("fit_report: observed network does not match covariates");
  FitReport rep;
  rep.observed = network_moments(observed);
  rep.draws = n;
  std::vector<Moments> draws(n);
  std::vector<std::uint8_t> nonconv(n, 0);
  parallel_for(n, workers, [&](std::size_t d) {
    const auto fp = genmodels::solve_fixed_point(model, cov, proximity, derive_key(seed, {static_cast<std::uint64_t>(d)}));
    nonconv[d] = !fp.converged;
    draws[d] = network_moments(genmodels::to_adjacency(fp.buyers_of, cov.buyer.size()));
  });
  const double nn = static_cast<double>(n);
  Moments& s = rep.simulated;
  for (const Moments& m : draws) {
    s.density += m.density / nn;
    s.outdeg_p25 += m.outdeg_p25 / nn;
    s.outdeg_p50 += m.outdeg_p50 / nn;
    s.outdeg_p75 += m.outdeg_p75 / nn;
    s.indeg_p25 += m.indeg_p25 / nn;
    s.indeg_p50 += m.indeg_p50 / nn;
    s.indeg_p75 += m.indeg_p75 / nn;
    rep.draw_density.push_back(m.density);
  }
  double ss = 0.0;
  for (const Moments& m : draws) ss += (m.density - s.density) * (m.density - s.density);
  rep.density_sd = std::sqrt(ss / (nn - 1.0));
  rep.nonconverged = static_cast<std::size_t>(std::count(nonconv.begin(), nonconv.end(), 1));
  return rep;
}

}  // namespace transnet::calib
