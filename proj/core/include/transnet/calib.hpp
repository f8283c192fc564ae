#pragma once

// Hybrid calibration of the generalized Poisson link model: maximum likelihood
// for (alpha, eta, beta) at fixed gamma, a moment condition matching the panel
// estimate theta for gamma, iterated with damping; plus simulated fit moments.

#include <cstdint>
#include <vector>

#include "transnet/genmodels.hpp"
#include "transnet/grid.hpp"
#include "transnet/panel.hpp"

namespace transnet::calib {

struct CalibrationProblem {
  Adjacency y;                       // observed cross-section
  genmodels::LinkCovariates cov;     // model-ready node covariates
  Matrix support;                    // S~ of the same cross-section
  std::vector<double> y_perp;        // cross-fitted outcome residual, row-major dyads
  std::vector<double> x_iv_perp;     // projected residualized regressor, row-major dyads
  double theta_hat = 0.0;

  std::size_t n_sellers() const noexcept { return y.rows(); }
  std::size_t n_buyers() const noexcept { return y.cols(); }
  /// Throws SizeError / DomainError on inconsistent shapes or non-finite values.
  void validate(bool need_artifacts = true) const;
};

/// Problem for outcome year position p of an estimation sample: the year's
/// links, Poisson covariates from that year's sizes, contemporaneous S~ and
/// the artifact rows of that year.
CalibrationProblem make_problem(const PanelDataset& panel, const panel::EstimationSample& sample,
                                const panel::EstimateReport& report, std::size_t year_pos);

inline constexpr double kProbFloor = 1e-12;

/// Bernoulli log-likelihood with G clamped to [1e-12, 1 - 1e-12].
double loglik(const genmodels::PoissonParams& p, const CalibrationProblem& prob, std::size_t workers = 1);

/// Log-likelihood and its gradient in (log alpha, log eta, log beta).
double loglik_gradient(const genmodels::PoissonParams& p, const CalibrationProblem& prob, double grad[3],
                       std::size_t workers = 1);

struct MleOptions {
  double grad_tol = 1e-6;
  std::size_t max_iter = 500;
  std::size_t workers = 1;
};

struct MleResult {
  double alpha = 0.0, eta = 0.0, beta = 0.0;
  double loglik = 0.0;
  double initial_loglik = 0.0;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool at_boundary = false;  // alpha driven towards 0 (no links)
};

/// Newton ascent with backtracking in log-parameter space, gamma held fixed.
/// The start is init's (alpha, eta, beta). Never decreases the likelihood.
MleResult mle_given_gamma(const CalibrationProblem& prob, double gamma, const genmodels::PoissonParams& init = {0.5, 0.5, 0.5, 0.0},
                          const MleOptions& opts = {});

/// Cov(x_iv_perp, y_perp - y + G(W)) / Var(x_iv_perp), over all dyads.
double theta_implied(const genmodels::PoissonParams& p, const CalibrationProblem& prob, std::size_t workers = 1);

struct CalibrationOptions {
  double gamma_tol = 1e-3;     // relative change of gamma between outer iterations
  double damping = 0.5;        // weight on the new gamma
  double theta_tol = 1e-9;     // bisection accuracy on theta
  double gamma_max = 1e4;
  std::size_t max_outer = 100;
  genmodels::PoissonParams init{0.5, 0.5, 0.5, 10.0};
  MleOptions mle;
};

struct CalibrationResult {
  genmodels::PoissonParams params;
  double loglik = 0.0;
  double theta_gap = 0.0;  // |theta_hat - Theta(params)|
  double grad_norm = 0.0;      // likelihood gradient norm at params
  double mle_grad_norm = 0.0;  // gradient norm of the last inner optimum (at its gamma)
  bool mle_converged = false;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> gamma_path;
};

/// Solves Theta(alpha, eta, beta, g) = theta_hat for g by bracketing from 0 and
/// bisection. Throws CalibrationError when no bracket exists in [0, gamma_max].
double solve_gamma(const CalibrationProblem& prob, double alpha, double eta, double beta, const CalibrationOptions& opts);

CalibrationResult hybrid_calibrate(const CalibrationProblem& prob, const CalibrationOptions& opts = {});

// ---------------------------------------------------------------------------
// Fit moments

struct Moments {
  double density = 0.0;
  double outdeg_p25 = 0.0, outdeg_p50 = 0.0, outdeg_p75 = 0.0;
  double indeg_p25 = 0.0, indeg_p50 = 0.0, indeg_p75 = 0.0;
};

Moments network_moments(const Adjacency& y);

struct FitReport {
  Moments observed;
  Moments simulated;        // averages across draws
  double density_sd = 0.0;  // across draws
  std::size_t draws = 0;
  std::size_t nonconverged = 0;
  std::vector<double> draw_density;
};

/// Simulates n fixed-point networks (S~ updated per draw) at params and reports
/// average moments beside the observed ones. Requires n >= 50.
FitReport fit_report(const genmodels::LinkModel& model, const genmodels::LinkCovariates& cov, const Matrix& proximity,
                     const Adjacency& observed, std::size_t n, std::uint64_t seed, std::size_t workers = 1);

}  // namespace transnet::calib
