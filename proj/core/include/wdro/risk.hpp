#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include "wdro/dual_objective.hpp"

namespace wdro {

/// Result of inf_{lambda >= 0} lambda rho^2 + (1/n) sum_i phi(f, xi_i, lambda, eps, sigma).
struct RobustRiskResult {
  double value = 0.0;
  double lambda_star = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  Index evals = 0;          // number of batch evaluations of lambda -> mean phi
  double stderr = 0.0;      // Monte Carlo standard error of value (0 when eps = 0)
  bool degenerate = false;  // lambda_star <= lambda_tol
  bool low_ess = false;
  bool converged = true;    // inner ascents converged at lambda_star (eps = 0)
};

struct RiskOptions {
  double lambda_max = 1e9;
  double rel_tol = 1e-6;       // relative width of the final lambda bracket
  double value_tol = 1e-10;    // relative gap between best value and the tangent lower bound
  int max_evals = 200;
  double expansion = 4.0;      // geometric bracket growth factor
  std::optional<double> lambda_hint;  // replaces lambda_init as the first trial point
  std::optional<double> lambda_tol;   // degeneracy threshold; default from the loss/cost scales
};

/// Minimizer of a*l + b/(l + r) - c*log(l + r) over l >= 0:
///   [(c + sqrt(c^2 + 4ab)) / (2a) - r]_+.
double lambda_init_closed_form(double a, double b, double c, double r);

/// The closed form above with a = rho^2, b = (1/2) mean |grad_xi f(xi_i)|^2,
/// c = eps d / 2, r = eps / sigma^2 (r = 0 when eps = 0). Requires rho > 0.
double lambda_init(const LossModel& model, const Dataset& data, double rho, double eps,
                   double sigma);

/// Default degeneracy threshold 1e-6 * max(1, |mean f|) / (diam(Xi)^2 / 2).
double default_lambda_tol(const DualObjective& objective);

/// Minimizes the dual objective over lambda for an already-built objective.
/// The lambda search brackets the root of the (monotone) derivative
/// rho^2 + mean d phi / d lambda by geometric expansion from the initial guess,
/// then narrows it with safeguarded Newton (eps > 0) or TOMS 748 (eps = 0) steps,
/// stopping on the bracket width or on the tangent-line gap of the convex objective.
/// Throws unbounded_dual when the bracket passes lambda_max.
RobustRiskResult minimize_dual(DualObjective& objective, double rho,
                               const RiskOptions& options = {});

/// Builds a DualObjective with `seed` and minimizes it.
RobustRiskResult robust_risk(const LossModel& model, const SampleSpace& space,
                             const Dataset& data, double rho, double eps, double sigma,
                             const McBudget& budget, std::uint64_t seed,
                             const RiskOptions& options = {});

/// Outer optimization budget (config section `opt`).
struct OptBudget {
  int max_iters = 200;
  double tol = 1e-6;  // projected-gradient norm
};

struct TrainResult {
  Vec theta;
  RobustRiskResult risk;
  double grad_norm = 0.0;  // projected-gradient norm at theta
  int iterations = 0;
  bool converged = false;
};

/// min over theta in Theta of the robust risk by projected gradient descent
/// with Barzilai-Borwein steps and Armijo backtracking. lambda* is re-solved
/// at every trial point; gradients use the envelope rule at fixed lambda*.
/// Returns the best iterate, with converged = false when max_iters is reached.
TrainResult train_robust(const std::shared_ptr<const LossFamily>& family,
                         const SampleSpace& space, const Dataset& data, double rho, double eps,
                         double sigma, const Vec& theta0, const McBudget& mc,
                         const OptBudget& opt, std::uint64_t seed,
                         const RiskOptions& risk_options = {});

struct RiskEstimate {
  double value = 0.0;
  double stderr = 0.0;
};

/// Monte Carlo estimate of E_P f on a sample drawn from P (one point per column).
/// With `smoothed`, each point xi is replaced by one draw zeta ~ pi_sigma(. | xi).
RiskEstimate true_risk(const LossModel& model, const SampleSpace& space, const Mat& sample,
                       bool smoothed, double sigma, RngStream& rng);

/// Same, drawing N points from `sampler` first.
RiskEstimate true_risk(const LossModel& model, const SampleSpace& space,
                       const std::function<Vec(RngStream&)>& sampler, Index n_samples,
                       bool smoothed, double sigma, RngStream& rng);

}  // namespace wdro
