#pragma once

#include <optional>
#include <vector>

#include "wdro/ascent.hpp"
#include "wdro/geometry.hpp"
#include "wdro/models.hpp"
#include "wdro/rng.hpp"

namespace wdro {

/// Parameters (lambda, eps, sigma) of the dual generator.
struct DualParams {
  double lambda = 0.0;  // dual multiplier, >= 0
  double eps = 0.0;     // entropic regularization, >= 0
  double sigma = 1.0;   // spread of the Gaussian reference, > 0

  void validate() const;
};

/// Monte Carlo and inner-ascent budget (config section `mc`).
struct McBudget {
  Index samples_per_xi = 2048;
  int multistarts = 8;
  double ess_floor = 10.0;
  double ascent_tol = 1e-8;
  int ascent_max_iters = 500;
  double acceptance_floor = 1e-3;

  AscentOptions ascent() const { return {ascent_tol, ascent_max_iters}; }
};

struct PhiEstimate {
  double value = 0.0;
  double stderr = 0.0;
  double ess = 0.0;        // effective sample size of the Gibbs weights (eps > 0)
  bool low_ess = false;    // ess below McBudget::ess_floor
  bool converged = true;   // inner ascent converged (eps = 0)
};

/// Frozen draws from pi_sigma(. | xi) and their transport costs, reused across
/// lambda values (common random numbers).
struct ReferenceBatch {
  Mat points;
  Vec costs;
};

ReferenceBatch draw_reference_batch(const SampleSpace& space, ConstVecRef xi, double sigma,
                                    Index count, RngStream& rng, double acceptance_floor = 1e-3);

/// Self-normalized Gibbs tilt exp((f - lambda c) / eps) of a reference batch.
struct GibbsBatch {
  Vec log_weights;  // normalized: logsumexp(log_weights) = 0
  double log_mean_exp = 0.0;  // log (1/S) sum exp((f - lambda c) / eps)
  double ess = 0.0;

  static GibbsBatch build(ConstVecRef losses, ConstVecRef costs, double lambda, double eps);
  Vec weights() const { return log_weights.array().exp(); }
};

/// eps * log mean exp((f - lambda c) / eps) with a jackknife standard error.
PhiEstimate phi_from_values(ConstVecRef losses, ConstVecRef costs, double lambda, double eps,
                            double ess_floor = 0.0);
/// -E_Gibbs[c] with a delta-method standard error.
PhiEstimate phi_dlambda_from_values(ConstVecRef losses, ConstVecRef costs, double lambda,
                                    double eps, double ess_floor = 0.0);

/// Maximizer of f(z) - lambda c(xi, z) over Xi.
struct InnerSup {
  Vec point;
  double value = 0.0;
  double loss = 0.0;
  double cost = 0.0;
  bool converged = true;
  int ascents = 0;
};

/// Start points for the eps = 0 inner problem: xi, the closed-form maximizers
/// of f (if any), projections of xi + t diam(Xi) grad f / |grad f| for
/// t in {1/4, 1/2, 1}, then `random_points` columns, truncated to `count`.
std::vector<Vec> inner_starts(const LossModel& model, const SampleSpace& space, ConstVecRef xi,
                              int count, const std::optional<ArgmaxSet>& argmax,
                              const Mat& random_points);

/// Solves the eps = 0 inner supremum by multistart projected ascent. When the
/// objective is strongly concave (lambda > M) only the first start (or `warm`)
/// is used. Among maximizers within round-off of the best value, the one with
/// the smallest transport cost is returned.
InnerSup solve_inner(const LossModel& model, const SampleSpace& space, ConstVecRef xi,
                     double lambda, const McBudget& budget, const Mat& random_points,
                     const std::optional<ArgmaxSet>& argmax,
                     const std::optional<Smoothness>& smoothness, const Vec* warm = nullptr);

/// Dual generator phi(f, xi, lambda, eps, sigma).
/// eps = 0: supremum over Xi of f(z) - lambda |xi - z|^2 / 2 (stderr = 0).
/// eps > 0: eps log E_{z ~ pi_sigma(.|xi)} exp((f(z) - lambda |xi - z|^2 / 2) / eps),
///          estimated from budget.samples_per_xi fresh draws.
PhiEstimate phi(const LossModel& model, const SampleSpace& space, ConstVecRef xi,
                const DualParams& params, const McBudget& budget, RngStream& rng);

/// d phi / d lambda: -E_Gibbs[c(xi, z)] for eps > 0, and minus the smallest
/// cost among maximizers for eps = 0 (right derivative).
PhiEstimate phi_dlambda(const LossModel& model, const SampleSpace& space, ConstVecRef xi,
                        const DualParams& params, const McBudget& budget, RngStream& rng);

/// log of the normalizer Z = int_Xi exp(-|xi - z|^2 / (2 sigma^2)) dz. Uses the
/// untruncated value (d/2) log(2 pi sigma^2) when B(xi, gamma) is inside Xi and
/// sigma <= gamma / 6, otherwise a Monte Carlo estimate of the Gaussian mass of Xi.
double log_reference_normalizer(const SampleSpace& space, ConstVecRef xi, double sigma,
                                Index mc_samples = 20000);

/// Laplace (second-order) approximation of phi:
///   f(xi) + |grad f(xi)|^2 / (2 (lambda + eps / sigma^2))
///   - (eps d / 2) log(lambda / eps + 1 / sigma^2) + eps log((2 pi)^(d/2) / Z).
/// Requires lambda + eps / sigma^2 > 0.
double phi_laplace(const LossModel& model, const SampleSpace& space, ConstVecRef xi,
                   const DualParams& params);

}  // namespace wdro
