#pragma once

#include "wdro/dual.hpp"
#include "wdro/geometry.hpp"
#include "wdro/models.hpp"
#include "wdro/types.hpp"

namespace wdro {

/// Finite support {zeta_j} (one point per column) with optional positive
/// reference masses used when discretizing pi_sigma.
struct Grid {
  Mat points;
  Vec weights;  // empty = uniform

  Index size() const { return points.cols(); }
  void validate() const;

  /// m equally spaced points spanning the bounding box of a 1-D space.
  static Grid uniform_1d(const SampleSpace& space, Index m);
};

/// Exact grid-restricted robust risk
///   inf_{lambda >= 0} lambda rho^2 + (1/n) sum_i max_j { f(zeta_j) - lambda c(xi_i, zeta_j) },
/// minimized over the breakpoints of the convex piecewise-linear objective.
/// Throws invalid_argument when no grid distribution lies within radius rho.
double grid_dual_exact(const LossModel& model, const Dataset& data, double rho, const Grid& grid);

struct QuadratureResult {
  double phi = 0.0;        // eps log int exp((f - lambda c) / eps) d pi_sigma(. | xi)
  double mean_cost = 0.0;  // E_Gibbs[c(xi, zeta)] = -d phi / d lambda
};

/// Deterministic midpoint-rule evaluation of the eps > 0 dual generator over
/// Xi (d <= 2), with `resolution` cells per axis and log-sum-exp accumulation.
/// The integration window is xi +- 12 sigma for the normalizer and, for the
/// tilted integrand, +- 12 standard deviations of the Laplace-approximate Gibbs
/// law around both xi and its approximate mode. Throws unimplemented for d > 2.
QuadratureResult phi_quadrature(const LossModel& model, const SampleSpace& space, ConstVecRef xi,
                                const DualParams& params, Index resolution = 2000);

/// Discrete distribution: masses on the points of a shared grid.
struct SinkhornReport {
  double value = 0.0;
  double transport_cost = 0.0;
  double kl = 0.0;
  double marginal_error = 0.0;  // L1 residual of the first marginal
  int iterations = 0;
};

/// inf over couplings pi with marginals (p, q) of E_pi[c] + delta KL(pi | p x pi_sigma),
/// where pi_sigma(j | i) is proportional to w_j exp(-c_ij / sigma^2) on the grid.
/// Log-domain Sinkhorn on K_ij = pi_sigma(j | i) exp(-c_ij / delta) to marginal
/// error < 1e-10; throws convergence_failure after 1e5 iterations.
SinkhornReport reg_wass_sq(ConstVecRef p, ConstVecRef q, const Grid& grid, double delta,
                           double sigma);

}  // namespace wdro
