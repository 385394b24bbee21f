#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "wdro/dual.hpp"
#include "wdro/models.hpp"
#include "wdro/risk.hpp"

namespace wdro {

/// Estimate of rho_c^2 = inf_theta E_P[(1/2) d^2(xi, argmax f_theta)] (eps = 0), or its
/// regularized analogue inf_theta E_P E_{Gibbs(f_theta / eps)}[c(xi, zeta)] (eps > 0).
struct CriticalRadiusReport {
  double rho_c_sq = 0.0;
  Vec argmin_theta;
  double stderr = 0.0;
  bool regularized = false;
  double eps = 0.0;
  double sigma = 0.0;

  std::string regime() const { return regularized ? "regularized" : "standard"; }
};

/// Annulus parameter grid: `directions` unit vectors times each radius. In d = 1
/// the directions are {-1, +1}; in d = 2 they are equally spaced angles; in higher
/// dimension they are the signed coordinate axes followed by seeded uniform directions.
std::vector<Vec> annulus_theta_grid(Index dims, const std::vector<double>& radii, int directions,
                                    std::uint64_t seed = 0);

/// Minimum over `theta_grid` of the Monte Carlo transport-to-argmax (eps = 0) or
/// Gibbs cost expectation at lambda = 0 (eps > 0), over the columns of `sample`
/// (N >= 100 draws from P). For eps > 0 each sample point uses `budget.samples_per_xi`
/// reference draws shared across theta. Entries are evaluated on `threads` workers.
CriticalRadiusReport critical_radius_sq(const std::shared_ptr<const LossFamily>& family,
                                        const std::vector<Vec>& theta_grid,
                                        const SampleSpace& space, const Mat& sample, double eps,
                                        double sigma, const McBudget& budget, std::uint64_t seed,
                                        int threads = 1);

struct DegeneracyReport {
  double lambda_star = 0.0;
  double max_f = 0.0;
  double risk = 0.0;
  double transport_to_argmax = 0.0;  // mean_i (1/2) d^2(xi_i, argmax f)
  bool is_degenerate = false;
};

/// eps = 0 robust risk at rho together with max_Xi f; is_degenerate = (lambda* <= tol).
DegeneracyReport degenerate_check(const LossModel& model, const SampleSpace& space,
                                  const Dataset& data, double rho, double tol,
                                  const McBudget& budget = {}, std::uint64_t seed = 0);

}  // namespace wdro
