#pragma once

#include <optional>

#include "wdro/geometry.hpp"
#include "wdro/models.hpp"

namespace wdro {

struct AscentOptions {
  double tol = 1e-8;    // on |z - P(z + grad h(z))|
  int max_iters = 500;
};

struct AscentResult {
  Vec point;
  double objective = 0.0;  // f(z) - lambda * c(xi, z)
  double loss = 0.0;       // f(z)
  double cost = 0.0;       // c(xi, z)
  bool converged = false;
  int iterations = 0;
};

/// Maximizes z -> f(z) - lambda * c(xi, z) over Xi by projected gradient ascent
/// with Barzilai-Borwein steps and backtracking. `lipschitz`, when given, bounds
/// the gradient Lipschitz constant of the objective and seeds the step size.
/// Throws numeric_failure on a non-finite loss.
AscentResult projected_ascent(const LossModel& model, const SampleSpace& space, ConstVecRef xi,
                              double lambda, ConstVecRef start, const AscentOptions& options,
                              std::optional<double> lipschitz = std::nullopt);

}  // namespace wdro
