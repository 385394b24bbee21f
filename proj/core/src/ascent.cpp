#include "wdro/ascent.hpp"

#include <algorithm>
#include <cmath>

#include "wdro/errors.hpp"

namespace wdro {

namespace {

struct Probe {
  double objective;
  double loss;
};

Probe evaluate(const LossModel& model, ConstVecRef xi, double lambda, const Vec& z, Vec& grad) {
  const double loss = model.value_grad_xi(z, grad);
  if (!std::isfinite(loss)) fail(ErrorCode::numeric_failure, "non-finite loss during ascent");
  grad.noalias() -= lambda * (z - xi);
  return {loss - 0.5 * lambda * (z - xi).squaredNorm(), loss};
}

}  // namespace

AscentResult projected_ascent(const LossModel& model, const SampleSpace& space, ConstVecRef xi,
                              double lambda, ConstVecRef start, const AscentOptions& options,
                              std::optional<double> lipschitz) {
  const Index d = space.dims();
  Vec x = space.project(start);
  Vec g(d);
  Vec y(d);
  Vec gy(d);
  Vec trial(d);
  Vec step(d);
  Probe hx = evaluate(model, xi, lambda, x, g);

  double alpha = 1.0 / std::max(lipschitz.value_or(1.0 + lambda), 1e-12);
  AscentResult result;
  int it = 0;
  for (; it < options.max_iters; ++it) {
    trial.noalias() = x + g;
    space.project_inplace(trial);
    if ((trial - x).norm() <= options.tol) {
      result.converged = true;
      break;
    }

    Probe hy{};
    double step_sq = 0.0;
    for (int backtrack = 0;; ++backtrack) {
      y.noalias() = x + alpha * g;
      space.project_inplace(y);
      hy = evaluate(model, xi, lambda, y, gy);
      step.noalias() = y - x;
      step_sq = step.squaredNorm();
      const double model_gain = g.dot(step) - 0.5 * step_sq / alpha;
      if (hy.objective >= hx.objective + model_gain - 1e-15 * std::abs(hx.objective) ||
          backtrack >= 60) {
        break;
      }
      alpha *= 0.5;
    }
    if (step_sq == 0.0) {
      // No movement at a valid step: stationary up to round-off.
      result.converged = (trial - x).norm() <= std::sqrt(options.tol);
      break;
    }

    // Barzilai-Borwein step for the next iteration (ascent sign convention).
    const double curvature = -step.dot(gy - g);
    alpha = curvature > 0.0 ? step_sq / curvature : 2.0 * alpha;
    alpha = std::clamp(alpha, 1e-12, 1e12);

    x.swap(y);
    g.swap(gy);
    hx = hy;
  }

  result.iterations = it;
  result.objective = hx.objective;
  result.loss = hx.loss;
  result.cost = 0.5 * (x - xi).squaredNorm();
  result.point = std::move(x);
  return result;
}

}  // namespace wdro
