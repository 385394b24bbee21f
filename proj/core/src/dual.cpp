#include "wdro/dual.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

#include "wdro/errors.hpp"

namespace wdro {

void DualParams::validate() const {
  require(std::isfinite(lambda) && lambda >= 0.0, "lambda must be finite and >= 0");
  require(std::isfinite(eps) && eps >= 0.0, "eps must be finite and >= 0");
  require(std::isfinite(sigma) && sigma > 0.0, "sigma must be > 0");
}

ReferenceBatch draw_reference_batch(const SampleSpace& space, ConstVecRef xi, double sigma,
                                    Index count, RngStream& rng, double acceptance_floor) {
  ReferenceBatch batch;
  batch.points = sample_reference(space, xi, sigma, count, rng, acceptance_floor);
  batch.costs = 0.5 * (batch.points.colwise() - xi).colwise().squaredNorm().transpose();
  return batch;
}

GibbsBatch GibbsBatch::build(ConstVecRef losses, ConstVecRef costs, double lambda, double eps) {
  require(eps > 0.0, "GibbsBatch: eps must be positive");
  require(losses.size() == costs.size() && losses.size() > 0, "GibbsBatch: size mismatch");
  GibbsBatch g;
  g.log_weights = (losses - lambda * costs) / eps;
  const double m = g.log_weights.maxCoeff();
  const double sum = (g.log_weights.array() - m).exp().sum();
  const double lse = m + std::log(sum);
  g.log_mean_exp = lse - std::log(static_cast<double>(losses.size()));
  g.log_weights.array() -= lse;
  const double sum_sq = (2.0 * g.log_weights.array()).exp().sum();
  g.ess = 1.0 / sum_sq;
  return g;
}

PhiEstimate phi_from_values(ConstVecRef losses, ConstVecRef costs, double lambda, double eps,
                            double ess_floor) {
  const Index s_count = losses.size();
  require(s_count >= 2, "phi: at least two Monte Carlo samples are required");
  require(costs.size() == s_count, "phi: losses/costs size mismatch");
  Vec a = (losses - lambda * costs) / eps;
  const double m = a.maxCoeff();
  Vec w = (a.array() - m).exp();
  const double total = w.sum();
  const double s = static_cast<double>(s_count);

  PhiEstimate out;
  out.value = eps * (m + std::log(total / s));
  out.ess = total * total / w.squaredNorm();
  out.low_ess = out.ess < ess_floor;

  // Jackknife over leave-one-out log-mean-exp values.
  Vec loo(s_count);
  for (Index k = 0; k < s_count; ++k) {
    double rest = total - w(k);
    if (w(k) > 0.5 * total) {
      rest = 0.0;
      for (Index j = 0; j < s_count; ++j) {
        if (j != k) rest += w(j);
      }
    }
    rest = std::max(rest, std::numeric_limits<double>::min());
    loo(k) = eps * (m + std::log(rest / (s - 1.0)));
  }
  const double mean_loo = loo.mean();
  out.stderr = std::sqrt((s - 1.0) / s * (loo.array() - mean_loo).square().sum());
  return out;
}

PhiEstimate phi_dlambda_from_values(ConstVecRef losses, ConstVecRef costs, double lambda,
                                    double eps, double ess_floor) {
  const GibbsBatch g = GibbsBatch::build(losses, costs, lambda, eps);
  const Vec w = g.weights();
  const double mean_cost = w.dot(costs);
  PhiEstimate out;
  out.value = -mean_cost;
  out.stderr = std::sqrt((w.array().square() * (costs.array() - mean_cost).square()).sum());
  out.ess = g.ess;
  out.low_ess = g.ess < ess_floor;
  return out;
}

std::vector<Vec> inner_starts(const LossModel& model, const SampleSpace& space, ConstVecRef xi,
                              int count, const std::optional<ArgmaxSet>& argmax,
                              const Mat& random_points) {
  std::vector<Vec> starts;
  const auto limit = static_cast<std::size_t>(std::max(count, 1));
  starts.emplace_back(xi);
  if (argmax && !argmax->is_whole_space()) {
    for (Index k = 0; k < argmax->point_matrix().cols() && starts.size() < limit; ++k) {
      starts.emplace_back(argmax->point_matrix().col(k));
    }
  }
  const Vec g = model.grad_xi(xi);
  const double gnorm = g.norm();
  if (gnorm > 0.0) {
    for (double t : {0.25, 0.5, 1.0}) {
      if (starts.size() >= limit) break;
      starts.push_back(space.project(xi + (t * space.diameter() / gnorm) * g));
    }
  }
  for (Index k = 0; k < random_points.cols() && starts.size() < limit; ++k) {
    starts.emplace_back(random_points.col(k));
  }
  return starts;
}

InnerSup solve_inner(const LossModel& model, const SampleSpace& space, ConstVecRef xi,
                     double lambda, const McBudget& budget, const Mat& random_points,
                     const std::optional<ArgmaxSet>& argmax,
                     const std::optional<Smoothness>& smoothness, const Vec* warm) {
  const AscentOptions options = budget.ascent();
  std::optional<double> lipschitz;
  bool concave = false;
  if (smoothness) {
    lipschitz = smoothness->gradient_lipschitz + lambda;
    concave = lambda > smoothness->gradient_lipschitz * (1.0 + 1e-12);
  }

  std::vector<AscentResult> results;
  if (concave) {
    const Vec start = warm != nullptr ? *warm : Vec(xi);
    results.push_back(projected_ascent(model, space, xi, lambda, start, options, lipschitz));
  } else {
    std::vector<Vec> starts =
        inner_starts(model, space, xi, budget.multistarts, argmax, random_points);
    if (warm != nullptr) starts.push_back(*warm);
    for (const Vec& s : starts) {
      results.push_back(projected_ascent(model, space, xi, lambda, s, options, lipschitz));
    }
  }

  double top = -std::numeric_limits<double>::infinity();
  for (const AscentResult& r : results) top = std::max(top, r.objective);
  const double tie = 1e-9 * std::max(1.0, std::abs(top));
  const AscentResult* chosen = nullptr;
  for (const AscentResult& r : results) {
    if (r.objective < top - tie) continue;
    if (chosen == nullptr || r.cost < chosen->cost) chosen = &r;
  }
  InnerSup best;
  best.point = chosen->point;
  best.value = top;
  best.loss = chosen->loss;
  best.cost = chosen->cost;
  best.converged = chosen->converged;
  best.ascents = static_cast<int>(results.size());
  return best;
}

namespace {

Mat random_starts(const SampleSpace& space, int count, RngStream& rng) {
  Mat out(space.dims(), std::max(count, 0));
  for (Index k = 0; k < out.cols(); ++k) out.col(k) = space.sample_uniform(rng);
  return out;
}

}  // namespace

PhiEstimate phi(const LossModel& model, const SampleSpace& space, ConstVecRef xi,
                const DualParams& params, const McBudget& budget, RngStream& rng) {
  params.validate();
  require(xi.size() == space.dims(), "phi: dimension mismatch");
  PhiEstimate out;
  if (params.eps == 0.0) {
    require(budget.multistarts >= 1, "phi: at least one multistart is required");
    const Mat rnd = random_starts(space, budget.multistarts, rng);
    const InnerSup sup = solve_inner(model, space, xi, params.lambda, budget, rnd,
                                     model.closed_form_argmax(space), model.smoothness(space));
    out.value = sup.value;
    out.converged = sup.converged;
    return out;
  }
  require(budget.samples_per_xi >= 2, "phi: at least two Monte Carlo samples are required");
  const ReferenceBatch batch = draw_reference_batch(space, xi, params.sigma, budget.samples_per_xi,
                                                    rng, budget.acceptance_floor);
  Vec losses(batch.points.cols());
  model.values(batch.points, losses);
  if (!losses.allFinite()) fail(ErrorCode::numeric_failure, "phi: non-finite loss");
  return phi_from_values(losses, batch.costs, params.lambda, params.eps, budget.ess_floor);
}

PhiEstimate phi_dlambda(const LossModel& model, const SampleSpace& space, ConstVecRef xi,
                        const DualParams& params, const McBudget& budget, RngStream& rng) {
  params.validate();
  require(xi.size() == space.dims(), "phi_dlambda: dimension mismatch");
  PhiEstimate out;
  if (params.eps == 0.0) {
    const Mat rnd = random_starts(space, budget.multistarts, rng);
    const InnerSup sup = solve_inner(model, space, xi, params.lambda, budget, rnd,
                                     model.closed_form_argmax(space), model.smoothness(space));
    out.value = -sup.cost;
    out.converged = sup.converged;
    return out;
  }
  const ReferenceBatch batch = draw_reference_batch(space, xi, params.sigma, budget.samples_per_xi,
                                                    rng, budget.acceptance_floor);
  Vec losses(batch.points.cols());
  model.values(batch.points, losses);
  return phi_dlambda_from_values(losses, batch.costs, params.lambda, params.eps, budget.ess_floor);
}

double log_reference_normalizer(const SampleSpace& space, ConstVecRef xi, double sigma,
                                Index mc_samples) {
  require(sigma > 0.0, "log_reference_normalizer: sigma must be positive");
  const double d = static_cast<double>(space.dims());
  const double untruncated = 0.5 * d * std::log(2.0 * std::numbers::pi * sigma * sigma);
  const double gamma = space.margin();
  if (gamma > 0.0 && space.boundary_distance(xi) >= gamma && sigma <= gamma / 6.0) {
    return untruncated;
  }
  std::uint64_t key = std::bit_cast<std::uint64_t>(sigma);
  for (Index j = 0; j < xi.size(); ++j) key = mix64(key ^ std::bit_cast<std::uint64_t>(xi(j)));
  RngStream rng = RngStream::derive(key, StreamPurpose::laplace_normalizer);
  Vec z(xi.size());
  Index inside = 0;
  for (Index k = 0; k < mc_samples; ++k) {
    for (Index j = 0; j < xi.size(); ++j) z(j) = xi(j) + sigma * rng.normal();
    if (space.contains(z, 0.0)) ++inside;
  }
  const double mass = std::max(static_cast<double>(inside), 0.5) / static_cast<double>(mc_samples);
  return untruncated + std::log(mass);
}

double phi_laplace(const LossModel& model, const SampleSpace& space, ConstVecRef xi,
                   const DualParams& params) {
  params.validate();
  const double precision = params.lambda + params.eps / (params.sigma * params.sigma);
  require(precision > 0.0, "phi_laplace: lambda + eps / sigma^2 must be positive");
  Vec g(xi.size());
  const double f = model.value_grad_xi(xi, g);
  double value = f + g.squaredNorm() / (2.0 * precision);
  if (params.eps > 0.0) {
    const double d = static_cast<double>(space.dims());
    const double log_z = log_reference_normalizer(space, xi, params.sigma);
    value -= 0.5 * params.eps * d *
             std::log(params.lambda / params.eps + 1.0 / (params.sigma * params.sigma));
    value += params.eps * (0.5 * d * std::log(2.0 * std::numbers::pi) - log_z);
  }
  return value;
}

}  // namespace wdro
