#include "wdro/dual_objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wdro/errors.hpp"
#include "wdro/stats.hpp"

namespace wdro {

DualObjective::DualObjective(const LossModel& model, const SampleSpace& space,
                             const Dataset& data, double eps, double sigma,
                             const McBudget& budget, std::uint64_t seed)
    : model_(model), space_(space), data_(data), eps_(eps), sigma_(sigma), budget_(budget) {
  require(data.size() > 0, "dual objective: dataset must be nonempty");
  require(data.dims() == space.dims(), "dual objective: data dimension mismatch");
  require(eps >= 0.0 && std::isfinite(eps), "dual objective: eps must be >= 0");
  const Index n = data.size();
  for (Index i = 0; i < n; ++i) {
    require(space.contains(data.point(i), 1e-9), "dual objective: data point outside Xi");
  }

  if (eps_ > 0.0) {
    require(sigma > 0.0 && std::isfinite(sigma), "dual objective: sigma must be > 0");
    require(budget.samples_per_xi >= 2, "dual objective: samples_per_xi must be >= 2");
    per_xi_ = budget.samples_per_xi;
    ref_points_.resize(space.dims(), n * per_xi_);
    ref_costs_.resize(n * per_xi_);
    for (Index i = 0; i < n; ++i) {
      RngStream rng = RngStream::derive(seed, StreamPurpose::reference_cache,
                                        {static_cast<std::uint64_t>(i)});
      ReferenceBatch batch = draw_reference_batch(space, data.point(i), sigma, per_xi_, rng,
                                                  budget.acceptance_floor);
      ref_points_.middleCols(i * per_xi_, per_xi_) = batch.points;
      ref_costs_.segment(i * per_xi_, per_xi_) = batch.costs;
    }
    ref_losses_.resize(n * per_xi_);
  } else {
    require(budget.multistarts >= 1, "dual objective: multistarts must be >= 1");
    random_starts_.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      RngStream rng = RngStream::derive(seed, StreamPurpose::multistart,
                                        {static_cast<std::uint64_t>(i)});
      Mat starts(space.dims(), budget.multistarts);
      for (Index k = 0; k < starts.cols(); ++k) starts.col(k) = space.sample_uniform(rng);
      random_starts_.push_back(std::move(starts));
    }
    inner_points_ = data.points;
  }
  refresh_losses();
}

void DualObjective::set_model(const LossModel& model) {
  model_ = model;
  refresh_losses();
}

void DualObjective::refresh_losses() {
  last_lambda_.reset();
  if (eps_ > 0.0) {
    model_.values(ref_points_, ref_losses_);
    if (!ref_losses_.allFinite()) fail(ErrorCode::numeric_failure, "non-finite loss");
  } else {
    argmax_ = model_.closed_form_argmax(space_);
    smoothness_ = model_.smoothness(space_);
  }
}

DualEval DualObjective::evaluate(double lambda, bool with_stderr) {
  require(lambda >= 0.0 && !std::isnan(lambda), "dual objective: lambda must be >= 0");
  ++evaluations_;
  const Index n = data_.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  DualEval out;
  out.lambda = lambda;

  if (eps_ == 0.0) {
    if (std::isinf(lambda)) {
      out.mean_phi = empirical_mean_loss();
      inner_points_ = data_.points;
      last_lambda_ = lambda;
      return out;
    }
    Vec phis(n);
    double slope_sum = 0.0;
    for (Index i = 0; i < n; ++i) {
      const Vec warm = inner_points_.col(i);
      const InnerSup sup =
          solve_inner(model_, space_, data_.point(i), lambda, budget_,
                      random_starts_[static_cast<std::size_t>(i)], argmax_, smoothness_,
                      have_warm_ ? &warm : nullptr);
      phis(i) = sup.value;
      slope_sum -= sup.cost;
      out.converged = out.converged && sup.converged;
      inner_points_.col(i) = sup.point;
    }
    have_warm_ = true;
    out.mean_phi = shifted_mean(phis);
    out.slope = slope_sum * inv_n;
    last_lambda_ = lambda;
    return out;
  }

  require(std::isfinite(lambda), "dual objective: lambda must be finite when eps > 0");
  last_weights_.resize(n * per_xi_);
  double phi_sum = 0.0;
  double slope_sum = 0.0;
  double curv_sum = 0.0;
  double var_sum = 0.0;
  out.min_ess = std::numeric_limits<double>::infinity();
  const double log_s = std::log(static_cast<double>(per_xi_));
  for (Index i = 0; i < n; ++i) {
    const auto losses = ref_losses_.segment(i * per_xi_, per_xi_);
    const auto costs = ref_costs_.segment(i * per_xi_, per_xi_);
    auto w = last_weights_.segment(i * per_xi_, per_xi_);
    w = (losses - lambda * costs) / eps_;
    const double m = w.maxCoeff();
    w = (w.array() - m).exp();
    const double total = w.sum();
    const double lme = m + std::log(total) - log_s;
    w /= total;
    const double mean_cost = w.dot(costs);
    const double second = w.dot(costs.cwiseProduct(costs));
    const double ess = 1.0 / w.squaredNorm();
    phi_sum += eps_ * lme;
    slope_sum -= mean_cost;
    curv_sum += std::max(second - mean_cost * mean_cost, 0.0) / eps_;
    out.min_ess = std::min(out.min_ess, ess);
    if (with_stderr) {
      const PhiEstimate est = phi_from_values(losses, costs, lambda, eps_);
      var_sum += est.stderr * est.stderr;
    }
  }
  out.mean_phi = phi_sum * inv_n;
  out.slope = slope_sum * inv_n;
  out.curvature = curv_sum * inv_n;
  out.stderr = std::sqrt(var_sum) * inv_n;
  out.low_ess = out.min_ess < budget_.ess_floor;
  last_lambda_ = lambda;
  return out;
}

Vec DualObjective::envelope_grad_theta(double lambda) {
  if (!last_lambda_ || *last_lambda_ != lambda) evaluate(lambda);
  const Index n = data_.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (eps_ > 0.0) {
    return model_.family().weighted_grad_theta(model_.theta(), ref_points_,
                                               last_weights_ * inv_n);
  }
  return model_.family().weighted_grad_theta(model_.theta(), inner_points_,
                                             Vec::Constant(n, inv_n));
}

double DualObjective::empirical_mean_loss() const {
  Vec losses(data_.size());
  model_.values(data_.points, losses);
  return shifted_mean(losses);
}

double DualObjective::half_mean_sq_grad() const {
  double total = 0.0;
  Vec g(space_.dims());
  for (Index i = 0; i < data_.size(); ++i) {
    model_.value_grad_xi(data_.point(i), g);
    total += g.squaredNorm();
  }
  return 0.5 * total / static_cast<double>(data_.size());
}

}  // namespace wdro
