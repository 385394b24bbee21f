#include "wdro/radius.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "wdro/errors.hpp"
#include "wdro/parallel.hpp"
#include "wdro/stats.hpp"

namespace wdro {

std::vector<Vec> annulus_theta_grid(Index dims, const std::vector<double>& radii, int directions,
                                    std::uint64_t seed) {
  require(dims >= 1, "theta grid: dims must be >= 1");
  require(!radii.empty(), "theta grid: need at least one radius");
  require(directions >= 1, "theta grid: need at least one direction");
  std::vector<Vec> dirs;
  if (dims == 1) {
    dirs.push_back(Vec::Constant(1, -1.0));
    dirs.push_back(Vec::Constant(1, 1.0));
  } else if (dims == 2) {
    for (int k = 0; k < directions; ++k) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / directions;
      Vec u(2);
      u << std::cos(angle), std::sin(angle);
      dirs.push_back(u);
    }
  } else {
    for (Index j = 0; j < dims && static_cast<int>(dirs.size()) < directions; ++j) {
      for (double sign : {1.0, -1.0}) {
        if (static_cast<int>(dirs.size()) >= directions) break;
        Vec u = Vec::Zero(dims);
        u(j) = sign;
        dirs.push_back(u);
      }
    }
    RngStream rng = RngStream::derive(seed, StreamPurpose::generic, {0x7e7a});
    while (static_cast<int>(dirs.size()) < directions) {
      Vec u(dims);
      for (Index j = 0; j < dims; ++j) u(j) = rng.normal();
      const double norm = u.norm();
      if (norm > 0.0) dirs.push_back(u / norm);
    }
  }
  std::vector<Vec> grid;
  for (double r : radii) {
    require(r > 0.0 && std::isfinite(r), "theta grid: radii must be positive");
    for (const Vec& u : dirs) grid.push_back(r * u);
  }
  return grid;
}

namespace {

ArgmaxSet argmax_for_radius(const LossModel& model, const SampleSpace& space) {
  if (auto closed = model.closed_form_argmax(space)) return *closed;
  if (space.dims() > 2) {
    fail(ErrorCode::unimplemented,
         "critical radius: no closed-form argmax for this family and d > 2");
  }
  return argmax_set(model, space);
}

}  // namespace

CriticalRadiusReport critical_radius_sq(const std::shared_ptr<const LossFamily>& family,
                                        const std::vector<Vec>& theta_grid,
                                        const SampleSpace& space, const Mat& sample, double eps,
                                        double sigma, const McBudget& budget, std::uint64_t seed,
                                        int threads) {
  require(family != nullptr, "critical radius: null family");
  require(!theta_grid.empty(), "critical radius: theta grid must be nonempty");
  require(sample.cols() >= 100, "critical radius: need N >= 100 draws from P");
  require(sample.rows() == space.dims(), "critical radius: dimension mismatch");
  require(eps >= 0.0 && std::isfinite(eps), "critical radius: eps must be >= 0");
  const Index n = sample.cols();

  // eps > 0: reference draws shared across theta (common random numbers).
  Mat ref_points;
  Vec ref_costs;
  Index per_xi = 0;
  if (eps > 0.0) {
    require(sigma > 0.0, "critical radius: sigma must be positive");
    per_xi = budget.samples_per_xi;
    require(per_xi >= 2, "critical radius: need >= 2 reference draws per point");
    ref_points.resize(space.dims(), n * per_xi);
    ref_costs.resize(n * per_xi);
    for (Index i = 0; i < n; ++i) {
      RngStream rng = RngStream::derive(seed, StreamPurpose::reference_cache,
                                        {static_cast<std::uint64_t>(i), 0xc417});
      const ReferenceBatch batch = draw_reference_batch(space, sample.col(i), sigma, per_xi, rng,
                                                        budget.acceptance_floor);
      ref_points.middleCols(i * per_xi, per_xi) = batch.points;
      ref_costs.segment(i * per_xi, per_xi) = batch.costs;
    }
  }

  std::vector<MeanStderr> per_theta(theta_grid.size());
  parallel_for(theta_grid.size(), threads, [&](std::size_t k) {
    const LossModel model(family, theta_grid[k]);
    Vec per_point(n);
    if (eps == 0.0) {
      const ArgmaxSet argmax = argmax_for_radius(model, space);
      for (Index i = 0; i < n; ++i) per_point(i) = argmax.half_sq_distance(sample.col(i));
    } else {
      Vec losses(n * per_xi);
      model.values(ref_points, losses);
      for (Index i = 0; i < n; ++i) {
        const GibbsBatch g = GibbsBatch::build(losses.segment(i * per_xi, per_xi),
                                               ref_costs.segment(i * per_xi, per_xi), 0.0, eps);
        per_point(i) = g.weights().dot(ref_costs.segment(i * per_xi, per_xi));
      }
    }
    per_theta[k] = mean_stderr(per_point);
  });

  CriticalRadiusReport report;
  report.regularized = eps > 0.0;
  report.eps = eps;
  report.sigma = sigma;
  std::size_t best = 0;
  for (std::size_t k = 1; k < per_theta.size(); ++k) {
    if (per_theta[k].mean < per_theta[best].mean) best = k;
  }
  report.rho_c_sq = std::max(per_theta[best].mean, 0.0);
  report.stderr = per_theta[best].stderr;
  report.argmin_theta = theta_grid[best];
  return report;
}

DegeneracyReport degenerate_check(const LossModel& model, const SampleSpace& space,
                                  const Dataset& data, double rho, double tol,
                                  const McBudget& budget, std::uint64_t seed) {
  require(tol >= 0.0, "degenerate_check: tol must be >= 0");
  const ArgmaxSet argmax = argmax_for_radius(model, space);
  DegeneracyReport report;
  report.max_f = argmax.max_value();
  double transport = 0.0;
  for (Index i = 0; i < data.size(); ++i) transport += argmax.half_sq_distance(data.point(i));
  report.transport_to_argmax = transport / static_cast<double>(data.size());
  RiskOptions options;
  options.lambda_tol = tol;
  const RobustRiskResult r = robust_risk(model, space, data, rho, 0.0, 1.0, budget, seed, options);
  report.lambda_star = r.lambda_star;
  report.risk = r.value;
  report.is_degenerate = argmax.is_whole_space() || r.lambda_star <= tol;
  return report;
}

}  // namespace wdro
