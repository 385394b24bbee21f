#include "wdro/risk.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "wdro/errors.hpp"
#include "wdro/stats.hpp"

namespace wdro {

double lambda_init_closed_form(double a, double b, double c, double r) {
  require(a > 0.0, "lambda_init: a = rho^2 must be positive");
  require(b >= 0.0 && c >= 0.0 && r >= 0.0, "lambda_init: b, c, r must be >= 0");
  const double root = (c + std::sqrt(c * c + 4.0 * a * b)) / (2.0 * a);
  return std::max(root - r, 0.0);
}

double lambda_init(const LossModel& model, const Dataset& data, double rho, double eps,
                   double sigma) {
  require(rho > 0.0 && std::isfinite(rho), "lambda_init: rho must be positive");
  require(eps >= 0.0, "lambda_init: eps must be >= 0");
  require(data.size() > 0, "lambda_init: dataset must be nonempty");
  double sum_sq = 0.0;
  Vec g(data.dims());
  for (Index i = 0; i < data.size(); ++i) {
    model.value_grad_xi(data.point(i), g);
    sum_sq += g.squaredNorm();
  }
  const double b = 0.5 * sum_sq / static_cast<double>(data.size());
  double c = 0.0;
  double r = 0.0;
  if (eps > 0.0) {
    require(sigma > 0.0, "lambda_init: sigma must be positive");
    c = 0.5 * eps * static_cast<double>(data.dims());
    r = eps / (sigma * sigma);
  }
  return lambda_init_closed_form(rho * rho, b, c, r);
}

double default_lambda_tol(const DualObjective& objective) {
  const double diam = objective.space().diameter();
  const double cost_scale = 0.5 * diam * diam;
  const double loss_scale = std::max(1.0, std::abs(objective.empirical_mean_loss()));
  return 1e-6 * loss_scale / cost_scale;
}

namespace {

struct Probe {
  double lambda;
  double objective;
  double slope;
  DualEval eval;
};

using no_throw_policy = boost::math::policies::policy<
    boost::math::policies::evaluation_error<boost::math::policies::ignore_error>>;

/// Intersection (lambda, value) of the tangent lines at two probes with
/// slope_a < slope_b; the value is a lower bound on the convex objective there.
std::pair<double, double> tangent_intersection(const Probe& a, const Probe& b) {
  const double ds = a.slope - b.slope;
  if (!(ds < 0.0)) return {0.5 * (a.lambda + b.lambda), std::min(a.objective, b.objective)};
  const double x = (b.objective - a.objective + a.slope * a.lambda - b.slope * b.lambda) / ds;
  return {x, a.objective + a.slope * (x - a.lambda)};
}

}  // namespace

RobustRiskResult minimize_dual(DualObjective& objective, double rho, const RiskOptions& options) {
  require(std::isfinite(rho) && rho >= 0.0, "robust risk: rho must be finite and >= 0");
  const bool entropic = objective.eps() > 0.0;
  require(!(entropic && rho == 0.0),
          "robust risk: rho = 0 with eps > 0 is ill-posed (infinite KL of the identity coupling)");
  const Index evals_before = objective.evaluations();
  const double lambda_tol = options.lambda_tol.value_or(default_lambda_tol(objective));
  RobustRiskResult out;

  if (rho == 0.0) {
    // No perturbation allowed: the infimum is attained as lambda -> infinity.
    const DualEval e = objective.evaluate(std::numeric_limits<double>::infinity());
    out.value = e.mean_phi;
    out.lambda_star = out.bracket_lo = out.bracket_hi = options.lambda_max;
    out.evals = objective.evaluations() - evals_before;
    return out;
  }

  std::vector<Probe> probes;
  auto probe = [&](double lambda) -> const Probe& {
    if (probes.size() >= static_cast<std::size_t>(options.max_evals)) {
      fail(ErrorCode::convergence_failure, "robust risk: lambda search exceeded max_evals");
    }
    const DualEval e = objective.evaluate(lambda);
    if (!std::isfinite(e.mean_phi)) fail(ErrorCode::numeric_failure, "robust risk: non-finite phi");
    probes.push_back({lambda, e.objective(rho), e.objective_slope(rho), e});
    return probes.back();
  };

  // Latest probe at exactly this lambda (bracket ends are always probed points).
  auto at = [&probes](double lambda) -> const Probe* {
    for (auto it = probes.rbegin(); it != probes.rend(); ++it) {
      if (it->lambda == lambda) return &*it;
    }
    return nullptr;
  };

  double lo = 0.0;
  double hi = 0.0;
  double slope_lo = probe(0.0).slope;
  double slope_hi = slope_lo;
  if (slope_lo < 0.0) {
    double guess = options.lambda_hint.value_or(0.0);
    if (!(guess > 0.0 && std::isfinite(guess))) {
      guess = lambda_init(objective.model(), objective.data(), rho, objective.eps(),
                          objective.sigma());
    }
    if (!(guess > 0.0 && std::isfinite(guess))) {
      guess = std::max(std::sqrt(objective.half_mean_sq_grad()) / rho, 1e3 * lambda_tol);
    }
    guess = std::min(guess, options.lambda_max);
    hi = guess;
    slope_hi = probe(hi).slope;
    // Expand upward until the derivative turns nonnegative.
    while (slope_hi < 0.0) {
      lo = hi;
      slope_lo = slope_hi;
      hi *= options.expansion;
      if (hi > options.lambda_max) {
        fail(ErrorCode::unbounded_dual,
             "robust risk: lambda bracket exceeded lambda_max (ill-posed inputs)");
      }
      slope_hi = probe(hi).slope;
    }
    // The first guess overshot: contract downward to tighten the lower end.
    if (lo == 0.0) {
      while (hi > lambda_tol) {
        const double down = hi / options.expansion;
        const double s = probe(down).slope;
        if (s < 0.0) {
          lo = down;
          slope_lo = s;
          break;
        }
        hi = down;
        slope_hi = s;
      }
    }

    // Narrow the bracket [lo, hi] around the root of the nondecreasing slope.
    auto done = [&](double a, double b) {
      if (b - a <= options.rel_tol * b || b <= lambda_tol) return true;
      const Probe* pa = at(a);
      const Probe* pb = at(b);
      if (pa == nullptr || pb == nullptr) return false;
      // Convexity: the bracket tangents bound the minimum from below.
      const double lower = tangent_intersection(*pa, *pb).second;
      const double best_value = std::min(pa->objective, pb->objective);
      return best_value - lower <= options.value_tol * std::max(1.0, std::abs(best_value));
    };
    if (entropic) {
      // Safeguarded Newton (curvature = Var_Gibbs(c) / eps), bisecting whenever
      // the step leaves the bracket or two steps fail to halve it.
      double width_two_ago = std::numeric_limits<double>::infinity();
      double width_prev = std::numeric_limits<double>::infinity();
      while (slope_hi != 0.0 && !done(lo, hi)) {
        const double width = hi - lo;
        double cand = std::numeric_limits<double>::quiet_NaN();
        if (!(width > 0.5 * width_two_ago)) {
          const Probe* near = nullptr;
          for (const Probe& p : probes) {
            if (p.lambda < lo || p.lambda > hi) continue;
            if (near == nullptr || std::abs(p.slope) < std::abs(near->slope)) near = &p;
          }
          if (near != nullptr && near->eval.curvature > 0.0) {
            cand = near->lambda - near->slope / near->eval.curvature;
          }
        }
        const double guard = 1e-3 * width;
        if (!(cand > lo + guard && cand < hi - guard)) cand = 0.5 * (lo + hi);
        const double s = probe(cand).slope;
        if (s < 0.0) {
          lo = cand;
        } else {
          hi = cand;
          slope_hi = s;
        }
        width_two_ago = width_prev;
        width_prev = width;
      }
    } else if (slope_hi != 0.0 && !done(lo, hi)) {
      // eps = 0: the slope is monotone but may jump; TOMS 748 keeps a bracket and
      // converges superlinearly on the smooth pieces.
      std::uintmax_t iters = static_cast<std::uintmax_t>(options.max_evals);
      const auto root = boost::math::tools::toms748_solve(
          [&](double lambda) { return lambda == lo ? slope_lo : lambda == hi ? slope_hi : probe(lambda).slope; },
          lo, hi, slope_lo, slope_hi, done, iters, no_throw_policy());
      lo = root.first;
      hi = root.second;
    }
  }

  // lambda* = best evaluated point inside the final bracket.
  const Probe* best = nullptr;
  for (const Probe& p : probes) {
    if (p.lambda < lo || p.lambda > hi) continue;
    if (best == nullptr || p.objective < best->objective) best = &p;
  }
  out.lambda_star = best->lambda;
  out.value = best->objective;
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  out.low_ess = best->eval.low_ess;
  out.converged = best->eval.converged;
  if (entropic) {
    const DualEval e = objective.evaluate(out.lambda_star, true);
    out.stderr = e.stderr;
  }
  out.degenerate = out.lambda_star <= lambda_tol;
  out.evals = objective.evaluations() - evals_before;
  return out;
}

RobustRiskResult robust_risk(const LossModel& model, const SampleSpace& space,
                             const Dataset& data, double rho, double eps, double sigma,
                             const McBudget& budget, std::uint64_t seed,
                             const RiskOptions& options) {
  require(std::isfinite(rho) && rho >= 0.0, "robust risk: rho must be finite and >= 0");
  require(!(eps > 0.0 && rho == 0.0), "robust risk: rho = 0 with eps > 0 is ill-posed");
  DualObjective objective(model, space, data, eps, sigma, budget, seed);
  return minimize_dual(objective, rho, options);
}

TrainResult train_robust(const std::shared_ptr<const LossFamily>& family,
                         const SampleSpace& space, const Dataset& data, double rho, double eps,
                         double sigma, const Vec& theta0, const McBudget& mc,
                         const OptBudget& opt, std::uint64_t seed,
                         const RiskOptions& risk_options) {
  require(family != nullptr, "train_robust: null family");
  require(opt.max_iters >= 0 && opt.tol >= 0.0, "train_robust: invalid optimization budget");
  const ThetaSet& theta_set = family->theta_set();
  require(theta_set.contains(theta0, 1e-9), "train_robust: theta0 must lie in Theta");

  TrainResult out;
  out.theta = theta_set.project(theta0);
  DualObjective objective(LossModel(family, out.theta), space, data, eps, sigma, mc, seed);
  RiskOptions options = risk_options;
  auto solve = [&](const Vec& theta) {
    objective.set_model(LossModel(family, theta));
    return minimize_dual(objective, rho, options);
  };
  // With rho = 0 and eps = 0 the objective is the empirical mean (lambda = infinity).
  auto gradient = [&](const RobustRiskResult& r) {
    const double lambda =
        rho == 0.0 ? std::numeric_limits<double>::infinity() : r.lambda_star;
    return objective.envelope_grad_theta(lambda);
  };
  auto projected_grad_norm = [&](const Vec& theta, const Vec& g) {
    return (theta - theta_set.project(theta - g)).norm();
  };

  out.risk = solve(out.theta);
  if (theta_set.kind() == ThetaSet::Kind::point) {
    out.converged = true;
    return out;
  }
  Vec g = gradient(out.risk);
  out.grad_norm = projected_grad_norm(out.theta, g);
  double alpha = 1.0 / std::max(g.norm(), 1e-12);
  for (out.iterations = 0; out.iterations < opt.max_iters; ++out.iterations) {
    if (out.grad_norm <= opt.tol) {
      out.converged = true;
      break;
    }
    options.lambda_hint = out.risk.lambda_star > 0.0 ? std::optional<double>(out.risk.lambda_star)
                                                    : risk_options.lambda_hint;
    bool accepted = false;
    Vec candidate;
    RobustRiskResult cand_risk;
    for (int k = 0; k < 60; ++k) {
      candidate = theta_set.project(out.theta - alpha * g);
      const Vec step = candidate - out.theta;
      if (step.norm() <= 1e-15 * std::max(1.0, out.theta.norm())) break;
      cand_risk = solve(candidate);
      if (cand_risk.value <= out.risk.value + 1e-4 * g.dot(step)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // no decrease available at working precision
    const Vec g_new = gradient(cand_risk);
    const Vec s = candidate - out.theta;
    const Vec y = g_new - g;
    const double sy = s.dot(y);
    alpha = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * alpha;
    alpha = std::clamp(alpha, 1e-12, 1e12);
    out.theta = candidate;
    out.risk = cand_risk;
    g = g_new;
    out.grad_norm = projected_grad_norm(out.theta, g);
  }
  if (out.grad_norm <= opt.tol) out.converged = true;
  return out;
}

RiskEstimate true_risk(const LossModel& model, const SampleSpace& space, const Mat& sample,
                       bool smoothed, double sigma, RngStream& rng) {
  require(sample.cols() >= 2, "true_risk: need at least two samples");
  require(sample.rows() == space.dims(), "true_risk: dimension mismatch");
  Vec losses(sample.cols());
  if (smoothed) {
    require(sigma > 0.0, "true_risk: sigma must be positive when smoothed");
    Mat moved(sample.rows(), sample.cols());
    for (Index i = 0; i < sample.cols(); ++i) {
      moved.col(i) = sample_reference(space, sample.col(i), sigma, 1, rng);
    }
    model.values(moved, losses);
  } else {
    model.values(sample, losses);
  }
  const MeanStderr ms = mean_stderr(losses);
  return {ms.mean, ms.stderr};
}

RiskEstimate true_risk(const LossModel& model, const SampleSpace& space,
                       const std::function<Vec(RngStream&)>& sampler, Index n_samples,
                       bool smoothed, double sigma, RngStream& rng) {
  require(n_samples >= 2, "true_risk: N must be >= 2");
  Mat sample(space.dims(), n_samples);
  for (Index i = 0; i < n_samples; ++i) sample.col(i) = sampler(rng);
  return true_risk(model, space, sample, smoothed, sigma, rng);
}

}  // namespace wdro
