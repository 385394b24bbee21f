#include "wdro/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "wdro/errors.hpp"

namespace wdro {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

/// Upper envelope of lines y = a_j - lambda c_j on lambda >= 0.
struct Envelope {
  std::vector<double> a;
  std::vector<double> c;
  std::vector<double> breaks;  // breaks[k]: lambda where line k+1 takes over from line k

  double eval(double lambda) const {
    const auto k = static_cast<std::size_t>(
        std::upper_bound(breaks.begin(), breaks.end(), lambda) - breaks.begin());
    return a[k] - lambda * c[k];
  }
};

Envelope build_envelope(const Vec& values, const Vec& costs) {
  // Sort by cost descending (slope ascending); for equal costs keep the largest value.
  std::vector<Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index x, Index y) {
    if (costs(x) != costs(y)) return costs(x) > costs(y);
    return values(x) > values(y);
  });
  Envelope env;
  auto intersect = [&](std::size_t k, double a2, double c2) {
    // a_k - l c_k = a2 - l c2  =>  l = (a_k - a2) / (c_k - c2), with c_k > c2.
    return (env.a[k] - a2) / (env.c[k] - c2);
  };
  for (Index idx : order) {
    const double a = values(idx);
    const double c = costs(idx);
    if (!env.c.empty() && env.c.back() == c) continue;  // dominated duplicate slope
    while (!env.a.empty()) {
      const std::size_t top = env.a.size() - 1;
      // New line dominates the top line everywhere on lambda >= 0 from the left end.
      if (a >= env.a[top]) {
        env.a.pop_back();
        env.c.pop_back();
        if (!env.breaks.empty()) env.breaks.pop_back();
        continue;
      }
      const double x = intersect(top, a, c);
      if (!env.breaks.empty() && x <= env.breaks.back()) {
        env.a.pop_back();
        env.c.pop_back();
        env.breaks.pop_back();
        continue;
      }
      env.breaks.push_back(x);
      break;
    }
    env.a.push_back(a);
    env.c.push_back(c);
  }
  return env;
}

}  // namespace

void Grid::validate() const {
  require(points.cols() > 0, "grid must be nonempty");
  require(weights.size() == 0 || weights.size() == points.cols(),
          "grid weights must match the number of points");
  require(weights.size() == 0 || (weights.array() > 0.0).all(), "grid weights must be positive");
}

Grid Grid::uniform_1d(const SampleSpace& space, Index m) {
  require(space.dims() == 1, "uniform_1d: space must be one-dimensional");
  require(m >= 2, "uniform_1d: need at least two points");
  Vec lo;
  Vec hi;
  space.bounding_box(lo, hi);
  Grid grid;
  grid.points.resize(1, m);
  for (Index j = 0; j < m; ++j) {
    grid.points(0, j) = lo(0) + (hi(0) - lo(0)) * static_cast<double>(j) / static_cast<double>(m - 1);
  }
  return grid;
}

double grid_dual_exact(const LossModel& model, const Dataset& data, double rho, const Grid& grid) {
  grid.validate();
  require(data.size() > 0, "grid_dual_exact: dataset must be nonempty");
  require(data.dims() == grid.points.rows(), "grid_dual_exact: dimension mismatch");
  require(std::isfinite(rho) && rho >= 0.0, "grid_dual_exact: rho must be >= 0");
  require(grid.size() <= 100000, "grid_dual_exact: grid exceeds 1e5 points per data point");
  const Index n = data.size();
  const Index m = grid.size();
  Vec values(m);
  model.values(grid.points, values);

  std::vector<Envelope> envelopes;
  envelopes.reserve(static_cast<std::size_t>(n));
  double min_cost_total = 0.0;
  std::vector<double> candidates{0.0};
  for (Index i = 0; i < n; ++i) {
    const Vec costs = 0.5 * (grid.points.colwise() - data.point(i)).colwise().squaredNorm().transpose();
    min_cost_total += costs.minCoeff();
    envelopes.push_back(build_envelope(values, costs));
    for (double b : envelopes.back().breaks) {
      if (b > 0.0) candidates.push_back(b);
    }
  }
  const double r2 = rho * rho;
  // Feasibility: the objective is bounded below iff rho^2 >= mean_i min_j c_ij.
  require(r2 >= min_cost_total / static_cast<double>(n) * (1.0 - 1e-12),
          "grid_dual_exact: no grid distribution lies within the radius");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  double best = std::numeric_limits<double>::infinity();
  for (double lambda : candidates) {
    double total = 0.0;
    for (const Envelope& env : envelopes) total += env.eval(lambda);
    best = std::min(best, lambda * r2 + total / static_cast<double>(n));
  }
  return best;
}

namespace {

struct Interval {
  double lo;
  double hi;
};

/// Midpoint rule over a window intersected with Xi; calls visit(z, log_cell_volume).
template <typename Visit>
void integrate_window(const SampleSpace& space, ConstVecRef lo_win, ConstVecRef hi_win,
                      Index resolution, Visit&& visit) {
  const Index d = space.dims();
  Vec lo;
  Vec hi;
  space.bounding_box(lo, hi);
  auto clip = [&](Index k) {
    return Interval{std::max(lo(k), lo_win(k)), std::min(hi(k), hi_win(k))};
  };
  Vec z(d);
  if (d == 1) {
    const Interval ix = clip(0);
    if (!(ix.hi > ix.lo)) return;
    const double h = (ix.hi - ix.lo) / static_cast<double>(resolution);
    const double log_h = std::log(h);
    for (Index a = 0; a < resolution; ++a) {
      z(0) = ix.lo + (static_cast<double>(a) + 0.5) * h;
      visit(z, log_h);
    }
    return;
  }
  const Interval ix = clip(0);
  if (!(ix.hi > ix.lo)) return;
  const double hx = (ix.hi - ix.lo) / static_cast<double>(resolution);
  const bool disk = space.kind() == SpaceKind::ball;
  for (Index a = 0; a < resolution; ++a) {
    z(0) = ix.lo + (static_cast<double>(a) + 0.5) * hx;
    Interval iy = clip(1);
    if (disk) {
      const double dx = z(0) - space.center()(0);
      const double r2 = space.radius() * space.radius() - dx * dx;
      if (r2 <= 0.0) continue;
      const double half = std::sqrt(r2);
      iy.lo = std::max(iy.lo, space.center()(1) - half);
      iy.hi = std::min(iy.hi, space.center()(1) + half);
    }
    if (!(iy.hi > iy.lo)) continue;
    const double hy = (iy.hi - iy.lo) / static_cast<double>(resolution);
    const double log_cell = std::log(hx) + std::log(hy);
    for (Index b = 0; b < resolution; ++b) {
      z(1) = iy.lo + (static_cast<double>(b) + 0.5) * hy;
      visit(z, log_cell);
    }
  }
}

}  // namespace

QuadratureResult phi_quadrature(const LossModel& model, const SampleSpace& space, ConstVecRef xi,
                                const DualParams& params, Index resolution) {
  params.validate();
  if (space.dims() > 2) fail(ErrorCode::unimplemented, "phi_quadrature supports d <= 2 only");
  require(params.eps > 0.0, "phi_quadrature: eps must be positive");
  require(resolution >= 2, "phi_quadrature: resolution must be >= 2");
  require(xi.size() == space.dims(), "phi_quadrature: dimension mismatch");
  const double eps = params.eps;
  const double sigma = params.sigma;
  const double inv_two_s2 = 0.5 / (sigma * sigma);

  // Normalizer Z over xi +- 12 sigma.
  const Vec z_lo = xi.array() - 12.0 * sigma;
  const Vec z_hi = xi.array() + 12.0 * sigma;
  double log_z = kNegInf;
  integrate_window(space, z_lo, z_hi, resolution, [&](const Vec& z, double log_cell) {
    log_z = log_add(log_z, log_cell - (z - xi).squaredNorm() * inv_two_s2);
  });
  require(log_z > kNegInf, "phi_quadrature: empty integration window");

  // Tilted integrand: window around xi and the Laplace mode xi + s^2 grad f / eps.
  const double precision = params.lambda / eps + 1.0 / (sigma * sigma);
  const double s = 1.0 / std::sqrt(precision);
  const Vec mode = xi + (s * s / eps) * model.grad_xi(xi);
  const Vec w_lo = xi.cwiseMin(mode).array() - 12.0 * s;
  const Vec w_hi = xi.cwiseMax(mode).array() + 12.0 * s;
  double log_num = kNegInf;
  double log_cost = kNegInf;
  integrate_window(space, w_lo, w_hi, resolution, [&](const Vec& z, double log_cell) {
    const double c = 0.5 * (z - xi).squaredNorm();
    const double lw = log_cell + (model.value(z) - params.lambda * c) / eps -
                      (z - xi).squaredNorm() * inv_two_s2;
    log_num = log_add(log_num, lw);
    if (c > 0.0) log_cost = log_add(log_cost, lw + std::log(c));
  });
  require(log_num > kNegInf, "phi_quadrature: empty integration window");
  QuadratureResult out;
  out.phi = eps * (log_num - log_z);
  out.mean_cost = log_cost == kNegInf ? 0.0 : std::exp(log_cost - log_num);
  return out;
}

SinkhornReport reg_wass_sq(ConstVecRef p, ConstVecRef q, const Grid& grid, double delta,
                           double sigma) {
  grid.validate();
  const Index m = grid.size();
  require(p.size() == m && q.size() == m, "reg_wass_sq: marginals must match the grid");
  require((p.array() >= 0.0).all() && (q.array() >= 0.0).all(),
          "reg_wass_sq: marginals must be nonnegative");
  require(std::abs(p.sum() - 1.0) < 1e-9 && std::abs(q.sum() - 1.0) < 1e-9,
          "reg_wass_sq: marginals must sum to 1");
  require(delta > 0.0 && std::isfinite(delta), "reg_wass_sq: delta must be positive");
  require(sigma > 0.0 && std::isfinite(sigma), "reg_wass_sq: sigma must be positive");

  std::vector<Index> rows;
  std::vector<Index> cols;
  for (Index j = 0; j < m; ++j) {
    if (p(j) > 0.0) rows.push_back(j);
    if (q(j) > 0.0) cols.push_back(j);
  }
  const auto nr = static_cast<Index>(rows.size());
  const auto nc = static_cast<Index>(cols.size());
  Vec log_w = grid.weights.size() == 0 ? Vec::Zero(m) : Vec(grid.weights.array().log());

  // log pi_sigma(j | i) over the full grid, then restricted to the support columns.
  Mat cost(nr, nc);
  Mat log_ref(nr, nc);  // log pi_sigma(j | i)
  for (Index a = 0; a < nr; ++a) {
    const Vec xi = grid.points.col(rows[static_cast<std::size_t>(a)]);
    const Vec c_all = 0.5 * (grid.points.colwise() - xi).colwise().squaredNorm().transpose();
    const Vec logits = log_w - c_all / (sigma * sigma);
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    for (Index b = 0; b < nc; ++b) {
      const Index j = cols[static_cast<std::size_t>(b)];
      cost(a, b) = c_all(j);
      log_ref(a, b) = logits(j) - lse;
    }
  }
  Vec log_p(nr);
  Vec log_q(nc);
  for (Index a = 0; a < nr; ++a) log_p(a) = std::log(p(rows[static_cast<std::size_t>(a)]));
  for (Index b = 0; b < nc; ++b) log_q(b) = std::log(q(cols[static_cast<std::size_t>(b)]));

  // Log-domain Sinkhorn with delta-annealing: solve a sequence of problems with
  // geometrically decreasing regularization, warm-starting the potentials
  // (rescaled to the new delta) so the final small-delta solve starts near its fixed point.
  Mat log_k;
  Vec f = Vec::Zero(nr);
  Vec g = Vec::Zero(nc);
  auto row_lse = [&](Index a) {
    const Vec v = log_k.row(a).transpose() + g;
    const double mx = v.maxCoeff();
    return mx + std::log((v.array() - mx).exp().sum());
  };
  auto col_lse = [&](Index b) {
    const Vec v = log_k.col(b) + f;
    const double mx = v.maxCoeff();
    return mx + std::log((v.array() - mx).exp().sum());
  };

  SinkhornReport out;
  constexpr int kMaxIters = 100000;
  std::vector<double> schedule{delta};
  const double cost_scale = std::max(cost.maxCoeff(), delta);
  while (schedule.back() * 2.0 < cost_scale) schedule.push_back(schedule.back() * 2.0);
  std::reverse(schedule.begin(), schedule.end());
  double previous_delta = schedule.front();
  int total = 0;
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double d = schedule[stage];
    const bool last = stage + 1 == schedule.size();
    f *= previous_delta / d;
    g *= previous_delta / d;
    previous_delta = d;
    log_k = log_ref - cost / d;
    for (out.iterations = 1; out.iterations <= kMaxIters; ++out.iterations) {
      for (Index a = 0; a < nr; ++a) f(a) = log_p(a) - row_lse(a);
      for (Index b = 0; b < nc; ++b) g(b) = log_q(b) - col_lse(b);
      // Columns are exact after the g update; measure the row residual.
      double err = 0.0;
      for (Index a = 0; a < nr; ++a) {
        err += std::abs(std::exp(f(a) + row_lse(a)) - p(rows[static_cast<std::size_t>(a)]));
      }
      out.marginal_error = err;
      if (err < (last ? 1e-10 : 1e-6)) break;
    }
    total += std::min(out.iterations, kMaxIters);
    if (last && out.iterations > kMaxIters) {
      fail(ErrorCode::convergence_failure, "reg_wass_sq: Sinkhorn did not converge in 1e5 iterations");
    }
  }
  out.iterations = total;
  double transport = 0.0;
  double kl = 0.0;
  for (Index a = 0; a < nr; ++a) {
    for (Index b = 0; b < nc; ++b) {
      const double log_pi = f(a) + log_k(a, b) + g(b);
      const double pi = std::exp(log_pi);
      if (pi == 0.0) continue;
      transport += pi * cost(a, b);
      kl += pi * (log_pi - log_p(a) - log_ref(a, b));
    }
  }
  out.transport_cost = transport;
  out.kl = std::max(kl, 0.0);
  out.value = transport + delta * out.kl;
  return out;
}

}  // namespace wdro
