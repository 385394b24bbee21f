#pragma once
// Test-only reference computations. Each oracle is written independently of the
// library algorithm it checks (different formulation, brute force, or closed form).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace wdro::testing {

using Fn1 = std::function<double(double)>;

/// Composite Simpson rule on [a, b] with an even number of panels.
inline double simpson(const Fn1& f, double a, double b, int panels = 20000) {
  if (panels % 2 == 1) ++panels;
  const double h = (b - a) / panels;
  double sum = f(a) + f(b);
  for (int k = 1; k < panels; ++k) sum += (k % 2 == 1 ? 4.0 : 2.0) * f(a + k * h);
  return sum * h / 3.0;
}

/// log int_a^b exp(g(z)) dz by Simpson on exp(g - max g) (max over the nodes).
inline double log_simpson_exp(const Fn1& g, double a, double b, int panels = 20000) {
  double peak = -std::numeric_limits<double>::infinity();
  const double h = (b - a) / panels;
  for (int k = 0; k <= panels; ++k) peak = std::max(peak, g(a + k * h));
  const double integral = simpson([&](double z) { return std::exp(g(z) - peak); }, a, b, panels);
  return peak + std::log(integral);
}

/// 1-D entropic dual generator on the interval [lo, hi] by direct quadrature:
///   eps log( int exp((f - lambda c)/eps) e^{-(z-xi)^2/(2 s^2)} dz / int e^{-(z-xi)^2/(2 s^2)} dz ).
inline double phi_1d_quadrature(const Fn1& f, double xi, double lo, double hi, double lambda,
                                double eps, double sigma, int panels = 40000) {
  auto log_ref = [&](double z) { return -0.5 * (z - xi) * (z - xi) / (sigma * sigma); };
  auto log_tilted = [&](double z) {
    return (f(z) - lambda * 0.5 * (z - xi) * (z - xi)) / eps + log_ref(z);
  };
  return eps * (log_simpson_exp(log_tilted, lo, hi, panels) - log_simpson_exp(log_ref, lo, hi, panels));
}

/// Dense-scan supremum of z -> f(z) - lambda (z - xi)^2 / 2 over [lo, hi] with a
/// golden-section polish around the best node.
inline double sup_1d_scan(const Fn1& f, double xi, double lo, double hi, double lambda,
                          int nodes = 20001) {
  auto h = [&](double z) { return f(z) - lambda * 0.5 * (z - xi) * (z - xi); };
  const double step = (hi - lo) / (nodes - 1);
  int best = 0;
  double best_value = h(lo);
  for (int k = 1; k < nodes; ++k) {
    const double v = h(lo + k * step);
    if (v > best_value) {
      best_value = v;
      best = k;
    }
  }
  double a = std::max(lo, lo + (best - 1) * step);
  double b = std::min(hi, lo + (best + 1) * step);
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 100; ++it) {
    const double c = b - r * (b - a);
    const double d = a + r * (b - a);
    if (h(c) > h(d)) b = d; else a = c;
  }
  return std::max(best_value, h(0.5 * (a + b)));
}

/// Primal of the grid-restricted WDRO problem as a multiple-choice knapsack LP:
/// each data point i moves its mass 1/n among grid options (c_ij, f_j) with a total
/// transport budget rho^2. Solved by the classical greedy on the upper concave hull of
/// each point's options (incremental value per unit cost, largest first).
inline double grid_primal_mckp(const std::vector<double>& data, const std::vector<double>& grid,
                               const std::vector<double>& f_grid, double rho) {
  const auto n = static_cast<double>(data.size());
  double value = 0.0;
  double budget = rho * rho;
  struct Increment {
    double slope;
    double dc;
    double df;
  };
  std::vector<Increment> increments;
  for (double xi : data) {
    std::vector<std::pair<double, double>> options;  // (cost, value)
    for (std::size_t j = 0; j < grid.size(); ++j) {
      options.emplace_back(0.5 * (grid[j] - xi) * (grid[j] - xi), f_grid[j]);
    }
    std::sort(options.begin(), options.end(), [](const auto& a, const auto& b) {
      return a.first < b.first || (a.first == b.first && a.second > b.second);
    });
    // Start from the cheapest option with the best value among the cheapest.
    std::vector<std::pair<double, double>> hull;
    for (const auto& o : options) {
      if (!hull.empty() && o.second <= hull.back().second) continue;  // dominated
      while (hull.size() >= 2) {
        const auto& a = hull[hull.size() - 2];
        const auto& b = hull.back();
        // b is below the chord a -> o: remove it.
        if ((b.second - a.second) * (o.first - a.first) <= (o.second - a.second) * (b.first - a.first)) {
          hull.pop_back();
        } else {
          break;
        }
      }
      hull.push_back(o);
    }
    budget -= hull.front().first / n;
    value += hull.front().second / n;
    for (std::size_t k = 1; k < hull.size(); ++k) {
      const double dc = (hull[k].first - hull[k - 1].first) / n;
      const double df = (hull[k].second - hull[k - 1].second) / n;
      increments.push_back({df / dc, dc, df});
    }
  }
  if (budget < 0.0) return std::numeric_limits<double>::quiet_NaN();  // infeasible
  std::sort(increments.begin(), increments.end(),
            [](const Increment& a, const Increment& b) { return a.slope > b.slope; });
  for (const Increment& inc : increments) {
    if (budget <= 0.0) break;
    const double take = std::min(1.0, budget / inc.dc);
    value += take * inc.df;
    budget -= take * inc.dc;
  }
  return value;
}

/// (1/2) W_2^2 between two equal-size 1-D empirical measures (sorted coupling is optimal).
inline double half_w2_sq_sorted(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += 0.5 * (a[k] - b[k]) * (a[k] - b[k]);
  return sum / static_cast<double>(a.size());
}

/// Unconstrained logistic ERM argmin_theta mean log(1 + exp(<xi_i, theta>)) by Newton's method.
inline Eigen::VectorXd logistic_erm_newton(const Eigen::MatrixXd& xi, Eigen::VectorXd theta,
                                           int iters = 100) {
  const auto n = static_cast<double>(xi.cols());
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(theta.size(), theta.size());
    for (Eigen::Index i = 0; i < xi.cols(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-xi.col(i).dot(theta)));
      grad += s * xi.col(i) / n;
      hess += s * (1.0 - s) * xi.col(i) * xi.col(i).transpose() / n;
    }
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    theta -= step;
    if (step.norm() < 1e-14) break;
  }
  return theta;
}

/// Central finite-difference gradient of a scalar function.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd up = x;
    Eigen::VectorXd down = x;
    up(j) += h;
    down(j) -= h;
    g(j) = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

/// Gaussian moment algebra: for an affine loss f(z) = a + <g, z - xi> on R^d,
///   eps log E_{N(xi, s^2 I)} exp((f - lambda |z - xi|^2 / 2) / eps)
///     = a + |g|^2 / (2 (lambda + eps / s^2)) - (eps d / 2) log(1 + lambda s^2 / eps).
inline double phi_affine_gaussian(double a, double g_sq, int d, double lambda, double eps, double s) {
  return a + g_sq / (2.0 * (lambda + eps / (s * s))) -
         0.5 * eps * d * std::log(1.0 + lambda * s * s / eps);
}

/// Mean of N(mu, s^2) truncated to [lo, hi] by quadrature.
inline double truncated_normal_mean(double mu, double s, double lo, double hi) {
  auto density = [&](double x) { return std::exp(-0.5 * (x - mu) * (x - mu) / (s * s)); };
  const double mass = simpson(density, lo, hi);
  return simpson([&](double x) { return x * density(x); }, lo, hi) / mass;
}

}  // namespace wdro::testing
