#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "wdro/errors.hpp"
#include "wdro/oracle.hpp"
#include "wdro/rng.hpp"

using namespace wdro;
namespace wt = wdro::testing;

TEST_CASE("grid dual equals the knapsack primal (strong LP duality)") {
  const SampleSpace interval = SampleSpace::ball(Vec::Zero(1), 2.0);
  const Grid grid = Grid::uniform_1d(interval, 301);
  RngStream rng(12);
  for (int k = 0; k < 25; ++k) {
    const LossModel model(logistic_family(1, ThetaSet::annulus(0.05, 10.0)),
                          Vec::Constant(1, -3.0 + 6.0 * rng.uniform()));
    const int n = 1 + static_cast<int>(rng.next_u64() % 15);
    Dataset data;
    data.points.resize(1, n);
    std::vector<double> xs;
    for (int i = 0; i < n; ++i) {
      xs.push_back(-1.9 + 3.8 * rng.uniform());
      data.points(0, i) = xs.back();
    }
    std::vector<double> g(grid.points.data(), grid.points.data() + grid.size());
    std::vector<double> fg;
    for (double z : g) fg.push_back(model.value(Vec::Constant(1, z)));
    const double rho = 0.02 + 1.5 * rng.uniform();
    const double primal = wt::grid_primal_mckp(xs, g, fg, rho);
    if (std::isnan(primal)) {
      CHECK_THROWS_AS(grid_dual_exact(model, data, rho, grid), Error);
    } else {
      CHECK(grid_dual_exact(model, data, rho, grid) == doctest::Approx(primal).epsilon(1e-10));
    }
  }
}

TEST_CASE("grid dual rejects an empty neighbourhood") {
  const SampleSpace interval = SampleSpace::ball(Vec::Zero(1), 1.0);
  Grid grid;
  grid.points.resize(1, 2);
  grid.points << -1.0, 1.0;
  Dataset data;
  data.points.resize(1, 1);
  data.points << 0.0;  // nearest grid point costs 1/2 > rho^2
  const LossModel model(logistic_family(1, ThetaSet::annulus(0.05, 10.0)), Vec::Constant(1, 1.0));
  CHECK_THROWS_AS(grid_dual_exact(model, data, 0.5, grid), Error);
}

TEST_CASE("phi quadrature agrees with an independent Simpson rule") {
  const SampleSpace interval = SampleSpace::ball(Vec::Zero(1), 2.0);
  RngStream rng(2);
  for (int k = 0; k < 10; ++k) {
    const LossModel model(logistic_family(1, ThetaSet::annulus(0.05, 10.0)),
                          Vec::Constant(1, -2.0 + 4.0 * rng.uniform()));
    const double xi = -1.7 + 3.4 * rng.uniform();
    const DualParams params{std::pow(10.0, -1.0 + 2.0 * rng.uniform()), 0.05 + 0.4 * rng.uniform(),
                            0.1 + 0.4 * rng.uniform()};
    const double q = phi_quadrature(model, interval, Vec::Constant(1, xi), params, 4000).phi;
    const double s = wt::phi_1d_quadrature([&](double z) { return model.value(Vec::Constant(1, z)); },
                                           xi, -2.0, 2.0, params.lambda, params.eps, params.sigma);
    CHECK(q == doctest::Approx(s).epsilon(1e-6));
  }
}

TEST_CASE("phi quadrature in 2-D agrees with Monte Carlo") {
  const SampleSpace disk = SampleSpace::ball(Vec::Zero(2), 1.5);
  const LossModel model(logistic_family(2, ThetaSet::annulus(0.05, 10.0)), Vec::Constant(2, 0.8));
  Vec xi(2);
  xi << 0.4, -0.9;
  const DualParams params{0.8, 0.2, 0.4};
  McBudget budget;
  budget.samples_per_xi = 40000;
  RngStream rng(4);
  const PhiEstimate mc = phi(model, disk, xi, params, budget, rng);
  const double q = phi_quadrature(model, disk, xi, params, 600).phi;
  CHECK(std::abs(mc.value - q) <= 4.0 * mc.stderr);
  CHECK_THROWS_AS(phi_quadrature(LossModel(logistic_family(3, ThetaSet::annulus(0.05, 1.0)), Vec::Constant(3, 0.5)),
                                 SampleSpace::ball(Vec::Zero(3), 1.0), Vec::Zero(3), params),
                  Error);
}

TEST_CASE("Sinkhorn: marginals, and the small-delta limit is half W2 squared") {
  const SampleSpace interval = SampleSpace::ball(Vec::Zero(1), 1.0);
  const Grid grid = Grid::uniform_1d(interval, 41);
  Vec p = Vec::Zero(41);
  Vec q = Vec::Zero(41);
  std::vector<double> a, b;
  for (int k : {2, 7, 11, 20}) {
    p(k) = 0.25;
    a.push_back(grid.points(0, k));
  }
  for (int k : {15, 22, 30, 38}) {
    q(k) = 0.25;
    b.push_back(grid.points(0, k));
  }
  const double exact = wt::half_w2_sq_sorted(a, b);
  const SinkhornReport r = reg_wass_sq(p, q, grid, 1e-3, 1.0);
  CHECK(r.marginal_error < 1e-9);
  CHECK(r.kl >= 0.0);
  CHECK(r.transport_cost >= exact - 1e-9);
  CHECK(r.value == doctest::Approx(exact).epsilon(2e-2));
  // Larger delta can only increase the regularized value.
  CHECK(reg_wass_sq(p, q, grid, 1e-1, 1.0).value >= r.value - 1e-9);
}
