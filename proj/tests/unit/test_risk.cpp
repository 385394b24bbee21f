#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "wdro/errors.hpp"
#include "wdro/risk.hpp"
#include "wdro/rng.hpp"

using namespace wdro;
namespace wt = wdro::testing;

namespace {

Dataset dataset_1d(const std::vector<double>& xs) {
  Dataset d;
  d.points.resize(1, static_cast<Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) d.points(0, static_cast<Index>(i)) = xs[i];
  return d;
}

std::shared_ptr<const LossFamily> logistic1() { return logistic_family(1, ThetaSet::annulus(0.05, 10.0)); }

}  // namespace

TEST_CASE("eps = 0 robust risk equals the knapsack primal on a fine grid") {
  const SampleSpace interval = SampleSpace::ball(Vec::Zero(1), 2.0);
  RngStream rng(31);
  for (int k = 0; k < 10; ++k) {
    const double theta = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + 2.5 * rng.uniform());
    const LossModel model(logistic1(), Vec::Constant(1, theta));
    std::vector<double> xs;
    const int n = 1 + static_cast<int>(rng.next_u64() % 12);
    for (int i = 0; i < n; ++i) xs.push_back(-1.8 + 3.6 * rng.uniform());
    const double rho = 0.05 + 1.0 * rng.uniform();
    std::vector<double> grid, fg;
    for (int j = 0; j <= 8000; ++j) {
      grid.push_back(-2.0 + 4.0 * j / 8000.0);
      fg.push_back(model.value(Vec::Constant(1, grid.back())));
    }
    const double primal = wt::grid_primal_mckp(xs, grid, fg, rho);
    const RobustRiskResult r = robust_risk(model, interval, dataset_1d(xs), rho, 0.0, 1.0, McBudget{}, 1);
    // The continuous problem can only exceed its grid restriction, by O(h^2).
    CHECK(r.value >= primal - 1e-9);
    CHECK(r.value == doctest::Approx(primal).epsilon(1e-5));
    CHECK(r.lambda_star >= 0.0);
  }
}

TEST_CASE("radius zero gives the empirical mean; constant loss is invariant") {
  const SampleSpace interval = SampleSpace::ball(Vec::Zero(1), 2.0);
  const Dataset data = dataset_1d({-1.0, 0.25, 0.5, 1.5});
  const LossModel model(logistic1(), Vec::Constant(1, 1.3));
  const RobustRiskResult r0 = robust_risk(model, interval, data, 0.0, 0.0, 1.0, McBudget{}, 0);
  double mean = 0.0;
  for (Index i = 0; i < 4; ++i) mean += model.value(data.point(i)) / 4.0;
  CHECK(r0.value == doctest::Approx(mean).epsilon(1e-14));

  const LossModel constant(constant_family(3.25), Vec::Constant(1, 3.25));
  for (double rho : {0.0, 0.1, 1.0, 10.0}) {
    CHECK(robust_risk(constant, interval, data, rho, 0.0, 1.0, McBudget{}, 0).value == 3.25);
  }
  // Entropic: lambda* = 0 once rho^2 exceeds the reference transport cost.
  const RobustRiskResult re = robust_risk(constant, interval, data, 1.0, 0.05, 0.1, McBudget{}, 0);
  CHECK(re.value == doctest::Approx(3.25).epsilon(1e-12));
  CHECK(re.lambda_star == 0.0);
  CHECK_THROWS_AS(robust_risk(model, interval, data, 0.0, 0.1, 0.1, McBudget{}, 0), Error);
}

TEST_CASE("robust risk is nondecreasing in rho and bounded by max f") {
  const SampleSpace interval = SampleSpace::ball(Vec::Zero(1), 2.0);
  const Dataset data = dataset_1d({-1.2, -0.3, 0.1, 0.8});
  const LossModel model(logistic1(), Vec::Constant(1, 2.0));
  double previous = -1e300;
  for (double rho = 0.05; rho < 5.0; rho *= 1.6) {
    const double v = robust_risk(model, interval, data, rho, 0.0, 1.0, McBudget{}, 0).value;
    CHECK(v >= previous - 1e-10);
    CHECK(v <= model.value(Vec::Constant(1, 2.0)) + 1e-10);
    previous = v;
  }
}

TEST_CASE("training at rho = 0 recovers the logistic ERM") {
  RngStream rng(8);
  Dataset data;
  data.points.resize(2, 60);
  for (Index i = 0; i < 60; ++i) {
    Vec x(2);
    x << rng.normal() * 0.6, rng.normal() * 0.6;
    const double y = (x(0) - 0.5 * x(1) + 0.8 * rng.normal()) >= 0.0 ? 1.0 : -1.0;
    data.points.col(i) = -y * x;
  }
  const SampleSpace ball = SampleSpace::ball(Vec::Zero(2), 3.0);
  const auto family = logistic_family(2, ThetaSet::annulus(0.05, 20.0));
  OptBudget opt;
  opt.max_iters = 500;
  opt.tol = 1e-9;
  const TrainResult t = train_robust(family, ball, data, 0.0, 0.0, 1.0, Vec::Constant(2, 0.5), McBudget{}, opt, 0);
  const Vec erm = wt::logistic_erm_newton(data.points, Vec::Constant(2, 0.5));
  REQUIRE(erm.norm() > 0.05);
  REQUIRE(erm.norm() < 20.0);
  CHECK((t.theta - erm).norm() <= 1e-5 * std::max(1.0, erm.norm()));
  CHECK(t.converged);
}

TEST_CASE("lambda search converges to a stationary point of the dual") {
  const SampleSpace interval = SampleSpace::ball(Vec::Zero(1), 2.0);
  const Dataset data = dataset_1d({-1.2, -0.3, 0.1, 0.8, 1.1});
  const LossModel model(logistic1(), Vec::Constant(1, 1.5));
  McBudget budget;
  budget.samples_per_xi = 512;
  const double rho = 0.3;
  const RobustRiskResult r = robust_risk(model, interval, data, rho, 0.05, 0.2, budget, 3);
  REQUIRE(r.lambda_star > 0.0);
  DualObjective objective(model, interval, data, 0.05, 0.2, budget, 3);
  const double h = 1e-4 * r.lambda_star;
  const double left = objective.evaluate(r.lambda_star - h).objective(rho);
  const double right = objective.evaluate(r.lambda_star + h).objective(rho);
  CHECK(r.value <= left + 1e-12);
  CHECK(r.value <= right + 1e-12);
}

TEST_CASE("true risk of a constant loss is exact") {
  const SampleSpace interval = SampleSpace::ball(Vec::Zero(1), 2.0);
  const LossModel constant(constant_family(0.5), Vec::Constant(1, 0.5));
  Mat sample = Mat::Random(1, 100);
  RngStream rng(1);
  const RiskEstimate est = true_risk(constant, interval, sample, false, 0.1, rng);
  CHECK(est.value == 0.5);
  CHECK(est.stderr == 0.0);
}
