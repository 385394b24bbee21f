#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "wdro/errors.hpp"
#include "wdro/geometry.hpp"
#include "wdro/rng.hpp"

using namespace wdro;

TEST_CASE("ball projection, containment and diameter") {
  const SampleSpace ball = SampleSpace::ball(Vec::Constant(2, 1.0), 2.0);
  CHECK(ball.diameter() == doctest::Approx(4.0));
  CHECK(ball.margin() == doctest::Approx(0.2));  // default gamma = 0.1 radius
  Vec far(2);
  far << 5.0, 1.0;
  const Vec p = ball.project(far);
  CHECK(p(0) == doctest::Approx(3.0));
  CHECK(p(1) == doctest::Approx(1.0));
  CHECK(ball.contains(p, 1e-12));
  CHECK_FALSE(ball.contains(far));
  CHECK(ball.boundary_distance(ball.center()) == doctest::Approx(2.0));
  // Projection is idempotent for interior points.
  Vec inside(2);
  inside << 1.5, 0.5;
  CHECK((ball.project(inside) - inside).norm() == doctest::Approx(0.0));
}

TEST_CASE("box and ball_x_interval projections") {
  const SampleSpace box = SampleSpace::box(Vec::Constant(2, -1.0), Vec::Constant(2, 2.0));
  Vec x(2);
  x << -3.0, 0.5;
  const Vec p = box.project(x);
  CHECK(p(0) == doctest::Approx(-1.0));
  CHECK(p(1) == doctest::Approx(0.5));
  CHECK(box.diameter() == doctest::Approx(std::sqrt(18.0)));

  const SampleSpace cyl = SampleSpace::ball_x_interval(2, 1.0, 3.0);
  Vec z(3);
  z << 3.0, 4.0, -7.0;
  const Vec q = cyl.project(z);
  CHECK(q(0) == doctest::Approx(0.6));
  CHECK(q(1) == doctest::Approx(0.8));
  CHECK(q(2) == doctest::Approx(-3.0));
  CHECK(cyl.dims() == 3);
}

TEST_CASE("shrunk space keeps a gamma ball inside") {
  const SampleSpace ball = SampleSpace::ball(Vec::Zero(3), 2.0, 0.25);
  const SampleSpace inner = ball.shrunk(ball.margin());
  RngStream rng(11);
  for (int k = 0; k < 200; ++k) {
    const Vec x = inner.sample_uniform(rng);
    REQUIRE(inner.contains(x, 1e-12));
    CHECK(ball.boundary_distance(x) >= 0.25 - 1e-12);
  }
  CHECK_THROWS_AS(ball.shrunk(3.0), Error);
}

TEST_CASE("cost is half the squared distance") {
  Vec a(2), b(2);
  a << 0.0, 0.0;
  b << 3.0, 4.0;
  CHECK(cost(a, b) == doctest::Approx(12.5));
}

TEST_CASE("truncated reference sampler matches the truncated Gaussian mean") {
  // 1-D ball [-1, 1], centre near the boundary so truncation matters.
  const SampleSpace interval = SampleSpace::ball(Vec::Zero(1), 1.0);
  const double center = 0.8;
  const double sigma = 0.5;
  RngStream rng(5);
  const Index count = 40000;
  const Mat draws = sample_reference(interval, Vec::Constant(1, center), sigma, count, rng);
  REQUIRE(draws.cols() == count);
  CHECK(draws.minCoeff() >= -1.0);
  CHECK(draws.maxCoeff() <= 1.0);
  const double mean = draws.mean();
  const double expected = wdro::testing::truncated_normal_mean(center, sigma, -1.0, 1.0);
  const double sd = std::sqrt((draws.array() - mean).square().sum() / (count - 1));
  CHECK(std::abs(mean - expected) <= 4.0 * sd / std::sqrt(static_cast<double>(count)));
}

TEST_CASE("reference sampler reports stalls") {
  // Tiny sigma far outside the space: acceptance is essentially zero.
  const SampleSpace interval = SampleSpace::ball(Vec::Zero(1), 1.0);
  RngStream rng(1);
  CHECK_THROWS_AS(sample_reference(interval, Vec::Constant(1, 5.0), 0.1, 10, rng, 1e-2), Error);
}
