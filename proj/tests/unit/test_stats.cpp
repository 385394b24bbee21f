#include <cmath>
#include <vector>

#include "doctest.h"
#include "wdro/csv.hpp"
#include "wdro/stats.hpp"

using namespace wdro;

TEST_CASE("shifted mean is exact for constants") {
  Vec x = Vec::Constant(1000, 0.1);
  CHECK(shifted_mean(x) == 0.1);
  const MeanStderr ms = mean_stderr(Vec::LinSpaced(5, 1.0, 5.0));
  CHECK(ms.mean == doctest::Approx(3.0));
  CHECK(ms.stderr == doctest::Approx(std::sqrt(2.5 / 5.0)));
}

TEST_CASE("Wilson interval contains the point estimate") {
  const auto [lo, hi] = wilson_interval(8, 10);
  CHECK(lo == doctest::Approx(0.4901625).epsilon(1e-5));
  CHECK(hi == doctest::Approx(0.9433178).epsilon(1e-5));
  for (Index k = 0; k <= 20; ++k) {
    const auto [a, b] = wilson_interval(k, 20);
    const double p = static_cast<double>(k) / 20.0;
    CHECK(a <= p + 1e-15);
    CHECK(b >= p - 1e-15);
  }
}

TEST_CASE("quantile, median, isotonic regression, least squares") {
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.9) == doctest::Approx(4.6));
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  const std::vector<double> iso = isotonic_increasing({0.2, 0.6, 0.4, 0.9, 0.8, 1.0});
  const std::vector<double> expected{0.2, 0.5, 0.5, 0.85, 0.85, 1.0};
  for (std::size_t k = 0; k < iso.size(); ++k) CHECK(iso[k] == doctest::Approx(expected[k]));
  const LineFit fit = least_squares_line({0.0, 1.0, 2.0, 3.0}, {1.0, 3.0, 5.0, 7.0});
  CHECK(fit.slope == doctest::Approx(2.0));
  CHECK(fit.intercept == doctest::Approx(1.0));
}

TEST_CASE("csv numbers use nine significant digits") {
  CHECK(csv_number(1.0 / 3.0) == "0.333333333");
  CHECK(csv_number(static_cast<std::int64_t>(42)) == "42");
  CHECK(csv_number(std::numeric_limits<double>::infinity()) == "inf");
}
