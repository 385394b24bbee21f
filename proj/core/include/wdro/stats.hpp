#pragma once

#include <utility>
#include <vector>

#include "wdro/types.hpp"

namespace wdro {

/// Mean computed as x_0 + mean(x_i - x_0): exact for constant inputs.
double shifted_mean(ConstVecRef x);

struct MeanStderr {
  double mean = 0.0;
  double stderr = 0.0;  // sample standard deviation / sqrt(n); 0 for n < 2
};
MeanStderr mean_stderr(ConstVecRef x);

/// Wilson score interval for k successes out of n trials at normal quantile z.
std::pair<double, double> wilson_interval(Index successes, Index trials, double z = 1.959963984540054);

/// Linear-interpolated empirical quantile (type 7), q in [0, 1]; input need not be sorted.
double quantile(std::vector<double> values, double q);

double median(std::vector<double> values);

/// Nondecreasing least-squares fit (pool adjacent violators) with equal weights.
std::vector<double> isotonic_increasing(const std::vector<double>& values);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
/// Ordinary least squares y = intercept + slope * x; requires >= 2 distinct x.
LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace wdro
