#include "wdro/stats.hpp"

#include <algorithm>
#include <cmath>

#include "wdro/errors.hpp"

namespace wdro {

double shifted_mean(ConstVecRef x) {
  require(x.size() > 0, "mean of an empty sample");
  const double x0 = x(0);
  return x0 + (x.array() - x0).sum() / static_cast<double>(x.size());
}

MeanStderr mean_stderr(ConstVecRef x) {
  MeanStderr out;
  out.mean = shifted_mean(x);
  const auto n = static_cast<double>(x.size());
  if (x.size() >= 2) {
    const double ss = (x.array() - out.mean).square().sum();
    out.stderr = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

std::pair<double, double> wilson_interval(Index successes, Index trials, double z) {
  require(trials > 0 && successes >= 0 && successes <= trials, "wilson_interval: bad counts");
  const auto n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::clamp(centre - half, 0.0, p), std::clamp(centre + half, p, 1.0)};
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), "quantile of an empty sample");
  require(q >= 0.0 && q <= 1.0, "quantile level must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto k = static_cast<std::size_t>(std::floor(h));
  if (k + 1 >= values.size()) return values.back();
  return values[k] + (h - static_cast<double>(k)) * (values[k + 1] - values[k]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

std::vector<double> isotonic_increasing(const std::vector<double>& values) {
  struct Block {
    double sum;
    double count;
  };
  std::vector<Block> blocks;
  for (double v : values) {
    blocks.push_back({v, 1.0});
    while (blocks.size() >= 2) {
      const Block& b = blocks.back();
      const Block& a = blocks[blocks.size() - 2];
      if (a.sum / a.count <= b.sum / b.count) break;
      const Block merged{a.sum + b.sum, a.count + b.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const Block& b : blocks) {
    for (int k = 0; k < static_cast<int>(b.count); ++k) out.push_back(b.sum / b.count);
  }
  return out;
}

LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "least squares: need >= 2 points");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0.0, "least squares: x values must not all coincide");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

}  // namespace wdro
