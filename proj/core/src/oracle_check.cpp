#include <cmath>

#include "wdro/csv.hpp"
#include "wdro/errors.hpp"
#include "wdro/harness.hpp"
#include "wdro/oracle.hpp"

namespace wdro {

namespace {

double uniform_in(RngStream& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

double random_theta(RngStream& rng, double lo, double hi) {
  const double magnitude = uniform_in(rng, lo, hi);
  return rng.uniform() < 0.5 ? -magnitude : magnitude;
}

}  // namespace

std::vector<OracleCheckRow> run_oracle_check(std::uint64_t seed, Index instances) {
  require(instances >= 1, "oracle check: need at least one instance");
  std::vector<OracleCheckRow> rows;
  auto add = [&](const char* name, Index k, double reference, double estimate, double tol,
                 bool pass) { rows.push_back({name, k, reference, estimate, tol, pass}); };

  for (Index k = 0; k < instances; ++k) {
    RngStream rng = RngStream::derive(seed, StreamPurpose::generic, {0x0c, static_cast<std::uint64_t>(k)});
    // eps = 0: continuous dual vs exact grid dual.
    {
      const double radius = uniform_in(rng, 1.0, 3.0);
      const SampleSpace space = SampleSpace::ball(Vec::Zero(1), radius);
      const LossModel model(logistic_family(1, ThetaSet::annulus(0.1, 10.0)),
                            Vec::Constant(1, random_theta(rng, 0.5, 3.0)));
      const auto n = static_cast<Index>(1 + rng.next_u64() % 20);
      const SampleSpace inner = space.shrunk(space.margin());
      Dataset data;
      data.points.resize(1, n);
      for (Index i = 0; i < n; ++i) data.points.col(i) = inner.sample_uniform(rng);
      const double rho = uniform_in(rng, 0.02, 0.6) * radius;
      const RobustRiskResult r = robust_risk(model, space, data, rho, 0.0, 1.0, McBudget{}, seed + k);
      const double exact = grid_dual_exact(model, data, rho, Grid::uniform_1d(space, 2001));
      add("grid_dual_eps0", k, exact, r.value, 1e-3, std::abs(r.value - exact) <= 1e-3);
    }
    // eps > 0: Monte Carlo phi vs quadrature, and the Laplace sandwich.
    {
      const SampleSpace space = SampleSpace::ball(Vec::Zero(1), 2.0, 0.6);
      const LossModel model(logistic_family(1, ThetaSet::annulus(0.1, 10.0)),
                            Vec::Constant(1, random_theta(rng, 0.5, 2.0)));
      const Vec xi = Vec::Constant(1, uniform_in(rng, -1.4, 1.4));
      McBudget budget;
      budget.samples_per_xi = 10000;
      const double lambdas[] = {0.1, 1.0, 10.0};
      const double lambda = lambdas[k % 3];
      const DualParams params{lambda, uniform_in(rng, 0.05, 0.5), uniform_in(rng, 0.1, 0.5)};
      const PhiEstimate mc = phi(model, space, xi, params, budget, rng);
      const double quad = phi_quadrature(model, space, xi, params, 4000).phi;
      const double tol = 3.0 * mc.stderr;
      add("phi_quadrature", k, quad, mc.value, tol, std::abs(mc.value - quad) <= tol);

      // Large-lambda regime: lambda sigma^2 / eps >= 100 and sigma <= gamma / 6.
      const double m = model.smoothness(space)->gradient_lipschitz;
      const double sigma = 0.1;
      const double eps = uniform_in(rng, 0.01, 0.1);
      const double big = std::max(100.0 * eps / (sigma * sigma), m) + m;
      const DualParams lp{big, eps, sigma};
      const PhiEstimate at = phi(model, space, xi, lp, budget, rng);
      const double ltol = 5.0 * at.stderr + 1e-3 * eps;
      const double lower = phi_laplace(model, space, xi, {big + m, eps, sigma});
      const double upper = phi_laplace(model, space, xi, {big - m, eps, sigma});
      add("laplace_lower", k, lower, at.value, ltol, at.value >= lower - ltol);
      add("laplace_upper", k, upper, at.value, ltol, at.value <= upper + ltol);
    }
  }
  return rows;
}

void write_oracle_check(const std::vector<OracleCheckRow>& rows, const std::string& path) {
  CsvTable table({"check_name", "instance", "reference", "estimate", "tolerance", "pass"});
  for (const OracleCheckRow& r : rows) {
    table.add_row({r.check_name, csv_number(static_cast<std::int64_t>(r.instance)),
                   csv_number(r.reference), csv_number(r.estimate), csv_number(r.tolerance),
                   r.pass ? "1" : "0"});
  }
  table.write(path);
}

}  // namespace wdro
