// Acceptance criteria 1-11. Prints one line per criterion:
//   criterion <k> PASS|FAIL <name>: <detail> (<seconds>s)
// Usage: wdro_acceptance [--criterion k]... [--configs DIR] [--cli PATH] [--out DIR]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "wdro/config.hpp"
#include "wdro/dual.hpp"
#include "wdro/dual_objective.hpp"
#include "wdro/harness.hpp"
#include "wdro/oracle.hpp"
#include "wdro/radius.hpp"
#include "wdro/risk.hpp"
#include "wdro/rng.hpp"

namespace fs = std::filesystem;
using namespace wdro;
namespace wt = wdro::testing;

namespace {

struct Settings {
  std::string configs = WDRO_CONFIG_DIR;
  std::string cli = WDRO_CLI_PATH;
  std::string out = "acceptance_out";
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

constexpr std::uint64_t kSeed = 20260101;

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

double uniform_in(RngStream& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }
double signed_in(RngStream& rng, double lo, double hi) {
  return (rng.uniform() < 0.5 ? -1.0 : 1.0) * uniform_in(rng, lo, hi);
}

Dataset random_data(const SampleSpace& space, Index n, RngStream& rng) {
  const SampleSpace inner = space.shrunk(space.margin());
  Dataset d;
  d.points.resize(space.dims(), n);
  for (Index i = 0; i < n; ++i) d.points.col(i) = inner.sample_uniform(rng);
  return d;
}

std::shared_ptr<const LossFamily> logistic(Index d) { return logistic_family(d, ThetaSet::annulus(0.05, 10.0)); }

// ---------------------------------------------------------------- 1
Outcome oracle_eps0() {
  RngStream rng = RngStream::derive(kSeed, StreamPurpose::generic, {1});
  double worst = 0.0;
  int failed = 0;
  for (int k = 0; k < 50; ++k) {
    const double radius = uniform_in(rng, 1.0, 3.0);
    const SampleSpace space = SampleSpace::ball(Vec::Zero(1), radius);
    const LossModel model(logistic(1), Vec::Constant(1, signed_in(rng, 0.3, 4.0)));
    const Dataset data = random_data(space, 1 + static_cast<Index>(rng.next_u64() % 20), rng);
    const double rho = uniform_in(rng, 0.02, 0.8) * radius;
    const double value = robust_risk(model, space, data, rho, 0.0, 1.0, McBudget{}, kSeed + k).value;
    const double exact = grid_dual_exact(model, data, rho, Grid::uniform_1d(space, 2001));
    const double err = std::abs(value - exact);
    worst = std::max(worst, err);
    failed += err <= 1e-3 ? 0 : 1;
  }
  return {failed == 0, fmt("%.0f/50 within 1e-3 of grid_dual_exact (max abs err %.3g)", 50 - failed, worst)};
}

// ---------------------------------------------------------------- 2
Outcome oracle_eps_pos() {
  RngStream rng = RngStream::derive(kSeed, StreamPurpose::generic, {2});
  McBudget budget;
  budget.samples_per_xi = 10000;
  const double lambdas[] = {0.1, 1.0, 10.0};
  int failed = 0;
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const double radius = uniform_in(rng, 1.0, 3.0);
    const SampleSpace space = SampleSpace::ball(Vec::Zero(1), radius);
    const LossModel model(logistic(1), Vec::Constant(1, signed_in(rng, 0.3, 3.0)));
    const Vec xi = Vec::Constant(1, uniform_in(rng, -0.9, 0.9) * radius);
    const DualParams params{lambdas[k % 3], uniform_in(rng, 0.05, 0.5), uniform_in(rng, 0.1, 0.6) * radius};
    const PhiEstimate mc = phi(model, space, xi, params, budget, rng);
    const double q = phi_quadrature(model, space, xi, params, 4000).phi;
    const double z = std::abs(mc.value - q) / mc.stderr;
    worst = std::max(worst, z);
    failed += z <= 3.0 ? 0 : 1;
  }
  return {failed == 0, fmt("%.0f/50 within 3 stderr of phi_quadrature (max |z| %.2f)", 50 - failed, worst)};
}

// ---------------------------------------------------------------- 3
Outcome laplace_sandwich() {
  RngStream rng = RngStream::derive(kSeed, StreamPurpose::generic, {3});
  McBudget budget;
  budget.samples_per_xi = 10000;
  int failed = 0;
  double worst = -1e300;  // max normalized violation
  for (int k = 0; k < 50; ++k) {
    const Index d = 1 + k % 2;
    const double radius = uniform_in(rng, 1.5, 3.0);
    const SampleSpace space = SampleSpace::ball(Vec::Zero(d), radius);  // gamma = 0.1 radius
    Vec theta(d);
    for (Index j = 0; j < d; ++j) theta(j) = signed_in(rng, 0.3, 2.0);
    const LossModel model(logistic(d), theta);
    const SampleSpace inner = space.shrunk(space.margin());
    const Vec xi = inner.sample_uniform(rng);
    const double sigma = uniform_in(rng, 0.3, 1.0) * space.margin() / 6.0;
    const double eps = uniform_in(rng, 0.01, 0.2);
    const double m = model.smoothness(space)->gradient_lipschitz;
    const double lambda = std::max(100.0 * eps / (sigma * sigma), 2.0 * m) * uniform_in(rng, 1.0, 3.0);
    const PhiEstimate est = phi(model, space, xi, {lambda, eps, sigma}, budget, rng);
    const double tol = 5.0 * est.stderr + 1e-3 * eps;
    const double lower = phi_laplace(model, space, xi, {lambda + m, eps, sigma}) - tol;
    const double upper = phi_laplace(model, space, xi, {lambda - m, eps, sigma}) + tol;
    const bool ok = lower <= est.value && est.value <= upper;
    worst = std::max(worst, std::max(lower - est.value, est.value - upper));
    failed += ok ? 0 : 1;
  }
  return {failed == 0, fmt("%.0f/50 inside [phi_bar(l+M) - tol, phi_bar(l-M) + tol] (max excess %.3g)",
                           50 - failed, worst)};
}

// ---------------------------------------------------------------- 4
Outcome convexity_monotonicity() {
  RngStream rng = RngStream::derive(kSeed, StreamPurpose::generic, {4});
  int failed = 0;
  int instances = 0;
  for (double eps_scale : {0.0, 1.0}) {
    for (int k = 0; k < 25; ++k) {
      ++instances;
      const Index d = 1 + k % 2;
      const SampleSpace space = SampleSpace::ball(Vec::Zero(d), uniform_in(rng, 1.0, 2.5));
      Vec theta(d);
      for (Index j = 0; j < d; ++j) theta(j) = signed_in(rng, 0.3, 3.0);
      const Dataset data = random_data(space, 5 + static_cast<Index>(rng.next_u64() % 10), rng);
      const double eps = eps_scale * uniform_in(rng, 0.02, 0.3);
      McBudget budget;
      budget.samples_per_xi = 512;
      DualObjective objective(LossModel(logistic(d), theta), space, data, eps, 0.3, budget, kSeed + k);
      const double rho = uniform_in(rng, 0.05, 0.8);
      std::vector<DualEval> evals;
      for (int j = 0; j <= 40; ++j) evals.push_back(objective.evaluate(0.05 * j * j / 4.0, true));
      bool ok = true;
      for (std::size_t j = 1; j < evals.size(); ++j) {
        // Nonincreasing generator (CRN).
        if (evals[j].mean_phi > evals[j - 1].mean_phi + 1e-12 * (1.0 + std::abs(evals[j - 1].mean_phi))) ok = false;
      }
      for (std::size_t j = 1; j + 1 < evals.size(); ++j) {
        // Second central differences on the (nonuniform) grid: divided differences.
        const double l0 = evals[j - 1].lambda, l1 = evals[j].lambda, l2 = evals[j + 1].lambda;
        const double s01 = (evals[j].objective(rho) - evals[j - 1].objective(rho)) / (l1 - l0);
        const double s12 = (evals[j + 1].objective(rho) - evals[j].objective(rho)) / (l2 - l1);
        const double se = evals[j - 1].stderr + 2.0 * evals[j].stderr + evals[j + 1].stderr;
        const double second = (s12 - s01) * (l1 - l0);  // scaled to an objective difference
        if (second < -3.0 * se - 1e-10 * (1.0 + std::abs(evals[j].objective(rho)))) ok = false;
      }
      failed += ok ? 0 : 1;
    }
  }
  return {failed == 0, fmt("%.0f/%.0f instances convex in lambda and nonincreasing in phi", instances - failed, instances)};
}

// ---------------------------------------------------------------- 5
Outcome gradient_checks() {
  RngStream rng = RngStream::derive(kSeed, StreamPurpose::generic, {5});
  int failed = 0;
  double worst_eps0 = 0.0, worst_eps = 0.0, worst_loss = 0.0;
  RiskOptions tight;
  tight.rel_tol = 1e-12;
  tight.value_tol = 1e-15;
  for (int k = 0; k < 20; ++k) {
    const Index d = 1 + k % 2;
    const SampleSpace space = SampleSpace::ball(Vec::Zero(d), uniform_in(rng, 1.0, 2.5));
    Vec theta(d);
    for (Index j = 0; j < d; ++j) theta(j) = signed_in(rng, 0.5, 2.5);
    const Dataset data = random_data(space, 5 + static_cast<Index>(rng.next_u64() % 10), rng);
    const double rho = uniform_in(rng, 0.1, 0.6);
    const auto family = logistic(d);
    for (double eps : {0.0, 0.1}) {
      McBudget budget;
      budget.samples_per_xi = 512;
      auto risk = [&](const Vec& t) {
        return robust_risk(LossModel(family, t), space, data, rho, eps, 0.3, budget, kSeed + k, tight).value;
      };
      const RobustRiskResult r = robust_risk(LossModel(family, theta), space, data, rho, eps, 0.3, budget, kSeed + k, tight);
      DualObjective objective(LossModel(family, theta), space, data, eps, 0.3, budget, kSeed + k);
      objective.evaluate(r.lambda_star);
      const Vec envelope = objective.envelope_grad_theta(r.lambda_star);
      const Vec fd = wt::central_difference(risk, theta, 1e-5);
      const double rel = (envelope - fd).norm() / fd.norm();
      if (eps == 0.0) {
        worst_eps0 = std::max(worst_eps0, rel);
        failed += rel <= 1e-4 ? 0 : 1;
      } else {
        worst_eps = std::max(worst_eps, rel);
        failed += rel <= 1e-3 ? 0 : 1;
      }
    }
    // Analytic loss gradients in theta and xi.
    const Vec xi = data.point(0);
    const Vec g_theta = LossModel(family, theta).grad_theta(xi);
    const Vec fd_theta = wt::central_difference([&](const Vec& t) { return family->value(t, xi); }, theta, 1e-5);
    const Vec g_xi = LossModel(family, theta).grad_xi(xi);
    const Vec fd_xi = wt::central_difference([&](const Vec& z) { return family->value(theta, z); }, xi, 1e-5);
    const double rel_loss = std::max((g_theta - fd_theta).norm() / fd_theta.norm(), (g_xi - fd_xi).norm() / fd_xi.norm());
    worst_loss = std::max(worst_loss, rel_loss);
    failed += rel_loss <= 1e-4 ? 0 : 1;
  }
  return {failed == 0, fmt("%.0f failures; max rel err envelope eps=0 %.2g, eps>0 %.2g, loss %.2g", failed,
                           worst_eps0, worst_eps, worst_loss)};
}

// ---------------------------------------------------------------- 6
Outcome degeneracy() {
  RngStream rng = RngStream::derive(kSeed, StreamPurpose::generic, {6});
  int failed = 0;
  double worst_gap = 0.0, worst_lambda = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Index d = 1 + k % 3;
    const SampleSpace space = SampleSpace::ball(Vec::Zero(d), uniform_in(rng, 1.0, 2.5));
    Vec theta(d);
    for (Index j = 0; j < d; ++j) theta(j) = signed_in(rng, 0.3, 3.0);
    const LossModel model(logistic(d), theta);
    const Dataset data = random_data(space, 3 + static_cast<Index>(rng.next_u64() % 20), rng);
    const DegeneracyReport probe = degenerate_check(model, space, data, 0.01, 1e-6);
    const double rho = std::sqrt(probe.transport_to_argmax + 0.01);
    const DegeneracyReport r = degenerate_check(model, space, data, rho, 1e-6);
    const double gap = std::abs(r.risk - r.max_f);
    worst_gap = std::max(worst_gap, gap);
    worst_lambda = std::max(worst_lambda, r.lambda_star);
    failed += (gap <= 1e-3 && r.lambda_star <= 1e-6) ? 0 : 1;
  }
  return {failed == 0, fmt("%.0f/20 with |R - max f| <= 1e-3 and lambda* <= 1e-6 (max gap %.2g, max lambda* %.2g)",
                           20 - failed, worst_gap, worst_lambda)};
}

// ---------------------------------------------------------------- 7
Outcome coverage(const Settings& s) {
  std::ostringstream detail;
  bool pass = true;
  for (const char* name : {"coverage_linreg", "coverage_logistic"}) {
    const ExperimentConfig cfg = ExperimentConfig::load((fs::path(s.configs) / (std::string(name) + ".json")).string());
    const CoverageReport report = run_coverage(cfg);
    write_coverage(report, (fs::path(s.out) / name).string());
    for (std::size_t g = 0; g < cfg.regimes().size(); ++g) {
      const CoverageAggregate* first = nullptr;
      const CoverageAggregate* last = nullptr;
      for (const CoverageAggregate& a : report.aggregates) {
        if (a.regime != static_cast<Index>(g)) continue;
        if (first == nullptr) first = &a;
        last = &a;
      }
      const bool ok = last->coverage >= 0.95 && first->coverage < last->coverage;
      pass = pass && ok;
      detail << name << (cfg.regimes()[g].eps0 > 0.0 ? "/regularized" : "/standard") << " "
             << first->coverage << "->" << last->coverage << (ok ? "" : " (fail)") << "; ";
    }
  }
  return {pass, detail.str() + "coverage at smallest->largest rho; need largest >= 0.95 and strictly increasing"};
}

// ---------------------------------------------------------------- 8
Outcome scaling(const Settings& s) {
  ExperimentConfig cfg = ExperimentConfig::load((fs::path(s.configs) / "scaling.json").string());
  const ScalingReport report = run_scaling(cfg);
  write_scaling(report, (fs::path(s.out) / "scaling").string());
  if (!report.fit_available) return {false, "fit unavailable (too many censored n)"};
  const bool pass = report.slope >= -0.70 && report.slope <= -0.30;
  return {pass, fmt("log-log slope %.3f (bootstrap 95%% [%.3f, %.3f]) over %.0f sample sizes; need [-0.70, -0.30]",
                    report.slope, report.slope_lo, report.slope_hi, static_cast<double>(report.fit_points))};
}

// ---------------------------------------------------------------- 9
Outcome sandwich(const Settings& s) {
  const ExperimentConfig cfg = ExperimentConfig::load((fs::path(s.configs) / "sandwich.json").string());
  const SandwichReport report = run_sandwich(cfg);
  write_sandwich(report, (fs::path(s.out) / "sandwich").string());
  bool exists = true;
  for (const SandwichRow& r : report.rows) exists = exists && !r.censored;
  bool decreasing = true;
  std::ostringstream gaps;
  for (std::size_t k = 0; k < report.median_gap.size(); ++k) {
    gaps << "n=" << report.median_gap[k].first << ":" << report.median_gap[k].second << " ";
    if (k > 0 && !(report.median_gap[k].second < report.median_gap[k - 1].second)) decreasing = false;
  }
  return {exists && decreasing, std::string(exists ? "rho_hat_n found for every (n, rho)" : "some rho_hat_n censored") +
                                    "; median gaps " + gaps.str() + (decreasing ? "(strictly decreasing)" : "(not decreasing)")};
}

// ---------------------------------------------------------------- 10
Outcome shift(const Settings& s) {
  const ExperimentConfig cfg = ExperimentConfig::load((fs::path(s.configs) / "shift.json").string());
  const ShiftReport report = run_shift(cfg);
  write_shift(report, (fs::path(s.out) / "shift").string());
  double in_budget = -1.0, over = -1.0;
  for (const ShiftSummary& sm : report.summary) {
    if (sm.fraction == 1.0) in_budget = sm.coverage;
    if (sm.fraction == 4.0) over = sm.coverage;
  }
  const bool pass = in_budget >= 0.90 && in_budget > over;
  return {pass, fmt("coverage at full budget %.3f, at 4x budget %.3f (rho_hat_n %.4f); need >= 0.90 and strictly greater",
                    in_budget, over, report.rho_hat_n)};
}

// ---------------------------------------------------------------- 11
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const Settings& s) {
  const std::string config = (fs::path(s.configs) / "smoke.json").string();
  const std::vector<std::string> commands{"coverage", "sandwich", "scaling", "shift", "eval-risk",
                                          "train", "critical-radius", "oracle-check"};
  int mismatched = 0;
  int files = 0;
  std::string bad;
  for (const std::string& cmd : commands) {
    std::vector<fs::path> dirs;
    for (int threads : {1, 3}) {
      const fs::path dir = fs::path(s.out) / "determinism" / (cmd + "_t" + std::to_string(threads));
      fs::remove_all(dir);
      const std::string line = "\"" + s.cli + "\" " + cmd + " --config \"" + config + "\" --out \"" +
                               dir.string() + "\" --threads " + std::to_string(threads) + " > \"" +
                               (dir.string() + ".stdout") + "\" 2>/dev/null";
      fs::create_directories(dir.parent_path());
      if (std::system(line.c_str()) != 0) return {false, cmd + " exited with a nonzero status"};
      dirs.push_back(dir);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      ++files;
      const fs::path other = dirs[1] / entry.path().filename();
      if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
        ++mismatched;
        bad += cmd + "/" + entry.path().filename().string() + " ";
      }
    }
  }
  return {mismatched == 0 && files > 0,
          fmt("%.0f CSV files compared across --threads 1 vs 3, %.0f differ", files, mismatched) +
              (bad.empty() ? "" : ": " + bad)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WDRO acceptance criteria"};
  Settings settings;
  std::vector<int> only;
  app.add_option("--criterion", only, "run only these criteria (1-11)")->check(CLI::Range(1, 11));
  app.add_option("--configs", settings.configs, "directory with experiment configs");
  app.add_option("--cli", settings.cli, "path to the wdro executable");
  app.add_option("--out", settings.out, "directory for experiment CSVs");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double max_seconds;  // runtime target on one core; 0 = none
  };
  const std::vector<Criterion> criteria{
      {"oracle equivalence (eps = 0)", oracle_eps0, 60.0},
      {"oracle equivalence (eps > 0)", oracle_eps_pos, 120.0},
      {"Laplace sandwich", laplace_sandwich, 0.0},
      {"convexity and monotonicity", convexity_monotonicity, 0.0},
      {"gradient checks", gradient_checks, 0.0},
      {"degeneracy identity", degeneracy, 0.0},
      {"coverage reproduction", [&] { return coverage(settings); }, 1800.0},
      {"radius scaling", [&] { return scaling(settings); }, 2700.0},
      {"sandwich bounds", [&] { return sandwich(settings); }, 0.0},
      {"shift robustness", [&] { return shift(settings); }, 0.0},
      {"determinism", [&] { return determinism(settings); }, 0.0},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && selected.count(id) == 0) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[k].run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double limit = criteria[k].max_seconds;
    if (limit > 0.0 && seconds > limit) {
      outcome.pass = false;
      outcome.detail += fmt("; runtime %.0fs exceeds the %.0fs target", seconds, limit);
    }
    std::printf("criterion %d %s %s: %s (%.1fs)\n", id, outcome.pass ? "PASS" : "FAIL", criteria[k].name,
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
    failures += outcome.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
