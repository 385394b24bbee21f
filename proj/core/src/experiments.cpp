#include "wdro/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "wdro/csv.hpp"
#include "wdro/errors.hpp"
#include "wdro/parallel.hpp"
#include "wdro/risk.hpp"
#include "wdro/stats.hpp"

namespace wdro {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

// Stream keys distinguishing the experiments that share a seed.
enum : std::uint64_t { kCoverageKey = 1, kSandwichKey = 2, kShiftKey = 4 };

std::string status_of(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return to_string(err->code());
  return "error";
}

std::vector<Index> replicate_indices(const ExperimentConfig& config, const RunOptions& options) {
  if (options.replay) {
    require(*options.replay >= 0 && *options.replay < config.experiment.replicates,
            "replay: replicate index out of range");
    return {*options.replay};
  }
  std::vector<Index> all(static_cast<std::size_t>(config.experiment.replicates));
  std::iota(all.begin(), all.end(), Index{0});
  return all;
}

/// Shared pieces of one experiment: P, the loss family and the reference sample.
struct Context {
  const ExperimentConfig& config;
  SampleSpace space;
  std::shared_ptr<const LossFamily> family;
  Vec theta_init;
  Mat reference;  // N_true draws from P standing in for the population

  Context(const ExperimentConfig& cfg, Index reference_count)
      : config(cfg),
        space(cfg.space.build()),
        family(cfg.model.build_family(space)),
        theta_init(cfg.model.initial_theta(*family)) {
    if (reference_count > 0) reference = draw_reference_sample(cfg, reference_count);
  }
};

/// Empirical risk minimizer (rho = 0, eps = 0 robust training) used as warm start.
Vec erm_theta(const Context& ctx, const Dataset& data, std::uint64_t seed) {
  const TrainResult erm = train_robust(ctx.family, ctx.space, data, 0.0, 0.0, 1.0, ctx.theta_init,
                                       ctx.config.mc, ctx.config.opt, seed);
  return erm.theta;
}

/// One coverage comparison at (regime, rho) for a replicate dataset.
CoverageRow coverage_point(const Context& ctx, const Dataset& data, const Vec& theta_start,
                           Index regime_index, const Regime& regime, Index rho_index, double rho,
                           Index replicate, std::uint64_t experiment_key) {
  const ExperimentConfig& cfg = ctx.config;
  CoverageRow row;
  row.regime = regime_index;
  row.eps0 = regime.eps0;
  row.sigma0 = regime.sigma0;
  row.n = data.size();
  row.rho = rho;
  row.eps = regime.eps0 * rho;
  row.sigma = regime.sigma0 * rho;
  row.replicate = replicate;
  row.seed = derive_seed(cfg.experiment.seed,
                         {experiment_key, static_cast<std::uint64_t>(replicate),
                          static_cast<std::uint64_t>(regime_index),
                          static_cast<std::uint64_t>(rho_index),
                          static_cast<std::uint64_t>(data.size())});
  try {
    if (cfg.experiment.train) {
      const TrainResult tr = train_robust(ctx.family, ctx.space, data, rho, row.eps, row.sigma,
                                          theta_start, cfg.mc, cfg.opt, row.seed);
      row.theta = tr.theta;
      row.robust_risk = tr.risk.value;
      row.robust_stderr = tr.risk.stderr;
      row.lambda_star = tr.risk.lambda_star;
      row.degenerate = tr.risk.degenerate;
      row.train_converged = tr.converged;
      row.train_iters = tr.iterations;
    } else {
      row.theta = theta_start;
      const RobustRiskResult r = robust_risk(LossModel(ctx.family, theta_start), ctx.space, data,
                                             rho, row.eps, row.sigma, cfg.mc, row.seed);
      row.robust_risk = r.value;
      row.robust_stderr = r.stderr;
      row.lambda_star = r.lambda_star;
      row.degenerate = r.degenerate;
      row.train_converged = true;
    }
    const LossModel model(ctx.family, row.theta);
    RngStream plain_rng(row.seed);
    const RiskEstimate plain = true_risk(model, ctx.space, ctx.reference, false, 1.0, plain_rng);
    row.unsmoothed_true_risk = plain.value;
    row.unsmoothed_true_stderr = plain.stderr;
    RiskEstimate target = plain;
    if (row.eps > 0.0 && cfg.experiment.smoothed_target) {
      RngStream rng = RngStream::derive(row.seed, StreamPurpose::smoothing);
      target = true_risk(model, ctx.space, ctx.reference, true, row.sigma, rng);
    }
    row.true_risk = target.value;
    row.true_stderr = target.stderr;
    row.slack = cfg.experiment.stderr_slack *
                std::hypot(row.robust_stderr, row.true_stderr);
    row.covered = row.robust_risk >= row.true_risk - row.slack ? 1 : 0;
    row.status = "ok";
  } catch (const std::exception& e) {
    row.status = status_of(e);
    row.robust_risk = row.robust_stderr = row.true_risk = row.true_stderr = kNaN;
    row.unsmoothed_true_risk = row.unsmoothed_true_stderr = row.slack = row.lambda_star = kNaN;
    row.covered = 0;
  }
  return row;
}

/// All (regime, rho) rows of one replicate, warm-starting each rho from the
/// previous one (ascending grid) and the first from the ERM solution.
std::vector<CoverageRow> coverage_replicate(const Context& ctx, Index replicate, Index n,
                                            const std::vector<Regime>& regimes,
                                            std::uint64_t experiment_key) {
  const ExperimentConfig& cfg = ctx.config;
  std::vector<CoverageRow> rows;
  Dataset data;
  Vec erm;
  std::string setup_status;
  try {
    data = generate_dataset(cfg, replicate, n);
    erm = cfg.experiment.train
              ? erm_theta(ctx, data,
                          derive_seed(cfg.experiment.seed,
                                      {experiment_key, static_cast<std::uint64_t>(replicate),
                                       static_cast<std::uint64_t>(n), 0xe7}))
              : ctx.theta_init;
  } catch (const std::exception& e) {
    setup_status = status_of(e);
  }
  for (std::size_t g = 0; g < regimes.size(); ++g) {
    Vec start = erm;
    for (std::size_t k = 0; k < cfg.experiment.rho_grid.size(); ++k) {
      const double rho = cfg.experiment.rho_grid[k];
      if (!setup_status.empty()) {
        CoverageRow row;
        row.regime = static_cast<Index>(g);
        row.eps0 = regimes[g].eps0;
        row.sigma0 = regimes[g].sigma0;
        row.n = n;
        row.rho = rho;
        row.eps = regimes[g].eps0 * rho;
        row.sigma = regimes[g].sigma0 * rho;
        row.replicate = replicate;
        row.status = setup_status;
        row.robust_risk = row.robust_stderr = row.true_risk = row.true_stderr = kNaN;
        row.unsmoothed_true_risk = row.unsmoothed_true_stderr = row.slack = kNaN;
        row.lambda_star = kNaN;
        rows.push_back(row);
        continue;
      }
      CoverageRow row = coverage_point(ctx, data, start, static_cast<Index>(g), regimes[g],
                                       static_cast<Index>(k), rho, replicate, experiment_key);
      if (row.status == "ok" && cfg.experiment.train) start = row.theta;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

/// Runs coverage_replicate for every replicate on the thread pool and returns
/// the rows sorted by (regime, rho index, replicate).
std::vector<CoverageRow> coverage_rows(const Context& ctx, Index n,
                                       const std::vector<Regime>& regimes,
                                       const std::vector<Index>& replicates, int threads,
                                       std::uint64_t experiment_key) {
  std::vector<std::vector<CoverageRow>> per_rep(replicates.size());
  parallel_for(replicates.size(), threads, [&](std::size_t k) {
    per_rep[k] = coverage_replicate(ctx, replicates[k], n, regimes, experiment_key);
  });
  std::vector<CoverageRow> rows;
  const std::size_t grid = ctx.config.experiment.rho_grid.size();
  for (std::size_t g = 0; g < regimes.size(); ++g) {
    for (std::size_t k = 0; k < grid; ++k) {
      for (const auto& rep : per_rep) rows.push_back(rep[g * grid + k]);
    }
  }
  return rows;
}

std::vector<CoverageAggregate> aggregate(const std::vector<CoverageRow>& rows) {
  std::vector<CoverageAggregate> out;
  for (const CoverageRow& row : rows) {
    if (out.empty() || out.back().regime != row.regime || out.back().rho != row.rho ||
        out.back().n != row.n) {
      CoverageAggregate a;
      a.regime = row.regime;
      a.eps0 = row.eps0;
      a.sigma0 = row.sigma0;
      a.n = row.n;
      a.rho = row.rho;
      a.eps = row.eps;
      a.sigma = row.sigma;
      out.push_back(a);
    }
    CoverageAggregate& a = out.back();
    ++a.replicates;
    if (row.status == "ok") {
      ++a.ok;
      a.covered += row.covered;
    }
  }
  for (CoverageAggregate& a : out) {
    if (a.ok > 0) {
      a.coverage = static_cast<double>(a.covered) / static_cast<double>(a.ok);
      std::tie(a.wilson_lo, a.wilson_hi) = wilson_interval(a.covered, a.ok);
    }
  }
  return out;
}

std::string join_theta(const Vec& theta) {
  std::string out;
  for (Index j = 0; j < theta.size(); ++j) {
    if (j > 0) out += ';';
    out += csv_number(theta(j));
  }
  return out;
}

std::string num(double v) { return csv_number(v); }
std::string num(Index v) { return csv_number(static_cast<std::int64_t>(v)); }
std::string num(int v) { return csv_number(static_cast<std::int64_t>(v)); }
std::string num(std::uint64_t v) { return csv_number(v); }
std::string flag(bool v) { return v ? "1" : "0"; }

std::string join_path(const std::string& dir, const std::string& file) {
  return dir.empty() ? file : dir + "/" + file;
}

/// First grid rho whose isotonic-smoothed coverage reaches `target`.
std::optional<double> first_reaching(const std::vector<double>& rhos,
                                     const std::vector<double>& coverage, double target,
                                     std::vector<double>* smoothed_out = nullptr) {
  const std::vector<double> smooth = isotonic_increasing(coverage);
  if (smoothed_out != nullptr) *smoothed_out = smooth;
  for (std::size_t k = 0; k < rhos.size(); ++k) {
    if (smooth[k] >= target - 1e-12) return rhos[k];
  }
  return std::nullopt;
}

/// Nonincreasing least-squares smoothing of a sequence.
std::vector<double> isotonic_decreasing(const std::vector<double>& values) {
  std::vector<double> neg(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) neg[k] = -values[k];
  std::vector<double> fit = isotonic_increasing(neg);
  for (double& v : fit) v = -v;
  return fit;
}

}  // namespace

// ================================================================ coverage

CoverageReport run_coverage(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const Context ctx(config, config.experiment.true_risk_samples);
  CoverageReport report;
  report.rows = coverage_rows(ctx, config.data.n, config.regimes(),
                              replicate_indices(config, options), options.threads, kCoverageKey);
  report.aggregates = aggregate(report.rows);
  return report;
}

void write_coverage(const CoverageReport& report, const std::string& out_dir,
                    const std::string& stem) {
  CsvTable main({"rho", "eps", "sigma", "replicate", "robust_risk", "robust_stderr", "true_risk",
                 "true_stderr", "covered", "status"});
  CsvTable aux({"rho", "eps", "sigma", "replicate", "seed", "lambda_star", "degenerate",
                "train_converged", "train_iters", "unsmoothed_true_risk",
                "unsmoothed_true_stderr", "slack", "theta", "status"});
  for (const CoverageRow& r : report.rows) {
    main.add_row({num(r.rho), num(r.eps), num(r.sigma), num(r.replicate), num(r.robust_risk),
                  num(r.robust_stderr), num(r.true_risk), num(r.true_stderr), num(r.covered),
                  r.status});
    aux.add_row({num(r.rho), num(r.eps), num(r.sigma), num(r.replicate), num(r.seed),
                 num(r.lambda_star), flag(r.degenerate), flag(r.train_converged),
                 num(r.train_iters), num(r.unsmoothed_true_risk), num(r.unsmoothed_true_stderr),
                 num(r.slack), join_theta(r.theta), r.status});
  }
  CsvTable summary({"eps0", "sigma0", "rho", "eps", "sigma", "replicates", "ok", "covered",
                    "coverage", "wilson_lo", "wilson_hi"});
  for (const CoverageAggregate& a : report.aggregates) {
    summary.add_row({num(a.eps0), num(a.sigma0), num(a.rho), num(a.eps), num(a.sigma),
                     num(a.replicates), num(a.ok), num(a.covered), num(a.coverage),
                     num(a.wilson_lo), num(a.wilson_hi)});
  }
  main.write(join_path(out_dir, stem + ".csv"));
  aux.write(join_path(out_dir, stem + "_aux.csv"));
  summary.write(join_path(out_dir, stem + "_summary.csv"));
}

// ================================================================ scaling

std::optional<double> estimate_rho_star(const ExperimentConfig& config, Index n,
                                        const RunOptions& options) {
  config.validate();
  const Context ctx(config, config.experiment.true_risk_samples);
  const std::vector<CoverageRow> rows =
      coverage_rows(ctx, n, {config.regimes().front()}, replicate_indices(config, options),
                    options.threads, kCoverageKey);
  const std::vector<CoverageAggregate> agg = aggregate(rows);
  std::vector<double> cov;
  for (const CoverageAggregate& a : agg) cov.push_back(a.coverage);
  return first_reaching(config.experiment.rho_grid, cov, config.experiment.coverage_target);
}

ScalingReport run_scaling(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const Context ctx(config, config.experiment.true_risk_samples);
  const std::vector<Index> ns = config.n_grid();
  const std::vector<Index> reps = replicate_indices(config, options);
  const std::vector<double>& rhos = config.experiment.rho_grid;
  const double target = config.experiment.coverage_target;
  const Regime regime = config.regimes().front();

  ScalingReport report;
  // covered[n index][rho index][replicate slot]; -1 marks failed rows.
  std::vector<std::vector<std::vector<int>>> covered(ns.size());
  for (std::size_t a = 0; a < ns.size(); ++a) {
    const std::vector<CoverageRow> rows =
        coverage_rows(ctx, ns[a], {regime}, reps, options.threads, kCoverageKey);
    covered[a].assign(rhos.size(), std::vector<int>(reps.size(), -1));
    for (std::size_t k = 0; k < rhos.size(); ++k) {
      for (std::size_t r = 0; r < reps.size(); ++r) {
        const CoverageRow& row = rows[k * reps.size() + r];
        if (row.status == "ok") covered[a][k][r] = row.covered;
      }
    }
    const std::vector<CoverageAggregate> agg = aggregate(rows);
    std::vector<double> cov;
    for (const CoverageAggregate& x : agg) cov.push_back(x.coverage);
    std::vector<double> smooth;
    const std::optional<double> star = first_reaching(rhos, cov, target, &smooth);
    for (std::size_t k = 0; k < agg.size(); ++k) {
      CoverageAggregate x = agg[k];
      report.raw_coverage.push_back(x.coverage);
      x.coverage = smooth[k];
      report.coverage.push_back(x);
    }
    ScalingPoint p;
    p.n = ns[a];
    p.censored = !star.has_value();
    p.rho_star_raw = star.value_or(kInf);
    report.points.push_back(p);
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }

  // Monotone smoothing across n of the uncensored rho*, then the log-log fit.
  auto fit_points = [&](const std::vector<ScalingPoint>& pts, std::vector<double>& xs,
                        std::vector<double>& ys) {
    xs.clear();
    ys.clear();
    for (const ScalingPoint& p : pts) {
      if (p.censored) continue;
      xs.push_back(std::log(static_cast<double>(p.n)));
      ys.push_back(std::log(p.rho_star));
    }
  };
  auto smooth_in_n = [](std::vector<ScalingPoint>& pts) {
    std::vector<double> vals;
    for (const ScalingPoint& p : pts) {
      if (!p.censored) vals.push_back(p.rho_star_raw);
    }
    const std::vector<double> fit = isotonic_decreasing(vals);
    std::size_t j = 0;
    for (ScalingPoint& p : pts) p.rho_star = p.censored ? kInf : fit[j++];
  };
  smooth_in_n(report.points);
  std::vector<double> xs;
  std::vector<double> ys;
  fit_points(report.points, xs, ys);
  report.fit_points = static_cast<Index>(xs.size());
  const bool distinct_x = xs.size() >= 2;
  if (distinct_x) {
    const LineFit fit = least_squares_line(xs, ys);
    report.fit_available = true;
    report.slope = fit.slope;
    report.intercept = fit.intercept;
  }

  // Percentile bootstrap over replicates (resampled independently per n).
  report.slope_lo = report.slope_hi = report.fit_available ? report.slope : kNaN;
  if (report.fit_available && config.experiment.bootstrap > 0 && reps.size() > 1) {
    RngStream rng = RngStream::derive(config.experiment.seed, StreamPurpose::bootstrap);
    std::vector<double> slopes;
    for (Index b = 0; b < config.experiment.bootstrap; ++b) {
      std::vector<ScalingPoint> pts;
      for (std::size_t a = 0; a < ns.size(); ++a) {
        std::vector<std::size_t> pick(reps.size());
        for (std::size_t& s : pick) s = static_cast<std::size_t>(rng.next_u64() % reps.size());
        std::vector<double> cov(rhos.size(), 0.0);
        for (std::size_t k = 0; k < rhos.size(); ++k) {
          Index ok = 0;
          Index hit = 0;
          for (std::size_t s : pick) {
            if (covered[a][k][s] < 0) continue;
            ++ok;
            hit += covered[a][k][s];
          }
          cov[k] = ok > 0 ? static_cast<double>(hit) / static_cast<double>(ok) : 0.0;
        }
        const std::optional<double> star = first_reaching(rhos, cov, target);
        ScalingPoint p;
        p.n = ns[a];
        p.censored = !star.has_value();
        p.rho_star_raw = star.value_or(kInf);
        pts.push_back(p);
      }
      smooth_in_n(pts);
      std::vector<double> bx;
      std::vector<double> by;
      fit_points(pts, bx, by);
      if (bx.size() >= 2) slopes.push_back(least_squares_line(bx, by).slope);
    }
    if (!slopes.empty()) {
      report.slope_lo = quantile(slopes, 0.025);
      report.slope_hi = quantile(slopes, 0.975);
    }
  }
  return report;
}

void write_scaling(const ScalingReport& report, const std::string& out_dir,
                   const std::string& stem) {
  CsvTable main({"n", "rho_star", "censored"});
  for (const ScalingPoint& p : report.points) {
    main.add_row({num(p.n), num(p.rho_star), flag(p.censored)});
  }
  CsvTable fit({"fit_available", "slope", "intercept", "slope_lo", "slope_hi", "fit_points"});
  fit.add_row({flag(report.fit_available), num(report.slope), num(report.intercept),
               num(report.slope_lo), num(report.slope_hi), num(report.fit_points)});
  CsvTable cov({"n", "rho", "replicates", "ok", "covered", "coverage", "smoothed_coverage",
                "wilson_lo", "wilson_hi", "rho_star_raw"});
  for (std::size_t k = 0; k < report.coverage.size(); ++k) {
    const CoverageAggregate& a = report.coverage[k];
    double raw_star = kNaN;
    for (const ScalingPoint& p : report.points) {
      if (p.n == a.n) raw_star = p.rho_star_raw;
    }
    cov.add_row({num(a.n), num(a.rho), num(a.replicates), num(a.ok), num(a.covered),
                 num(report.raw_coverage[k]), num(a.coverage), num(a.wilson_lo),
                 num(a.wilson_hi), num(raw_star)});
  }
  CsvTable rows({"n", "rho", "replicate", "seed", "robust_risk", "true_risk", "covered", "status"});
  for (const CoverageRow& r : report.rows) {
    rows.add_row({num(r.n), num(r.rho), num(r.replicate), num(r.seed), num(r.robust_risk),
                  num(r.true_risk), num(r.covered), r.status});
  }
  main.write(join_path(out_dir, stem + ".csv"));
  fit.write(join_path(out_dir, stem + "_fit.csv"));
  cov.write(join_path(out_dir, stem + "_coverage.csv"));
  rows.write(join_path(out_dir, stem + "_rows.csv"));
}

// ================================================================ sandwich

namespace {

/// Robust risk of the population stand-in as a function of the squared radius s.
struct RiskCurve {
  std::vector<double> s;
  std::vector<double> risk;  // nondecreasing (cumulative max of the computed values)

  double at(double x) const {
    if (x <= s.front()) return risk.front();
    if (x >= s.back()) return risk.back();
    const auto k = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), x) - s.begin());
    const double w = (x - s[k - 1]) / (s[k] - s[k - 1]);
    return risk[k - 1] + w * (risk[k] - risk[k - 1]);
  }
  /// Smallest s with risk(s) >= v; +inf when v exceeds the curve.
  double lower_inverse(double v) const {
    if (v <= risk.front()) return s.front();
    for (std::size_t k = 1; k < s.size(); ++k) {
      if (risk[k] >= v) {
        const double span = risk[k] - risk[k - 1];
        const double w = span > 0.0 ? (v - risk[k - 1]) / span : 1.0;
        return s[k - 1] + w * (s[k] - s[k - 1]);
      }
    }
    return kInf;
  }
  /// Largest s with risk(s) <= v; -inf when v is below the curve.
  double upper_inverse(double v) const {
    if (v < risk.front()) return -kInf;
    for (std::size_t k = s.size() - 1; k > 0; --k) {
      if (risk[k - 1] <= v) {
        if (risk[k] <= v) return s[k];
        const double span = risk[k] - risk[k - 1];
        const double w = (v - risk[k - 1]) / span;
        return s[k - 1] + w * (s[k] - s[k - 1]);
      }
    }
    return s.front();
  }
};

}  // namespace

SandwichReport run_sandwich(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const Context ctx(config, 0);
  const ExperimentSettings& ex = config.experiment;
  const std::vector<Index> ns = config.n_grid();
  const std::vector<Index> reps = replicate_indices(config, options);
  const Regime regime = config.regimes().front();
  const LossModel model(ctx.family, ctx.theta_init);
  const Dataset reference{draw_reference_sample(config, ex.reference_n, StreamPurpose::sandwich)};

  SandwichReport report;
  for (std::size_t k = 0; k < ex.rho_grid.size(); ++k) {
    const double rho = ex.rho_grid[k];
    const double eps = regime.eps0 * rho;
    const double sigma = regime.sigma0 * rho;
    const std::uint64_t key = derive_seed(ex.seed, {kSandwichKey, static_cast<std::uint64_t>(k)});

    // Reference curve on s in [0, 25 rho^2], denser near 0 (t up to 24 rho).
    RiskCurve curve;
    {
      DualObjective objective(model, ctx.space, reference, eps, sigma, config.mc, key);
      const Index m = ex.curve_points;
      double curve_lambda = 0.0;  // warm start: lambda* decreases along the curve
      for (Index j = 0; j < m; ++j) {
        const double u = static_cast<double>(j) / static_cast<double>(m - 1);
        double s = 25.0 * rho * rho * u * u;
        if (eps > 0.0 && j == 0) s = 1e-4 * rho * rho;  // rho = 0 is ill-posed when eps > 0
        RiskOptions curve_options;
        if (j > 0 && curve_lambda > 0.0) curve_options.lambda_hint = curve_lambda;
        const RobustRiskResult r = minimize_dual(objective, std::sqrt(s), curve_options);
        curve_lambda = r.lambda_star;
        curve.s.push_back(s);
        const double value = curve.risk.empty() ? r.value : std::max(r.value, curve.risk.back());
        curve.risk.push_back(value);
      }
    }

    for (Index n : ns) {
      std::vector<SandwichReplicate> rows(reps.size());
      parallel_for(reps.size(), options.threads, [&](std::size_t slot) {
        SandwichReplicate& row = rows[slot];
        row.n = n;
        row.rho = rho;
        row.replicate = reps[slot];
        row.seed = derive_seed(ex.seed, {kSandwichKey, static_cast<std::uint64_t>(reps[slot]),
                                         static_cast<std::uint64_t>(k),
                                         static_cast<std::uint64_t>(n)});
        try {
          const Dataset data = generate_dataset(config, reps[slot], n);
          const RobustRiskResult r =
              robust_risk(model, ctx.space, data, rho, eps, sigma, config.mc, row.seed);
          row.empirical_risk = r.value;
          // Upper side: rho (rho + t) >= smallest s with R(s) >= v.
          const double s_up = curve.lower_inverse(r.value);
          const double t_up = std::isinf(s_up) ? kInf : std::max(0.0, s_up / rho - rho);
          // Lower side: rho (rho - t) <= largest s with R(s) <= v; an empty ball
          // (t >= rho) makes the lower bound vacuous.
          const double s_lo = curve.upper_inverse(r.value);
          const double t_lo = s_lo == -kInf ? rho : std::max(0.0, rho - s_lo / rho);
          row.required_t = std::max(t_up, t_lo);
        } catch (const std::exception& e) {
          row.status = status_of(e);
          row.empirical_risk = row.required_t = kNaN;
        }
      });

      SandwichRow out;
      out.n = n;
      out.rho = rho;
      out.eps = eps;
      out.sigma = sigma;
      std::vector<double> needed;
      Index lower_bad = 0;
      Index upper_bad = 0;
      const double r0 = curve.at(rho * rho);
      for (const SandwichReplicate& row : rows) {
        if (row.status != "ok") {
          needed.push_back(kInf);
          continue;
        }
        needed.push_back(row.required_t);
        if (r0 > row.empirical_risk) ++lower_bad;
        if (row.empirical_risk > r0) ++upper_bad;
      }
      const auto total = static_cast<double>(rows.size());
      out.lower_violation = static_cast<double>(lower_bad) / total;
      out.upper_violation = static_cast<double>(upper_bad) / total;
      // Smallest t satisfying both inequalities on >= level of replicates.
      std::sort(needed.begin(), needed.end());
      const auto need = static_cast<std::size_t>(std::ceil(ex.sandwich_level * total - 1e-9));
      out.rho_hat_n = needed[std::max<std::size_t>(need, 1) - 1];
      out.censored = std::isinf(out.rho_hat_n);
      if (!out.censored) {
        const double hi = curve.at(rho * (rho + out.rho_hat_n));
        const double lo_s = rho * (rho - out.rho_hat_n);
        const double lo = lo_s < 0.0 ? curve.risk.front() : curve.at(lo_s);
        out.gap = hi - lo;
      } else {
        out.gap = kInf;
      }
      report.rows.push_back(out);
      report.replicates.insert(report.replicates.end(), rows.begin(), rows.end());
    }
  }
  // Rows were produced per rho; order them by (n, rho) for reporting.
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const SandwichRow& a, const SandwichRow& b) { return a.n < b.n; });
  std::stable_sort(report.replicates.begin(), report.replicates.end(),
                   [](const SandwichReplicate& a, const SandwichReplicate& b) { return a.n < b.n; });
  for (Index n : ns) {
    std::vector<double> gaps;
    for (const SandwichRow& r : report.rows) {
      if (r.n == n) gaps.push_back(r.gap);
    }
    report.median_gap.emplace_back(n, median(gaps));
  }
  return report;
}

void write_sandwich(const SandwichReport& report, const std::string& out_dir,
                    const std::string& stem) {
  CsvTable main({"n", "rho", "eps", "sigma", "rho_hat_n", "censored", "lower_violation",
                 "upper_violation", "gap"});
  for (const SandwichRow& r : report.rows) {
    main.add_row({num(r.n), num(r.rho), num(r.eps), num(r.sigma), num(r.rho_hat_n),
                  flag(r.censored), num(r.lower_violation), num(r.upper_violation), num(r.gap)});
  }
  CsvTable reps({"n", "rho", "replicate", "seed", "empirical_risk", "required_t", "status"});
  for (const SandwichReplicate& r : report.replicates) {
    reps.add_row({num(r.n), num(r.rho), num(r.replicate), num(r.seed), num(r.empirical_risk),
                  num(r.required_t), r.status});
  }
  CsvTable gaps({"n", "median_gap"});
  for (const auto& [n, gap] : report.median_gap) gaps.add_row({num(n), num(gap)});
  main.write(join_path(out_dir, stem + ".csv"));
  reps.write(join_path(out_dir, stem + "_replicates.csv"));
  gaps.write(join_path(out_dir, stem + "_summary.csv"));
}

// ================================================================ shift

namespace {

/// Largest representable t with t^2 / 2 <= budget (the translation coupling bound).
double certified_shift(double budget) {
  double t = std::sqrt(2.0 * budget);
  while (0.5 * t * t > budget) t = std::nextafter(t, 0.0);
  return t;
}

}  // namespace

ShiftReport run_shift(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const ExperimentSettings& ex = config.experiment;
  const Context ctx(config, ex.true_risk_samples);
  const Regime regime = config.regimes().front();
  ShiftReport report;
  report.rho = config.wdro.rho;
  report.eps = regime.eps0 * report.rho;
  report.sigma = regime.sigma0 * report.rho;
  if (ex.rho_hat_n) {
    report.rho_hat_n = *ex.rho_hat_n;
  } else {
    RunOptions all = options;
    all.replay.reset();
    const std::optional<double> star = estimate_rho_star(config, config.data.n, all);
    if (!star) fail(ErrorCode::invalid_argument, "shift: rho_hat_n is censored on rho_grid");
    report.rho_hat_n = *star;
  }
  report.full_budget = report.rho * (report.rho - report.rho_hat_n);
  require(report.full_budget > 0.0, "shift: wdro.rho must exceed rho_hat_n");

  const std::vector<Index> reps = replicate_indices(config, options);
  std::vector<std::vector<ShiftRow>> per_rep(reps.size());
  parallel_for(reps.size(), options.threads, [&](std::size_t slot) {
    const Index replicate = reps[slot];
    const std::uint64_t seed = derive_seed(
        ex.seed, {kShiftKey, static_cast<std::uint64_t>(replicate)});
    std::vector<ShiftRow> rows;
    auto base_row = [&](double fraction) {
      ShiftRow row;
      row.replicate = replicate;
      row.seed = seed;
      row.fraction = fraction;
      row.budget = fraction * report.full_budget;
      row.t = certified_shift(row.budget);
      return row;
    };
    try {
      const Dataset data = generate_dataset(config, replicate);
      Vec theta = ctx.theta_init;
      RobustRiskResult risk;
      if (ex.train) {
        const Vec erm = erm_theta(ctx, data, derive_seed(seed, {0xe7}));
        const TrainResult tr = train_robust(ctx.family, ctx.space, data, report.rho, report.eps,
                                            report.sigma, erm, config.mc, config.opt, seed);
        theta = tr.theta;
        risk = tr.risk;
      } else {
        risk = robust_risk(LossModel(ctx.family, theta), ctx.space, data, report.rho, report.eps,
                           report.sigma, config.mc, seed);
      }
      const LossModel model(ctx.family, theta);
      // Shift direction: normalized population-mean gradient of the trained loss.
      Vec u = Vec::Zero(ctx.space.dims());
      Vec g(ctx.space.dims());
      for (Index i = 0; i < ctx.reference.cols(); ++i) {
        model.value_grad_xi(ctx.reference.col(i), g);
        u += g;
      }
      if (u.norm() > 0.0) {
        u /= u.norm();
      } else {
        u(0) = 1.0;
      }
      for (double fraction : ex.shift_fractions) {
        ShiftRow row = base_row(fraction);
        row.robust_risk = risk.value;
        row.robust_stderr = risk.stderr;
        row.lambda_star = risk.lambda_star;
        row.delta = risk.lambda_star > 0.0 ? report.eps * report.rho / risk.lambda_star : kInf;
        Mat moved = ctx.reference;
        if (row.t > 0.0) {
          for (Index i = 0; i < moved.cols(); ++i) {
            moved.col(i) = ctx.space.project(ctx.reference.col(i) + row.t * u);
          }
        }
        RngStream plain_rng(seed);
        RiskEstimate shifted = true_risk(model, ctx.space, moved, false, 1.0, plain_rng);
        if (report.eps > 0.0 && ex.smoothed_target) {
          RngStream rng = RngStream::derive(seed, StreamPurpose::smoothing);
          shifted = true_risk(model, ctx.space, moved, true, report.sigma, rng);
        }
        row.mean_loss_shifted = shifted.value;
        row.shifted_stderr = shifted.stderr;
        const double slack = ex.stderr_slack * std::hypot(risk.stderr, shifted.stderr);
        row.covered = risk.value >= shifted.value - slack ? 1 : 0;
        rows.push_back(row);
      }
    } catch (const std::exception& e) {
      rows.clear();
      for (double fraction : ex.shift_fractions) {
        ShiftRow row = base_row(fraction);
        row.status = status_of(e);
        row.mean_loss_shifted = row.shifted_stderr = row.robust_risk = row.robust_stderr = kNaN;
        row.delta = row.lambda_star = kNaN;
        rows.push_back(row);
      }
    }
    per_rep[slot] = std::move(rows);
  });
  for (const auto& rows : per_rep) report.rows.insert(report.rows.end(), rows.begin(), rows.end());

  for (double fraction : ex.shift_fractions) {
    ShiftSummary s;
    s.fraction = fraction;
    s.budget = fraction * report.full_budget;
    s.t = certified_shift(s.budget);
    for (const ShiftRow& row : report.rows) {
      if (row.fraction != fraction || row.status != "ok") continue;
      ++s.ok;
      s.covered += row.covered;
    }
    if (s.ok > 0) {
      s.coverage = static_cast<double>(s.covered) / static_cast<double>(s.ok);
      std::tie(s.wilson_lo, s.wilson_hi) = wilson_interval(s.covered, s.ok);
    }
    report.summary.push_back(s);
  }
  return report;
}

void write_shift(const ShiftReport& report, const std::string& out_dir, const std::string& stem) {
  CsvTable main({"t", "budget", "mean_loss_shifted", "robust_risk", "covered"});
  CsvTable aux({"replicate", "seed", "fraction", "t", "budget", "mean_loss_shifted",
                "shifted_stderr", "robust_risk", "robust_stderr", "lambda_star", "delta",
                "covered", "status"});
  for (const ShiftRow& r : report.rows) {
    main.add_row({num(r.t), num(r.budget), num(r.mean_loss_shifted), num(r.robust_risk),
                  num(r.covered)});
    aux.add_row({num(r.replicate), num(r.seed), num(r.fraction), num(r.t), num(r.budget),
                 num(r.mean_loss_shifted), num(r.shifted_stderr), num(r.robust_risk),
                 num(r.robust_stderr), num(r.lambda_star), num(r.delta), num(r.covered),
                 r.status});
  }
  CsvTable summary({"rho", "rho_hat_n", "full_budget", "eps", "sigma", "fraction", "t", "budget",
                    "ok", "covered", "coverage", "wilson_lo", "wilson_hi"});
  for (const ShiftSummary& s : report.summary) {
    summary.add_row({num(report.rho), num(report.rho_hat_n), num(report.full_budget),
                     num(report.eps), num(report.sigma), num(s.fraction), num(s.t), num(s.budget),
                     num(s.ok), num(s.covered), num(s.coverage), num(s.wilson_lo),
                     num(s.wilson_hi)});
  }
  main.write(join_path(out_dir, stem + ".csv"));
  aux.write(join_path(out_dir, stem + "_aux.csv"));
  summary.write(join_path(out_dir, stem + "_summary.csv"));
}

}  // namespace wdro
