#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wdro/config.hpp"
#include "wdro/data.hpp"

namespace wdro {

struct RunOptions {
  int threads = 1;
  std::optional<Index> replay;  // run only this replicate index
};

// ---------------------------------------------------------------- coverage

struct CoverageRow {
  Index regime = 0;
  double eps0 = 0.0;
  double sigma0 = 0.0;
  Index n = 0;
  double rho = 0.0;
  double eps = 0.0;
  double sigma = 0.0;
  Index replicate = 0;
  std::uint64_t seed = 0;  // stream seed of this row (data, training and smoothing keys)
  double robust_risk = 0.0;
  double robust_stderr = 0.0;
  double true_risk = 0.0;    // covered target: smoothed when eps > 0 and smoothing is on
  double true_stderr = 0.0;
  double unsmoothed_true_risk = 0.0;
  double unsmoothed_true_stderr = 0.0;
  double slack = 0.0;        // stderr_slack * combined stderr used in the comparison
  double lambda_star = 0.0;
  bool degenerate = false;
  bool train_converged = false;
  int train_iters = 0;
  int covered = 0;
  std::string status = "ok";
  Vec theta;
};

struct CoverageAggregate {
  Index regime = 0;
  double eps0 = 0.0;
  double sigma0 = 0.0;
  Index n = 0;
  double rho = 0.0;
  double eps = 0.0;
  double sigma = 0.0;
  Index replicates = 0;
  Index ok = 0;
  Index covered = 0;
  double coverage = 0.0;  // covered / ok (0 when no replicate succeeded)
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
};

struct CoverageReport {
  std::vector<CoverageRow> rows;  // sorted by (regime, rho, replicate)
  std::vector<CoverageAggregate> aggregates;
};

/// For every regime, rho in rho_grid and replicate: generate data, train theta
/// by robust training (eps = eps0 rho, sigma = sigma0 rho), compare the robust
/// risk with the true risk on a shared reference sample, and aggregate.
CoverageReport run_coverage(const ExperimentConfig& config, const RunOptions& options = {});

/// Writes <stem>.csv (exact schema), <stem>_aux.csv and <stem>_summary.csv.
void write_coverage(const CoverageReport& report, const std::string& out_dir,
                    const std::string& stem = "coverage");

// ---------------------------------------------------------------- sandwich

struct SandwichRow {
  Index n = 0;
  double rho = 0.0;
  double eps = 0.0;
  double sigma = 0.0;
  double rho_hat_n = 0.0;            // inf when fewer than the required share is attainable
  bool censored = false;
  double lower_violation = 0.0;      // share of replicates with R_{rho^2} > R_hat at t = 0
  double upper_violation = 0.0;      // share with R_hat > R_{rho^2} at t = 0
  double gap = 0.0;                  // R_{rho(rho + rho_hat)} - R_{rho(rho - rho_hat)}
};

struct SandwichReplicate {
  Index n = 0;
  double rho = 0.0;
  Index replicate = 0;
  std::uint64_t seed = 0;
  double empirical_risk = 0.0;
  double required_t = 0.0;
  std::string status = "ok";
};

struct SandwichReport {
  std::vector<SandwichRow> rows;
  std::vector<SandwichReplicate> replicates;
  std::vector<std::pair<Index, double>> median_gap;  // per n, median over rho
};

/// Brackets the empirical robust risk of the fixed model.theta between
/// true-side robust risks computed on a reference sample of reference_n points.
SandwichReport run_sandwich(const ExperimentConfig& config, const RunOptions& options = {});
void write_sandwich(const SandwichReport& report, const std::string& out_dir,
                    const std::string& stem = "sandwich");

// ---------------------------------------------------------------- scaling

struct ScalingPoint {
  Index n = 0;
  double rho_star = 0.0;      // after monotone smoothing in n
  double rho_star_raw = 0.0;  // first grid rho with smoothed coverage >= target
  bool censored = false;
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  std::vector<CoverageAggregate> coverage;  // per (n, rho), smoothed values in `coverage`
  std::vector<double> raw_coverage;         // parallel to `coverage`
  std::vector<CoverageRow> rows;
  bool fit_available = false;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_lo = 0.0;
  double slope_hi = 0.0;
  Index fit_points = 0;
};

ScalingReport run_scaling(const ExperimentConfig& config, const RunOptions& options = {});
void write_scaling(const ScalingReport& report, const std::string& out_dir,
                   const std::string& stem = "scaling");

// ---------------------------------------------------------------- shift

struct ShiftRow {
  Index replicate = 0;
  std::uint64_t seed = 0;
  double fraction = 0.0;   // (1/2) t^2 / budget
  double t = 0.0;
  double budget = 0.0;     // (1/2) t^2: certified bound on W_2^2(P, Q_t)
  double mean_loss_shifted = 0.0;
  double shifted_stderr = 0.0;
  double robust_risk = 0.0;
  double robust_stderr = 0.0;
  double delta = 0.0;      // eps rho / lambda*
  double lambda_star = 0.0;
  int covered = 0;
  std::string status = "ok";
};

struct ShiftSummary {
  double fraction = 0.0;
  double t = 0.0;
  double budget = 0.0;
  Index ok = 0;
  Index covered = 0;
  double coverage = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
};

struct ShiftReport {
  double rho = 0.0;
  double rho_hat_n = 0.0;
  double full_budget = 0.0;  // rho (rho - rho_hat_n)
  double eps = 0.0;
  double sigma = 0.0;
  std::vector<ShiftRow> rows;  // sorted by (replicate, fraction)
  std::vector<ShiftSummary> summary;
};

/// Shifted test laws Q_t = law of P_Xi(xi + t u), with u the normalized mean
/// gradient of the trained loss, for (1/2) t^2 = fraction * rho (rho - rho_hat_n).
ShiftReport run_shift(const ExperimentConfig& config, const RunOptions& options = {});
void write_shift(const ShiftReport& report, const std::string& out_dir,
                 const std::string& stem = "shift");

/// rho*(n): first grid rho whose isotonic-smoothed coverage reaches the target
/// (coverage experiment at sample size n and the first regime); nullopt if censored.
std::optional<double> estimate_rho_star(const ExperimentConfig& config, Index n,
                                        const RunOptions& options = {});

}  // namespace wdro

namespace wdro {

// ---------------------------------------------------------------- oracle battery

struct OracleCheckRow {
  std::string check_name;
  Index instance = 0;
  double reference = 0.0;
  double estimate = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Dual-vs-oracle comparison battery on seeded random 1-D logistic instances:
///   grid_dual_eps0   |robust_risk(eps = 0) - grid_dual_exact(2001 points)| <= 1e-3
///   phi_quadrature   |phi (Monte Carlo, 1e4 draws) - phi_quadrature| <= 3 stderr
///   laplace_lower    phi >= phi_laplace(lambda + M) - (5 stderr + 1e-3 eps)
///   laplace_upper    phi <= phi_laplace(lambda - M) + (5 stderr + 1e-3 eps)
std::vector<OracleCheckRow> run_oracle_check(std::uint64_t seed, Index instances = 10);
void write_oracle_check(const std::vector<OracleCheckRow>& rows, const std::string& path);

}  // namespace wdro
