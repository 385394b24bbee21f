#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wdro/dual.hpp"
#include "wdro/errors.hpp"
#include "wdro/geometry.hpp"
#include "wdro/models.hpp"
#include "wdro/risk.hpp"

namespace wdro {

/// Thrown for malformed or inconsistent configuration files (CLI exit code 2).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(ErrorCode::config_error, message) {}
};

struct SpaceConfig {
  std::string kind = "ball";  // ball | box | ball_x_interval
  Index dims = 1;             // total dimension of xi (features + target for ball_x_interval)
  double radius = 1.0;
  Vec center;                 // ball only; default 0
  Vec lo;                     // box only
  Vec hi;                     // box only
  double y_bound = 1.0;       // ball_x_interval only
  double margin = -1.0;       // gamma; negative = default 0.1 * scale

  SampleSpace build() const;
};

struct ModelConfig {
  std::string family = "logistic";  // logistic | linear_regression | kernel_ridge | constant
  double theta_lo = 0.1;            // annulus Theta: r_lo <= |theta| <= r_hi
  double theta_hi = 10.0;
  Vec theta;                        // fixed / initial parameter; default: family-specific
  Index centers = 4;                // kernel_ridge
  double bandwidth = 1.0;           // kernel_ridge
  double ridge_mu = 1e-3;           // kernel_ridge
  double theta_box = 10.0;          // kernel_ridge: Theta = [-theta_box, theta_box]^p
  double constant = 1.0;            // constant

  std::shared_ptr<const LossFamily> build_family(const SampleSpace& space) const;
  /// `theta` if given, otherwise a default interior point of Theta.
  Vec initial_theta(const LossFamily& family) const;
};

struct WdroConfig {
  double rho = 0.1;
  double eps0 = 0.0;     // eps = eps0 * rho
  double sigma0 = 0.3;   // sigma = sigma0 * rho
};

struct DataConfig {
  Index n = 100;
  std::string generator = "gaussian_clipped";  // gaussian_clipped | uniform
  double scale = 1.0;  // feature standard deviation s
  Vec loc;             // feature mean; default: center of the feature set
  Vec theta_true;      // default: (1, 0, ..., 0)
  double noise = 0.5;
};

/// Critical-radius diagnostic: annulus theta grid (directions x radii).
struct RadiusConfig {
  std::vector<double> radii{0.5, 1.0, 2.0, 4.0};
  int directions = 8;
  Index sample_n = 2000;  // draws from P used for the expectation over xi
};

struct Regime {
  double eps0 = 0.0;
  double sigma0 = 0.3;
};

struct ExperimentSettings {
  Index replicates = 20;
  std::vector<double> rho_grid{0.05, 0.1, 0.2};
  Index true_risk_samples = 100000;
  std::uint64_t seed = 42;
  std::vector<Regime> regimes;          // default: the single regime from `wdro`
  std::vector<Index> n_grid;            // scaling / sandwich sample sizes; default {data.n}
  bool smoothed_target = true;          // eps > 0 coverage target follows the smoothed risk
  double coverage_target = 0.9;         // scaling: rho*(n) threshold
  Index bootstrap = 1000;               // scaling: bootstrap resamples for the slope interval
  double sandwich_level = 0.95;         // sandwich: fraction of replicates to satisfy
  Index reference_n = 20000;            // sandwich: reference sample standing in for P
  Index curve_points = 64;              // sandwich: radii on the reference risk curve
  std::optional<double> rho_hat_n;      // shift: override of the estimated rho_n
  std::vector<double> shift_fractions{0.0, 0.25, 0.5, 1.0, 4.0};
  double stderr_slack = 3.0;            // covered iff robust >= true - slack * combined stderr
  bool train = true;                    // train theta per replicate (else use model.theta)
};

struct ExperimentConfig {
  SpaceConfig space;
  ModelConfig model;
  WdroConfig wdro;
  McBudget mc;
  OptBudget opt;
  DataConfig data;
  RadiusConfig radius;
  ExperimentSettings experiment;

  /// Parses JSON text; unknown keys and invalid values raise ConfigError.
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);

  /// Checks cross-field invariants (R >= 1, rho_grid positive ascending, ...).
  void validate() const;

  std::vector<Regime> regimes() const;
  std::vector<Index> n_grid() const;
};

}  // namespace wdro
