#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "oracles.hpp"
#include "wdro/config.hpp"
#include "wdro/data.hpp"
#include "wdro/harness.hpp"

using namespace wdro;

namespace {

const char* kSmoke = R"({
  // comments are allowed
  "space": {"kind": "ball", "dims": 1, "radius": 2.0},
  "model": {"family": "logistic", "theta_lo": 0.1, "theta_hi": 5.0},
  "mc": {"samples_per_xi": 64, "multistarts": 4},
  "opt": {"max_iters": 30, "tol": 1e-5},
  "data": {"n": 10, "scale": 0.8},
  "experiment": {"replicates": 5, "rho_grid": [0.1, 0.3, 0.9], "true_risk_samples": 5000, "seed": 3,
                 "regimes": [{"eps0": 0.0, "sigma0": 0.5}, {"eps0": 0.05, "sigma0": 0.5}]}
})";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("wdro_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config parsing rejects unknown keys and bad values") {
  CHECK_NOTHROW(ExperimentConfig::parse(kSmoke));
  CHECK_THROWS_AS(ExperimentConfig::parse(R"({"wdro": {"rhoo": 1}})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse(R"({"experiment": {"rho_grid": [0.3, 0.1]}})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse(R"({"experiment": {"replicates": 0}})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("{not json"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse(R"({"model": {"family": "svm"}})"), ConfigError);
}

TEST_CASE("datasets lie in the shrunken space and are reproducible") {
  const ExperimentConfig cfg = ExperimentConfig::parse(kSmoke);
  const SampleSpace space = cfg.space.build();
  const SampleSpace inner = space.shrunk(space.margin());
  const Dataset a = generate_dataset(cfg, 3, 200);
  const Dataset b = generate_dataset(cfg, 3, 200);
  CHECK(a.points == b.points);
  CHECK(generate_dataset(cfg, 4, 200).points != a.points);
  for (Index i = 0; i < a.size(); ++i) CHECK(inner.contains(a.point(i), 1e-12));
}

TEST_CASE("clipped Gaussian data: empirical mean matches quadrature of the clipped density") {
  ExperimentConfig cfg = ExperimentConfig::parse(R"({
    "space": {"kind": "ball", "dims": 1, "radius": 1.0},
    "model": {"family": "constant", "constant": 1.0},
    "data": {"n": 4000, "scale": 0.7, "loc": [0.4]}
  })");
  const Dataset d = generate_dataset(cfg, 0);
  const double edge = 1.0 - cfg.space.build().margin();
  const double expected = wdro::testing::truncated_normal_mean(0.4, 0.7, -edge, edge);
  CHECK(std::abs(d.points.mean() - expected) <= 4.0 / std::sqrt(4000.0));
}

TEST_CASE("smoke coverage: 15 data rows per regime plus aggregates; replay reproduces a row") {
  ExperimentConfig cfg = ExperimentConfig::parse(kSmoke);
  cfg.experiment.regimes.resize(1);
  const CoverageReport full = run_coverage(cfg);
  CHECK(full.rows.size() == 15);
  CHECK(full.aggregates.size() == 3);
  for (const CoverageRow& r : full.rows) {
    CHECK(r.status == "ok");
    CHECK((r.covered == 0 || r.covered == 1));
  }
  for (const CoverageAggregate& a : full.aggregates) {
    CHECK(a.wilson_lo <= a.coverage);
    CHECK(a.wilson_hi >= a.coverage);
  }
  RunOptions replay;
  replay.replay = 2;
  const CoverageReport one = run_coverage(cfg, replay);
  REQUIRE(one.rows.size() == 3);
  for (const CoverageRow& r : one.rows) {
    bool found = false;
    for (const CoverageRow& f : full.rows) {
      if (f.replicate == r.replicate && f.rho == r.rho) {
        found = true;
        CHECK(f.robust_risk == r.robust_risk);
        CHECK(f.true_risk == r.true_risk);
        CHECK(f.seed == r.seed);
      }
    }
    CHECK(found);
  }
}

TEST_CASE("coverage CSVs are byte-identical across thread counts") {
  const ExperimentConfig cfg = ExperimentConfig::parse(kSmoke);
  const auto d1 = temp_dir("t1");
  const auto d3 = temp_dir("t3");
  write_coverage(run_coverage(cfg, {1, std::nullopt}), d1.string());
  write_coverage(run_coverage(cfg, {3, std::nullopt}), d3.string());
  for (const char* f : {"coverage.csv", "coverage_aux.csv", "coverage_summary.csv"}) {
    CHECK(slurp(d1 / f) == slurp(d3 / f));
  }
  const std::string header = slurp(d1 / "coverage.csv").substr(0, slurp(d1 / "coverage.csv").find('\n'));
  CHECK(header == "rho,eps,sigma,replicate,robust_risk,robust_stderr,true_risk,true_stderr,covered,status");
}

TEST_CASE("constant loss: coverage 1 everywhere and a zero sandwich radius") {
  ExperimentConfig cfg = ExperimentConfig::parse(R"({
    "space": {"kind": "ball", "dims": 1, "radius": 1.0},
    "model": {"family": "constant", "constant": 2.0},
    "data": {"n": 20},
    "experiment": {"replicates": 4, "rho_grid": [0.05, 0.2], "true_risk_samples": 100,
                   "n_grid": [10, 40], "reference_n": 200, "curve_points": 8}
  })");
  const CoverageReport cov = run_coverage(cfg);
  for (const CoverageAggregate& a : cov.aggregates) CHECK(a.coverage == 1.0);
  for (const CoverageRow& r : cov.rows) CHECK(r.robust_risk == r.true_risk);
  const SandwichReport s = run_sandwich(cfg);
  for (const SandwichRow& r : s.rows) {
    CHECK(r.rho_hat_n == 0.0);
    CHECK(r.gap == 0.0);
  }
}

TEST_CASE("scaling with a censored-only grid flags the fit as unavailable") {
  ExperimentConfig cfg = ExperimentConfig::parse(R"({
    "space": {"kind": "ball", "dims": 1, "radius": 2.0},
    "model": {"family": "logistic"},
    "mc": {"multistarts": 2},
    "opt": {"max_iters": 10},
    "data": {"n": 10, "scale": 0.8},
    "experiment": {"replicates": 20, "rho_grid": [1e-6, 2e-6], "true_risk_samples": 2000,
                   "n_grid": [10, 20, 40, 100], "coverage_target": 1.0, "bootstrap": 10}
  })");
  const ScalingReport r = run_scaling(cfg);
  CHECK_FALSE(r.fit_available);
  for (const ScalingPoint& p : r.points) CHECK(p.censored);
  // rho*(n) after smoothing is nonincreasing in n by construction.
  for (std::size_t k = 1; k < r.points.size(); ++k) {
    if (!r.points[k].censored && !r.points[k - 1].censored) {
      CHECK(r.points[k].rho_star <= r.points[k - 1].rho_star);
    }
  }
}

TEST_CASE("shift at t = 0 reduces to the coverage check") {
  ExperimentConfig cfg = ExperimentConfig::parse(kSmoke);
  cfg.experiment.regimes.resize(1);
  cfg.wdro.rho = 0.9;
  cfg.experiment.rho_hat_n = 0.1;
  const ShiftReport s = run_shift(cfg);
  REQUIRE(!s.rows.empty());
  for (const ShiftRow& r : s.rows) {
    CHECK(0.5 * r.t * r.t <= r.budget);
    if (r.fraction == 0.0) {
      CHECK(r.t == 0.0);
      CHECK(r.covered == (r.robust_risk >= r.mean_loss_shifted -
                                              cfg.experiment.stderr_slack *
                                                  std::hypot(r.robust_stderr, r.shifted_stderr)));
    }
  }
}
