// wdro: command-line front end for robust-risk evaluation, training, critical-radius
// diagnostics, the oracle battery and the four synthetic experiments.
//
// Exit codes: 0 completed, 1 runtime failure, 2 configuration or usage error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "wdro/config.hpp"
#include "wdro/csv.hpp"
#include "wdro/data.hpp"
#include "wdro/errors.hpp"
#include "wdro/harness.hpp"
#include "wdro/radius.hpp"
#include "wdro/risk.hpp"

namespace {

using namespace wdro;

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct GlobalOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string replay;  // "replicate=<k>"
  std::optional<double> rho;
  std::optional<double> eps0;
  std::optional<double> sigma0;
  Index instances = 10;
};

std::optional<Index> parse_replay(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const std::string prefix = "replicate=";
  if (text.rfind(prefix, 0) != 0) throw ConfigError("--replay expects replicate=<k>");
  try {
    std::size_t used = 0;
    const long long k = std::stoll(text.substr(prefix.size()), &used);
    if (used != text.size() - prefix.size() || k < 0) throw std::invalid_argument("replay");
    return static_cast<Index>(k);
  } catch (const std::logic_error&) {
    throw ConfigError("--replay expects replicate=<k> with k a nonnegative integer");
  }
}

/// Loads the config and applies command-line overrides (then re-validates).
ExperimentConfig load_config(const GlobalOptions& g) {
  ExperimentConfig cfg = ExperimentConfig::load(g.config_path);
  if (g.seed) cfg.experiment.seed = *g.seed;
  if (g.rho) cfg.wdro.rho = *g.rho;
  if (g.eps0 || g.sigma0) {
    if (g.eps0) cfg.wdro.eps0 = *g.eps0;
    if (g.sigma0) cfg.wdro.sigma0 = *g.sigma0;
    cfg.experiment.regimes.clear();  // an explicit regime replaces the configured list
  }
  cfg.validate();
  return cfg;
}

RunOptions run_options(const GlobalOptions& g) {
  RunOptions options;
  options.threads = g.threads;
  options.replay = parse_replay(g.replay);
  return options;
}

std::string out_dir_or_default(const GlobalOptions& g) { return g.out_dir.empty() ? "results" : g.out_dir; }

/// Prints `table` and, when --out is given, also writes it to <out>/<file>.
void emit(const CsvTable& table, const GlobalOptions& g, const std::string& file) {
  std::cout << table.str();
  if (!g.out_dir.empty()) table.write((std::filesystem::path(g.out_dir) / file).string());
}

std::string number(Index value) { return csv_number(static_cast<std::int64_t>(value)); }

// ---------------------------------------------------------------- subcommands

struct PointContext {
  explicit PointContext(ExperimentConfig config) : cfg(std::move(config)), space(cfg.space.build()) {}

  ExperimentConfig cfg;
  SampleSpace space;
  std::shared_ptr<const LossFamily> family;
  Vec theta;
  Dataset data;
  Index replicate = 0;
  double rho = 0.0;
  double eps = 0.0;
  double sigma = 0.0;
};

PointContext point_context(const GlobalOptions& g) {
  PointContext ctx(load_config(g));
  ctx.family = ctx.cfg.model.build_family(ctx.space);
  ctx.theta = ctx.cfg.model.initial_theta(*ctx.family);
  const RunOptions options = run_options(g);
  ctx.replicate = options.replay.value_or(0);
  ctx.data = generate_dataset(ctx.cfg, ctx.replicate);
  ctx.rho = ctx.cfg.wdro.rho;
  ctx.eps = ctx.cfg.wdro.eps0 * ctx.rho;
  ctx.sigma = ctx.cfg.wdro.sigma0 * ctx.rho;
  return ctx;
}

std::uint64_t point_seed(const PointContext& ctx) {
  return derive_seed(ctx.cfg.experiment.seed, {0xe1, static_cast<std::uint64_t>(ctx.replicate)});
}

std::vector<std::string> risk_header() {
  return {"rho", "eps", "sigma", "value", "lambda_star", "stderr", "degenerate"};
}

std::vector<std::string> risk_fields(const PointContext& ctx, const RobustRiskResult& r) {
  return {csv_number(ctx.rho),        csv_number(ctx.eps),         csv_number(ctx.sigma),
          csv_number(r.value),        csv_number(r.lambda_star),   csv_number(r.stderr),
          r.degenerate ? "1" : "0"};
}

int cmd_eval_risk(const GlobalOptions& g) {
  const PointContext ctx = point_context(g);
  const LossModel model(ctx.family, ctx.theta);
  const RobustRiskResult r = robust_risk(model, ctx.space, ctx.data, ctx.rho, ctx.eps, ctx.sigma,
                                         ctx.cfg.mc, point_seed(ctx));
  CsvTable table(risk_header());
  table.add_row(risk_fields(ctx, r));
  emit(table, g, "eval_risk.csv");
  return 0;
}

int cmd_train(const GlobalOptions& g) {
  const PointContext ctx = point_context(g);
  const TrainResult t = train_robust(ctx.family, ctx.space, ctx.data, ctx.rho, ctx.eps, ctx.sigma,
                                     ctx.theta, ctx.cfg.mc, ctx.cfg.opt, point_seed(ctx));
  std::vector<std::string> header = risk_header();
  std::vector<std::string> fields = risk_fields(ctx, t.risk);
  for (Index j = 0; j < t.theta.size(); ++j) {
    header.push_back("theta_" + std::to_string(j));
    fields.push_back(csv_number(t.theta(j)));
  }
  CsvTable table(header);
  table.add_row(fields);
  emit(table, g, "train.csv");
  if (!t.converged) {
    std::cerr << "warning: training stopped after " << t.iterations
              << " iterations (projected-gradient norm " << t.grad_norm << ")\n";
  }
  return 0;
}

int cmd_critical_radius(const GlobalOptions& g) {
  const ExperimentConfig cfg = load_config(g);
  const SampleSpace space = cfg.space.build();
  const auto family = cfg.model.build_family(space);
  if (family->theta_set().kind() != ThetaSet::Kind::annulus) {
    throw ConfigError("critical-radius needs an annulus parameter set (logistic or linear_regression)");
  }
  const std::vector<Vec> grid = annulus_theta_grid(family->theta_dim(), cfg.radius.radii,
                                                   cfg.radius.directions, cfg.experiment.seed);
  const Mat sample = draw_reference_sample(cfg, cfg.radius.sample_n, StreamPurpose::radius);
  std::vector<std::string> header{"regime", "eps", "sigma", "rho_c_sq", "stderr"};
  for (Index j = 0; j < family->theta_dim(); ++j) header.push_back("theta_star_" + std::to_string(j));
  CsvTable table(header);
  const double rho = cfg.wdro.rho;
  for (const Regime& regime : cfg.regimes()) {
    const double eps = regime.eps0 * rho;
    const double sigma = regime.sigma0 * rho;
    const CriticalRadiusReport r = critical_radius_sq(family, grid, space, sample, eps, sigma, cfg.mc,
                                                      cfg.experiment.seed, g.threads);
    std::vector<std::string> row{r.regime(), csv_number(eps), csv_number(sigma),
                                 csv_number(r.rho_c_sq), csv_number(r.stderr)};
    for (Index j = 0; j < r.argmin_theta.size(); ++j) row.push_back(csv_number(r.argmin_theta(j)));
    table.add_row(row);
  }
  emit(table, g, "critical_radius.csv");
  return 0;
}

int cmd_oracle_check(const GlobalOptions& g) {
  const ExperimentConfig cfg = load_config(g);
  const std::vector<OracleCheckRow> rows = run_oracle_check(cfg.experiment.seed, g.instances);
  CsvTable table({"check_name", "instance", "reference", "estimate", "tolerance", "pass"});
  Index failed = 0;
  for (const OracleCheckRow& r : rows) {
    table.add_row({r.check_name, number(r.instance), csv_number(r.reference), csv_number(r.estimate),
                   csv_number(r.tolerance), r.pass ? "1" : "0"});
    failed += r.pass ? 0 : 1;
  }
  emit(table, g, "oracle_check.csv");
  std::cerr << (rows.size() - static_cast<std::size_t>(failed)) << "/" << rows.size()
            << " oracle checks passed\n";
  return 0;
}

int cmd_coverage(const GlobalOptions& g) {
  const std::string out = out_dir_or_default(g);
  write_coverage(run_coverage(load_config(g), run_options(g)), out);
  std::cerr << "wrote " << (std::filesystem::path(out) / "coverage.csv").string() << "\n";
  return 0;
}

int cmd_sandwich(const GlobalOptions& g) {
  const std::string out = out_dir_or_default(g);
  write_sandwich(run_sandwich(load_config(g), run_options(g)), out);
  std::cerr << "wrote " << (std::filesystem::path(out) / "sandwich.csv").string() << "\n";
  return 0;
}

int cmd_scaling(const GlobalOptions& g) {
  const std::string out = out_dir_or_default(g);
  const ScalingReport report = run_scaling(load_config(g), run_options(g));
  write_scaling(report, out);
  if (report.fit_available) {
    std::cerr << "log-log slope " << report.slope << " [" << report.slope_lo << ", " << report.slope_hi
              << "] over " << report.fit_points << " sample sizes\n";
  } else {
    std::cerr << "fit unavailable: fewer than two uncensored sample sizes\n";
  }
  return 0;
}

int cmd_shift(const GlobalOptions& g) {
  const std::string out = out_dir_or_default(g);
  write_shift(run_shift(load_config(g), run_options(g)), out);
  std::cerr << "wrote " << (std::filesystem::path(out) / "shift.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein distributionally robust risk: evaluation, training and experiments"};
  app.require_subcommand(1);
  GlobalOptions g;

  auto add_common = [&g](CLI::App* sub) {
    sub->add_option("--config", g.config_path, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", g.out_dir, "output directory for CSV files");
    sub->add_option("--seed", g.seed, "override experiment.seed");
    sub->add_option("--threads", g.threads, "worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--replay", g.replay, "rerun a single replicate: replicate=<k>");
  };
  auto add_regime = [&g](CLI::App* sub) {
    sub->add_option("--rho", g.rho, "override wdro.rho")->check(CLI::NonNegativeNumber);
    sub->add_option("--eps0", g.eps0, "override eps0 (eps = eps0 * rho)")->check(CLI::NonNegativeNumber);
    sub->add_option("--sigma0", g.sigma0, "override sigma0 (sigma = sigma0 * rho)")->check(CLI::PositiveNumber);
  };

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const GlobalOptions&);
    bool regime;
  };
  const Command commands[] = {
      {"coverage", "coverage probability of the robust risk over replicates", cmd_coverage, true},
      {"sandwich", "empirical sandwich bounds and rho_n estimate", cmd_sandwich, true},
      {"scaling", "minimal covering radius versus sample size", cmd_scaling, true},
      {"shift", "coverage under certified distribution shifts", cmd_shift, true},
      {"eval-risk", "robust risk of the configured model on one dataset", cmd_eval_risk, true},
      {"train", "robust training on one dataset", cmd_train, true},
      {"critical-radius", "critical radius diagnostic over a theta grid", cmd_critical_radius, true},
      {"oracle-check", "dual-versus-oracle comparison battery", cmd_oracle_check, false},
  };
  int (*selected)(const GlobalOptions&) = nullptr;
  for (const Command& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    if (c.regime) add_regime(sub);
    if (std::string(c.name) == "oracle-check") {
      sub->add_option("--instances", g.instances, "random instances per check")->check(CLI::PositiveNumber);
    }
    sub->callback([&selected, run = c.run] { selected = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    return selected(g);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
