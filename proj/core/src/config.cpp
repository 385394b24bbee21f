#include "wdro/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace wdro {

namespace {

using Json = nlohmann::json;

[[noreturn]] void config_fail(const std::string& message) { throw ConfigError(message); }

/// Reads a JSON object section while rejecting keys that were never consumed.
class Section {
 public:
  Section(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) config_fail(path_ + ": expected an object");
  }
  ~Section() = default;

  bool has(const std::string& key) const { return node_.contains(key); }

  const Json* get(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, double& out) {
    if (const Json* v = get(key)) {
      if (!v->is_number()) config_fail(name(key) + ": expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) config_fail(name(key) + ": must be finite");
    }
  }
  void read(const std::string& key, Index& out) {
    if (const Json* v = get(key)) {
      if (!v->is_number_integer()) config_fail(name(key) + ": expected an integer");
      out = v->get<Index>();
    }
  }
  void read(const std::string& key, int& out) {
    if (const Json* v = get(key)) {
      if (!v->is_number_integer()) config_fail(name(key) + ": expected an integer");
      out = v->get<int>();
    }
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (const Json* v = get(key)) {
      if (!v->is_number_unsigned()) config_fail(name(key) + ": expected a nonnegative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void read(const std::string& key, bool& out) {
    if (const Json* v = get(key)) {
      if (!v->is_boolean()) config_fail(name(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const Json* v = get(key)) {
      if (!v->is_string()) config_fail(name(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }
  void read(const std::string& key, Vec& out) {
    if (const Json* v = get(key)) {
      if (!v->is_array()) config_fail(name(key) + ": expected an array of numbers");
      out.resize(static_cast<Index>(v->size()));
      for (std::size_t k = 0; k < v->size(); ++k) {
        if (!(*v)[k].is_number()) config_fail(name(key) + ": expected an array of numbers");
        out(static_cast<Index>(k)) = (*v)[k].get<double>();
      }
    }
  }
  void read(const std::string& key, std::vector<double>& out) {
    if (has(key)) {
      Vec tmp;
      read(key, tmp);
      out.assign(tmp.data(), tmp.data() + tmp.size());
    }
  }
  void read(const std::string& key, std::vector<Index>& out) {
    if (const Json* v = get(key)) {
      if (!v->is_array()) config_fail(name(key) + ": expected an array of integers");
      out.clear();
      for (const Json& item : *v) {
        if (!item.is_number_integer()) config_fail(name(key) + ": expected an array of integers");
        out.push_back(item.get<Index>());
      }
    }
  }
  void read(const std::string& key, std::optional<double>& out) {
    if (has(key)) {
      double value = 0.0;
      read(key, value);
      out = value;
    }
  }

  /// Rejects keys that no reader consumed (catches typos in config files).
  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (seen_.count(it.key()) == 0) config_fail("unknown config key: " + name(it.key()));
    }
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const Json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

SampleSpace SpaceConfig::build() const {
  try {
    if (kind == "ball") {
      Vec c = center.size() == 0 ? Vec::Zero(dims) : center;
      if (c.size() != dims) config_fail("space.center must have space.dims entries");
      return SampleSpace::ball(c, radius, margin);
    }
    if (kind == "box") {
      if (lo.size() != dims || hi.size() != dims) {
        config_fail("space.lo and space.hi must have space.dims entries");
      }
      return SampleSpace::box(lo, hi, margin);
    }
    if (kind == "ball_x_interval") {
      if (dims < 2) config_fail("space.dims must be >= 2 for ball_x_interval");
      return SampleSpace::ball_x_interval(dims - 1, radius, y_bound, margin);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    config_fail(std::string("space: ") + e.what());
  }
  config_fail("space.kind must be ball, box or ball_x_interval");
}

std::shared_ptr<const LossFamily> ModelConfig::build_family(const SampleSpace& space) const {
  try {
    const Index d = space.dims();
    if (family == "logistic") {
      return logistic_family(d, ThetaSet::annulus(theta_lo, theta_hi));
    }
    if (family == "linear_regression") {
      if (space.kind() != SpaceKind::ball_x_interval) {
        config_fail("model.family linear_regression requires space.kind ball_x_interval");
      }
      return linear_regression_family(d - 1, ThetaSet::annulus(theta_lo, theta_hi));
    }
    if (family == "kernel_ridge") {
      if (space.kind() != SpaceKind::ball_x_interval) {
        config_fail("model.family kernel_ridge requires space.kind ball_x_interval");
      }
      const Index p = centers * d;  // centers * (1 + features)
      return kernel_ridge_family(d - 1, centers, bandwidth, ridge_mu,
                                 ThetaSet::box(Vec::Constant(p, -theta_box),
                                               Vec::Constant(p, theta_box)));
    }
    if (family == "constant") return constant_family(constant);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    config_fail(std::string("model: ") + e.what());
  }
  config_fail("model.family must be logistic, linear_regression, kernel_ridge or constant");
}

Vec ModelConfig::initial_theta(const LossFamily& family_ref) const {
  const Index p = family_ref.theta_dim();
  if (theta.size() > 0) {
    if (theta.size() != p) config_fail("model.theta has the wrong length for the family");
    if (!family_ref.theta_set().contains(theta, 1e-9)) config_fail("model.theta lies outside Theta");
    return theta;
  }
  switch (family_ref.family()) {
    case Family::constant:
      return Vec::Constant(1, constant);
    case Family::kernel_ridge: {
      // Zero weights, centers spread along the first feature axis.
      Vec t = Vec::Zero(p);
      const Index m = centers;
      const Index features = p / m - 1;
      for (Index j = 0; j < m; ++j) {
        t(m + j * features) = m == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(m - 1);
      }
      return t;
    }
    default: {
      Vec t = Vec::Zero(p);
      t(0) = std::max(theta_lo, std::min(1.0, theta_hi));
      return t;
    }
  }
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text, nullptr, true, true);
  } catch (const Json::exception& e) {
    config_fail(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Section top(root, "");
  auto section = [&](const std::string& key, auto&& body) {
    if (const Json* node = top.get(key)) {
      Section s(*node, key);
      body(s);
      s.finish();
    }
  };
  section("space", [&](Section& s) {
    s.read("kind", cfg.space.kind);
    s.read("dims", cfg.space.dims);
    s.read("radius", cfg.space.radius);
    s.read("center", cfg.space.center);
    s.read("lo", cfg.space.lo);
    s.read("hi", cfg.space.hi);
    s.read("y_bound", cfg.space.y_bound);
    s.read("margin", cfg.space.margin);
  });
  section("model", [&](Section& s) {
    s.read("family", cfg.model.family);
    s.read("theta_lo", cfg.model.theta_lo);
    s.read("theta_hi", cfg.model.theta_hi);
    s.read("theta", cfg.model.theta);
    s.read("centers", cfg.model.centers);
    s.read("bandwidth", cfg.model.bandwidth);
    s.read("ridge_mu", cfg.model.ridge_mu);
    s.read("theta_box", cfg.model.theta_box);
    s.read("constant", cfg.model.constant);
  });
  section("wdro", [&](Section& s) {
    s.read("rho", cfg.wdro.rho);
    s.read("eps0", cfg.wdro.eps0);
    s.read("sigma0", cfg.wdro.sigma0);
  });
  section("mc", [&](Section& s) {
    s.read("samples_per_xi", cfg.mc.samples_per_xi);
    s.read("multistarts", cfg.mc.multistarts);
    s.read("ess_floor", cfg.mc.ess_floor);
    s.read("ascent_tol", cfg.mc.ascent_tol);
    s.read("ascent_max_iters", cfg.mc.ascent_max_iters);
    s.read("acceptance_floor", cfg.mc.acceptance_floor);
  });
  section("opt", [&](Section& s) {
    s.read("max_iters", cfg.opt.max_iters);
    s.read("tol", cfg.opt.tol);
  });
  section("data", [&](Section& s) {
    s.read("n", cfg.data.n);
    s.read("generator", cfg.data.generator);
    s.read("scale", cfg.data.scale);
    s.read("loc", cfg.data.loc);
    s.read("theta_true", cfg.data.theta_true);
    s.read("noise", cfg.data.noise);
  });
  section("radius", [&](Section& s) {
    s.read("radii", cfg.radius.radii);
    s.read("directions", cfg.radius.directions);
    s.read("sample_n", cfg.radius.sample_n);
  });
  section("experiment", [&](Section& s) {
    ExperimentSettings& e = cfg.experiment;
    s.read("replicates", e.replicates);
    s.read("rho_grid", e.rho_grid);
    s.read("true_risk_samples", e.true_risk_samples);
    s.read("seed", e.seed);
    if (const Json* regimes = s.get("regimes")) {
      if (!regimes->is_array()) config_fail("experiment.regimes: expected an array");
      for (const Json& item : *regimes) {
        Section r(item, "experiment.regimes[]");
        Regime regime;
        r.read("eps0", regime.eps0);
        r.read("sigma0", regime.sigma0);
        r.finish();
        e.regimes.push_back(regime);
      }
    }
    s.read("n_grid", e.n_grid);
    s.read("smoothed_target", e.smoothed_target);
    s.read("coverage_target", e.coverage_target);
    s.read("bootstrap", e.bootstrap);
    s.read("sandwich_level", e.sandwich_level);
    s.read("reference_n", e.reference_n);
    s.read("curve_points", e.curve_points);
    s.read("rho_hat_n", e.rho_hat_n);
    s.read("shift_fractions", e.shift_fractions);
    s.read("stderr_slack", e.stderr_slack);
    s.read("train", e.train);
  });
  top.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_fail("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

void ExperimentConfig::validate() const {
  auto check = [](bool ok, const std::string& message) {
    if (!ok) config_fail(message);
  };
  check(space.dims >= 1, "space.dims must be >= 1");
  check(data.n >= 1, "data.n must be >= 1");
  check(data.generator == "gaussian_clipped" || data.generator == "uniform",
        "data.generator must be gaussian_clipped or uniform");
  check(data.scale > 0.0, "data.scale must be positive");
  check(data.noise >= 0.0, "data.noise must be >= 0");
  check(wdro.rho >= 0.0, "wdro.rho must be >= 0");
  check(wdro.eps0 >= 0.0, "wdro.eps0 must be >= 0");
  check(wdro.sigma0 > 0.0, "wdro.sigma0 must be positive");
  check(mc.samples_per_xi >= 2, "mc.samples_per_xi must be >= 2");
  check(mc.multistarts >= 1, "mc.multistarts must be >= 1");
  check(mc.ascent_tol > 0.0 && mc.ascent_max_iters >= 1, "mc.ascent_* must be positive");
  check(mc.acceptance_floor > 0.0 && mc.acceptance_floor < 1.0,
        "mc.acceptance_floor must be in (0, 1)");
  check(opt.max_iters >= 0 && opt.tol >= 0.0, "opt.max_iters and opt.tol must be >= 0");
  check(!radius.radii.empty() && radius.directions >= 1 && radius.sample_n >= 100,
        "radius: need radii, directions >= 1 and sample_n >= 100");
  for (double r : radius.radii) check(r > 0.0, "radius.radii must be positive");
  const ExperimentSettings& e = experiment;
  check(e.replicates >= 1, "experiment.replicates must be >= 1");
  check(!e.rho_grid.empty(), "experiment.rho_grid must be nonempty");
  for (std::size_t k = 0; k < e.rho_grid.size(); ++k) {
    check(e.rho_grid[k] > 0.0, "experiment.rho_grid must be positive");
    if (k > 0) check(e.rho_grid[k] > e.rho_grid[k - 1], "experiment.rho_grid must be ascending");
  }
  check(e.true_risk_samples >= 2, "experiment.true_risk_samples must be >= 2");
  for (const Regime& r : e.regimes) {
    check(r.eps0 >= 0.0 && r.sigma0 > 0.0, "experiment.regimes: eps0 >= 0 and sigma0 > 0");
  }
  for (std::size_t k = 0; k < e.n_grid.size(); ++k) {
    check(e.n_grid[k] >= 1, "experiment.n_grid entries must be >= 1");
    if (k > 0) check(e.n_grid[k] > e.n_grid[k - 1], "experiment.n_grid must be ascending");
  }
  check(e.coverage_target > 0.0 && e.coverage_target <= 1.0,
        "experiment.coverage_target must be in (0, 1]");
  check(e.sandwich_level > 0.0 && e.sandwich_level <= 1.0,
        "experiment.sandwich_level must be in (0, 1]");
  check(e.bootstrap >= 0, "experiment.bootstrap must be >= 0");
  check(e.reference_n >= 2 && e.curve_points >= 4, "experiment.reference_n / curve_points too small");
  check(!e.rho_hat_n || *e.rho_hat_n >= 0.0, "experiment.rho_hat_n must be >= 0");
  check(!e.shift_fractions.empty(), "experiment.shift_fractions must be nonempty");
  for (double f : e.shift_fractions) check(f >= 0.0, "experiment.shift_fractions must be >= 0");
  check(e.stderr_slack >= 0.0, "experiment.stderr_slack must be >= 0");

  // Building the space and family surfaces any remaining inconsistency.
  const SampleSpace s = space.build();
  const auto family = model.build_family(s);
  (void)model.initial_theta(*family);
  if (data.loc.size() != 0) {
    const Index features = family->family() == Family::logistic || family->family() == Family::constant
                               ? s.dims()
                               : s.dims() - 1;
    check(data.loc.size() == features, "data.loc must have one entry per feature");
  }
  if (data.theta_true.size() != 0 && family->family() != Family::constant) {
    const Index features = family->family() == Family::logistic ? s.dims() : s.dims() - 1;
    check(data.theta_true.size() == features, "data.theta_true must have one entry per feature");
  }
}

std::vector<Regime> ExperimentConfig::regimes() const {
  if (!experiment.regimes.empty()) return experiment.regimes;
  return {Regime{wdro.eps0, wdro.sigma0}};
}

std::vector<Index> ExperimentConfig::n_grid() const {
  if (!experiment.n_grid.empty()) return experiment.n_grid;
  return {data.n};
}

}  // namespace wdro
