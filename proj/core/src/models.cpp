#include "wdro/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wdro/ascent.hpp"
#include "wdro/errors.hpp"

namespace wdro {

std::string_view to_string(Family family) {
  switch (family) {
    case Family::logistic: return "logistic";
    case Family::linear_regression: return "linear_regression";
    case Family::kernel_ridge: return "kernel_ridge";
    case Family::constant: return "constant";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "logistic") return Family::logistic;
  if (name == "linear_regression") return Family::linear_regression;
  if (name == "kernel_ridge") return Family::kernel_ridge;
  if (name == "constant") return Family::constant;
  fail(ErrorCode::unimplemented, "unsupported loss family '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// ThetaSet

ThetaSet ThetaSet::annulus(double r_lo, double r_hi) {
  require(r_lo > 0.0, "annulus: r_lo must be positive (Theta excludes the origin)");
  require(r_hi >= r_lo, "annulus: r_hi must be at least r_lo");
  ThetaSet t;
  t.kind_ = Kind::annulus;
  t.r_lo_ = r_lo;
  t.r_hi_ = r_hi;
  return t;
}

ThetaSet ThetaSet::box(Vec lo, Vec hi) {
  require(lo.size() == hi.size(), "theta box: lo/hi dimension mismatch");
  require((hi.array() >= lo.array()).all(), "theta box: hi must be >= lo");
  ThetaSet t;
  t.kind_ = Kind::box;
  t.lo_ = std::move(lo);
  t.hi_ = std::move(hi);
  return t;
}

ThetaSet ThetaSet::point(Vec value) {
  ThetaSet t;
  t.kind_ = Kind::point;
  t.point_ = std::move(value);
  return t;
}

Vec ThetaSet::project(ConstVecRef theta) const {
  switch (kind_) {
    case Kind::annulus: {
      const double r = theta.norm();
      if (r == 0.0) {
        Vec out = Vec::Zero(theta.size());
        out(0) = r_lo_;
        return out;
      }
      return theta * (std::clamp(r, r_lo_, r_hi_) / r);
    }
    case Kind::box:
      require(theta.size() == lo_.size(), "theta box: dimension mismatch");
      return theta.cwiseMax(lo_).cwiseMin(hi_);
    case Kind::point:
      return point_;
  }
  return theta;
}

bool ThetaSet::contains(ConstVecRef theta, double tol) const {
  switch (kind_) {
    case Kind::annulus: {
      const double r = theta.norm();
      return r >= r_lo_ - tol && r <= r_hi_ + tol;
    }
    case Kind::box:
      return theta.size() == lo_.size() && ((theta - lo_).array() >= -tol).all() &&
             ((hi_ - theta).array() >= -tol).all();
    case Kind::point:
      return theta.size() == point_.size() && (theta - point_).norm() <= tol;
  }
  return false;
}

// ---------------------------------------------------------------------------
// ArgmaxSet

ArgmaxSet ArgmaxSet::whole_space(double max_value) {
  ArgmaxSet a;
  a.whole_space_ = true;
  a.max_value_ = max_value;
  return a;
}

ArgmaxSet ArgmaxSet::points(Mat points, double max_value) {
  require(points.cols() > 0, "argmax set must be nonempty");
  ArgmaxSet a;
  a.points_ = std::move(points);
  a.max_value_ = max_value;
  return a;
}

double ArgmaxSet::half_sq_distance(ConstVecRef xi) const {
  if (whole_space_) return 0.0;
  return 0.5 * (points_.colwise() - xi).colwise().squaredNorm().minCoeff();
}

Vec ArgmaxSet::representative(const SampleSpace& space, ConstVecRef query) const {
  if (whole_space_) return space.project(query);
  Index best = 0;
  (points_.colwise() - query).colwise().squaredNorm().minCoeff(&best);
  return points_.col(best);
}

// ---------------------------------------------------------------------------
// LossFamily defaults

void LossFamily::values(const Vec& theta, const Mat& points, VecRef out) const {
  for (Index s = 0; s < points.cols(); ++s) out(s) = value(theta, points.col(s));
}

Vec LossFamily::weighted_grad_theta(const Vec& theta, const Mat& points,
                                    ConstVecRef weights) const {
  Vec acc = Vec::Zero(theta.size());
  Vec g(theta.size());
  for (Index s = 0; s < points.cols(); ++s) {
    if (weights(s) == 0.0) continue;
    grad_theta(theta, points.col(s), g);
    acc += weights(s) * g;
  }
  return acc;
}

std::optional<ArgmaxSet> LossFamily::closed_form_argmax(const Vec&, const SampleSpace&) const {
  return std::nullopt;
}

std::optional<Smoothness> LossFamily::smoothness(const Vec&, const SampleSpace&) const {
  return std::nullopt;
}

namespace {

double softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

void check_theta_size(const Vec& theta, Index expected) {
  if (theta.size() != expected) {
    fail(ErrorCode::invalid_argument, "theta has dimension " + std::to_string(theta.size()) +
                                          ", expected " + std::to_string(expected));
  }
}

class Logistic final : public LossFamily {
 public:
  Logistic(Index dims, ThetaSet theta_set) : LossFamily(std::move(theta_set)), dims_(dims) {
    require(dims > 0, "logistic: dimension must be positive");
  }

  Family family() const override { return Family::logistic; }
  Index theta_dim() const override { return dims_; }
  Index xi_dim() const override { return dims_; }

  double value(const Vec& theta, ConstVecRef xi) const override {
    return softplus(theta.dot(xi));
  }

  double value_grad_xi(const Vec& theta, ConstVecRef xi, VecRef grad) const override {
    const double t = theta.dot(xi);
    grad = sigmoid(t) * theta;
    return softplus(t);
  }

  void grad_theta(const Vec& theta, ConstVecRef xi, VecRef grad) const override {
    grad = sigmoid(theta.dot(xi)) * xi;
  }

  void values(const Vec& theta, const Mat& points, VecRef out) const override {
    out.noalias() = points.transpose() * theta;
    for (Index s = 0; s < out.size(); ++s) out(s) = softplus(out(s));
  }

  Vec weighted_grad_theta(const Vec& theta, const Mat& points,
                          ConstVecRef weights) const override {
    Vec t = points.transpose() * theta;
    for (Index s = 0; s < t.size(); ++s) t(s) = weights(s) * sigmoid(t(s));
    return points * t;
  }

  std::optional<ArgmaxSet> closed_form_argmax(const Vec& theta,
                                              const SampleSpace& space) const override {
    if (space.kind() != SpaceKind::ball || space.center().norm() != 0.0) return std::nullopt;
    const double norm = theta.norm();
    if (norm == 0.0) return ArgmaxSet::whole_space(softplus(0.0));
    Mat p = (space.radius() / norm) * theta;
    return ArgmaxSet::points(std::move(p), softplus(space.radius() * norm));
  }

  std::optional<Smoothness> smoothness(const Vec& theta, const SampleSpace&) const override {
    const double n2 = theta.squaredNorm();
    return Smoothness{0.25 * n2, std::sqrt(n2)};
  }

 private:
  Index dims_;
};

class LinearRegression final : public LossFamily {
 public:
  LinearRegression(Index feature_dims, ThetaSet theta_set)
      : LossFamily(std::move(theta_set)), features_(feature_dims) {
    require(feature_dims > 0, "linear_regression: feature dimension must be positive");
  }

  Family family() const override { return Family::linear_regression; }
  Index theta_dim() const override { return features_; }
  Index xi_dim() const override { return features_ + 1; }

  double residual(const Vec& theta, ConstVecRef xi) const {
    return theta.dot(xi.head(features_)) - xi(features_);
  }

  double value(const Vec& theta, ConstVecRef xi) const override {
    const double r = residual(theta, xi);
    return 0.5 * r * r;
  }

  double value_grad_xi(const Vec& theta, ConstVecRef xi, VecRef grad) const override {
    const double r = residual(theta, xi);
    grad.head(features_) = r * theta;
    grad(features_) = -r;
    return 0.5 * r * r;
  }

  void grad_theta(const Vec& theta, ConstVecRef xi, VecRef grad) const override {
    grad = residual(theta, xi) * xi.head(features_);
  }

  void values(const Vec& theta, const Mat& points, VecRef out) const override {
    out.noalias() = points.topRows(features_).transpose() * theta;
    out -= points.row(features_).transpose();
    out = 0.5 * out.array().square();
  }

  Vec weighted_grad_theta(const Vec& theta, const Mat& points,
                          ConstVecRef weights) const override {
    Vec r = points.topRows(features_).transpose() * theta;
    r -= points.row(features_).transpose();
    r.array() *= weights.array();
    return points.topRows(features_) * r;
  }

  std::optional<ArgmaxSet> closed_form_argmax(const Vec& theta,
                                              const SampleSpace& space) const override {
    if (space.kind() != SpaceKind::ball_x_interval) return std::nullopt;
    const double norm = theta.norm();
    if (norm == 0.0) return std::nullopt;
    const double radius = space.radius();
    const double b = space.y_bound();
    Mat p(features_ + 1, 2);
    p.col(0).head(features_) = (radius / norm) * theta;
    p(features_, 0) = -b;
    p.col(1).head(features_) = -(radius / norm) * theta;
    p(features_, 1) = b;
    const double top = radius * norm + b;
    return ArgmaxSet::points(std::move(p), 0.5 * top * top);
  }

  std::optional<Smoothness> smoothness(const Vec& theta,
                                       const SampleSpace& space) const override {
    const double v2 = theta.squaredNorm() + 1.0;
    double g = std::numeric_limits<double>::infinity();
    if (space.kind() == SpaceKind::ball_x_interval) {
      g = (space.radius() * theta.norm() + space.y_bound()) * std::sqrt(v2);
    }
    return Smoothness{v2, g};
  }

 private:
  Index features_;
};

class KernelRidge final : public LossFamily {
 public:
  KernelRidge(Index feature_dims, Index centers, double bandwidth, double mu, ThetaSet theta_set)
      : LossFamily(std::move(theta_set)),
        features_(feature_dims),
        centers_(centers),
        inv_h2_(1.0 / (bandwidth * bandwidth)),
        mu_(mu) {
    require(feature_dims > 0 && centers > 0, "kernel_ridge: dimensions must be positive");
    require(bandwidth > 0.0, "kernel_ridge: bandwidth must be positive");
    require(mu >= 0.0, "kernel_ridge: ridge parameter must be nonnegative");
  }

  Family family() const override { return Family::kernel_ridge; }
  Index theta_dim() const override { return centers_ * (1 + features_); }
  Index xi_dim() const override { return features_ + 1; }

  auto center(const Vec& theta, Index j) const {
    return theta.segment(centers_ + j * features_, features_);
  }

  double kernel(const Vec& theta, ConstVecRef x, Index j) const {
    return std::exp(-0.5 * inv_h2_ * (x - center(theta, j)).squaredNorm());
  }

  double prediction(const Vec& theta, ConstVecRef x) const {
    double s = 0.0;
    for (Index j = 0; j < centers_; ++j) s += theta(j) * kernel(theta, x, j);
    return s;
  }

  double value(const Vec& theta, ConstVecRef xi) const override {
    const double r = prediction(theta, xi.head(features_)) - xi(features_);
    return 0.5 * r * r + 0.5 * mu_ * theta.head(centers_).squaredNorm();
  }

  double value_grad_xi(const Vec& theta, ConstVecRef xi, VecRef grad) const override {
    const auto x = xi.head(features_);
    double pred = 0.0;
    grad.setZero();
    for (Index j = 0; j < centers_; ++j) {
      const double ak = theta(j) * kernel(theta, x, j);
      pred += ak;
      grad.head(features_) -= ak * inv_h2_ * (x - center(theta, j));
    }
    const double r = pred - xi(features_);
    grad.head(features_) *= r;
    grad(features_) = -r;
    return 0.5 * r * r + 0.5 * mu_ * theta.head(centers_).squaredNorm();
  }

  void grad_theta(const Vec& theta, ConstVecRef xi, VecRef grad) const override {
    const auto x = xi.head(features_);
    const double r = prediction(theta, x) - xi(features_);
    for (Index j = 0; j < centers_; ++j) {
      const double k = kernel(theta, x, j);
      grad(j) = r * k + mu_ * theta(j);
      grad.segment(centers_ + j * features_, features_) =
          r * theta(j) * k * inv_h2_ * (x - center(theta, j));
    }
  }

 private:
  Index features_;
  Index centers_;
  double inv_h2_;
  double mu_;
};

class Constant final : public LossFamily {
 public:
  explicit Constant(double c) : LossFamily(ThetaSet::point(Vec::Constant(1, c))) {}

  Family family() const override { return Family::constant; }
  Index theta_dim() const override { return 1; }
  Index xi_dim() const override { return 0; }

  double value(const Vec& theta, ConstVecRef) const override { return theta(0); }
  double value_grad_xi(const Vec& theta, ConstVecRef, VecRef grad) const override {
    grad.setZero();
    return theta(0);
  }
  void grad_theta(const Vec&, ConstVecRef, VecRef grad) const override { grad.setOnes(); }
  void values(const Vec& theta, const Mat&, VecRef out) const override { out.setConstant(theta(0)); }

  std::optional<ArgmaxSet> closed_form_argmax(const Vec& theta,
                                              const SampleSpace&) const override {
    return ArgmaxSet::whole_space(theta(0));
  }
  std::optional<Smoothness> smoothness(const Vec&, const SampleSpace&) const override {
    return Smoothness{0.0, 0.0};
  }
};

}  // namespace

std::shared_ptr<const LossFamily> logistic_family(Index dims, ThetaSet theta_set) {
  require(theta_set.kind() != ThetaSet::Kind::point, "logistic: Theta must not be a point");
  return std::make_shared<Logistic>(dims, std::move(theta_set));
}

std::shared_ptr<const LossFamily> linear_regression_family(Index feature_dims,
                                                           ThetaSet theta_set) {
  return std::make_shared<LinearRegression>(feature_dims, std::move(theta_set));
}

std::shared_ptr<const LossFamily> kernel_ridge_family(Index feature_dims, Index centers,
                                                      double bandwidth, double ridge_mu,
                                                      ThetaSet theta_set) {
  return std::make_shared<KernelRidge>(feature_dims, centers, bandwidth, ridge_mu,
                                       std::move(theta_set));
}

std::shared_ptr<const LossFamily> constant_family(double value) {
  require(std::isfinite(value), "constant loss must be finite");
  return std::make_shared<Constant>(value);
}

// ---------------------------------------------------------------------------
// LossModel

LossModel::LossModel(std::shared_ptr<const LossFamily> family, Vec theta)
    : family_(std::move(family)), theta_(std::move(theta)) {
  require(family_ != nullptr, "LossModel: null family");
  check_theta_size(theta_, family_->theta_dim());
  const Family f = family_->family();
  if (f == Family::logistic || f == Family::linear_regression) {
    require(theta_.norm() > 0.0, "LossModel: theta = 0 is excluded for this family");
  }
}

LossModel LossModel::with_theta(Vec theta) const { return LossModel(family_, std::move(theta)); }

Vec LossModel::grad_xi(ConstVecRef xi) const {
  Vec g(xi.size());
  family_->value_grad_xi(theta_, xi, g);
  return g;
}

Vec LossModel::grad_theta(ConstVecRef xi) const {
  Vec g(theta_.size());
  family_->grad_theta(theta_, xi, g);
  return g;
}

double LossModel::nonnegativity_shift(const SampleSpace& space) const {
  // Probe grid: center, axis extremes, and the projected corners of the bounding box (d <= 8).
  Vec lo;
  Vec hi;
  space.bounding_box(lo, hi);
  const Index d = space.dims();
  double lowest = value(space.project(0.5 * (lo + hi)));
  Vec p(d);
  for (Index j = 0; j < d; ++j) {
    for (double side : {0.0, 1.0}) {
      p = 0.5 * (lo + hi);
      p(j) = side == 0.0 ? lo(j) : hi(j);
      lowest = std::min(lowest, value(space.project(p)));
    }
  }
  if (d <= 8) {
    for (Index mask = 0; mask < (Index{1} << d); ++mask) {
      for (Index j = 0; j < d; ++j) p(j) = (mask >> j) & 1 ? hi(j) : lo(j);
      lowest = std::min(lowest, value(space.project(p)));
    }
  }
  return std::max(0.0, -lowest);
}

// ---------------------------------------------------------------------------
// argmax_set

ArgmaxSet argmax_set(const LossModel& model, const SampleSpace& space,
                     const ArgmaxOptions& options) {
  if (auto closed = model.closed_form_argmax(space)) return *closed;
  if (!options.allow_numeric) {
    fail(ErrorCode::unimplemented, "argmax_set: no closed form for family '" +
                                       std::string(to_string(model.kind())) + "'");
  }

  const Index d = space.dims();
  std::vector<Vec> starts;
  if (d <= 2) {
    // Seed with the best few points of a dense probe grid.
    Vec lo;
    Vec hi;
    space.bounding_box(lo, hi);
    const int g = std::max(options.grid_per_dim, 3);
    std::vector<std::pair<double, Vec>> probes;
    Vec p(d);
    const Index total = d == 1 ? g : Index{g} * g;
    for (Index k = 0; k < total; ++k) {
      Index rem = k;
      for (Index j = 0; j < d; ++j) {
        const Index idx = rem % g;
        rem /= g;
        p(j) = lo(j) + (hi(j) - lo(j)) * static_cast<double>(idx) / (g - 1);
      }
      if (!space.contains(p, 0.0)) continue;
      probes.emplace_back(model.value(p), p);
    }
    std::sort(probes.begin(), probes.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; k < probes.size() && k < 16; ++k) starts.push_back(probes[k].second);
  }
  RngStream rng = RngStream::derive(0x5eedULL, StreamPurpose::generic, {7});
  for (int k = 0; k < options.random_starts; ++k) starts.push_back(space.sample_uniform(rng));
  starts.push_back(space.project(space.center()));

  AscentOptions ascent;
  ascent.tol = 1e-10;
  ascent.max_iters = 5000;
  const Vec origin = space.project(space.center());
  std::vector<AscentResult> found;
  double best = -std::numeric_limits<double>::infinity();
  for (const Vec& s : starts) {
    AscentResult r = projected_ascent(model, space, origin, 0.0, s, ascent);
    best = std::max(best, r.loss);
    found.push_back(std::move(r));
  }
  // Keep distinct maximizers within tolerance of the best value.
  const double slack = std::max(options.tol, 1e-9 * std::abs(best));
  std::vector<Vec> kept;
  for (const AscentResult& r : found) {
    if (r.loss < best - slack) continue;
    bool duplicate = false;
    for (const Vec& k : kept) duplicate = duplicate || (k - r.point).norm() < 1e-5 * space.diameter();
    if (!duplicate) kept.push_back(r.point);
  }
  Mat pts(d, static_cast<Index>(kept.size()));
  for (std::size_t k = 0; k < kept.size(); ++k) pts.col(static_cast<Index>(k)) = kept[k];
  return ArgmaxSet::points(std::move(pts), best);
}

}  // namespace wdro
