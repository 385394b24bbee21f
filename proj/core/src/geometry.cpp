#include "wdro/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wdro/errors.hpp"

namespace wdro {

std::string_view to_string(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::ball: return "ball";
    case SpaceKind::box: return "box";
    case SpaceKind::ball_x_interval: return "ball_x_interval";
  }
  return "unknown";
}

SampleSpace SampleSpace::ball(Vec center, double radius, double margin) {
  require(center.size() > 0, "ball: dimension must be positive");
  require(std::isfinite(radius) && radius > 0.0, "ball: radius must be positive");
  SampleSpace s;
  s.kind_ = SpaceKind::ball;
  s.dims_ = center.size();
  s.center_ = std::move(center);
  s.radius_ = radius;
  s.margin_ = margin < 0.0 ? 0.1 * radius : margin;
  require(s.margin_ < radius, "ball: margin must be smaller than the radius");
  return s;
}

SampleSpace SampleSpace::box(Vec lo, Vec hi, double margin) {
  require(lo.size() > 0 && lo.size() == hi.size(), "box: lo/hi dimension mismatch");
  require(((hi - lo).array() > 0.0).all(), "box: hi must exceed lo in every coordinate");
  SampleSpace s;
  s.kind_ = SpaceKind::box;
  s.dims_ = lo.size();
  const double half_min = 0.5 * (hi - lo).minCoeff();
  s.center_ = 0.5 * (lo + hi);
  s.lo_ = std::move(lo);
  s.hi_ = std::move(hi);
  s.margin_ = margin < 0.0 ? 0.1 * half_min : margin;
  require(s.margin_ < half_min, "box: margin must be smaller than the half width");
  return s;
}

SampleSpace SampleSpace::ball_x_interval(Index feature_dims, double radius, double y_bound,
                                         double margin) {
  require(feature_dims > 0, "ball_x_interval: feature dimension must be positive");
  require(std::isfinite(radius) && radius > 0.0, "ball_x_interval: radius must be positive");
  require(std::isfinite(y_bound) && y_bound > 0.0, "ball_x_interval: y_bound must be positive");
  SampleSpace s;
  s.kind_ = SpaceKind::ball_x_interval;
  s.dims_ = feature_dims + 1;
  s.center_ = Vec::Zero(s.dims_);
  s.radius_ = radius;
  s.y_bound_ = y_bound;
  s.margin_ = margin < 0.0 ? 0.1 * radius : margin;
  require(s.margin_ < std::min(radius, y_bound),
          "ball_x_interval: margin must be smaller than radius and y_bound");
  return s;
}

void SampleSpace::dims_mismatch(Index got) const {
  fail(ErrorCode::invalid_argument,
       "dimension mismatch: expected " + std::to_string(dims_) + ", got " + std::to_string(got));
}

void SampleSpace::project_inplace(VecRef x) const {
  check_dims(x);
  switch (kind_) {
    case SpaceKind::ball: {
      const double r = (x - center_).norm();
      if (r > radius_) x = center_ + (radius_ / r) * (x - center_);
      break;
    }
    case SpaceKind::box:
      x = x.cwiseMax(lo_).cwiseMin(hi_);
      break;
    case SpaceKind::ball_x_interval: {
      auto feat = x.head(dims_ - 1);
      const double r = feat.norm();
      if (r > radius_) feat *= radius_ / r;
      x(dims_ - 1) = std::clamp(x(dims_ - 1), -y_bound_, y_bound_);
      break;
    }
  }
}

Vec SampleSpace::project(ConstVecRef x) const {
  Vec out = x;
  project_inplace(out);
  return out;
}

bool SampleSpace::contains(ConstVecRef x, double tol) const {
  check_dims(x);
  switch (kind_) {
    case SpaceKind::ball:
      return (x - center_).norm() <= radius_ + tol;
    case SpaceKind::box:
      return ((x - lo_).array() >= -tol).all() && ((hi_ - x).array() >= -tol).all();
    case SpaceKind::ball_x_interval:
      return x.head(dims_ - 1).norm() <= radius_ + tol &&
             std::abs(x(dims_ - 1)) <= y_bound_ + tol;
  }
  return false;
}

double SampleSpace::boundary_distance(ConstVecRef x) const {
  check_dims(x);
  double d = 0.0;
  switch (kind_) {
    case SpaceKind::ball:
      d = radius_ - (x - center_).norm();
      break;
    case SpaceKind::box:
      d = std::min((x - lo_).minCoeff(), (hi_ - x).minCoeff());
      break;
    case SpaceKind::ball_x_interval:
      d = std::min(radius_ - x.head(dims_ - 1).norm(), y_bound_ - std::abs(x(dims_ - 1)));
      break;
  }
  return std::max(d, 0.0);
}

double SampleSpace::diameter() const {
  switch (kind_) {
    case SpaceKind::ball: return 2.0 * radius_;
    case SpaceKind::box: return (hi_ - lo_).norm();
    case SpaceKind::ball_x_interval:
      return std::sqrt(4.0 * radius_ * radius_ + 4.0 * y_bound_ * y_bound_);
  }
  return 0.0;
}

SampleSpace SampleSpace::shrunk(double gamma) const {
  require(gamma >= 0.0, "shrunk: gamma must be nonnegative");
  SampleSpace s = *this;
  switch (kind_) {
    case SpaceKind::ball:
      require(gamma < radius_, "shrunk: gamma exceeds the radius");
      s.radius_ = radius_ - gamma;
      break;
    case SpaceKind::box:
      require(2.0 * gamma < (hi_ - lo_).minCoeff(), "shrunk: gamma exceeds the half width");
      s.lo_ = lo_.array() + gamma;
      s.hi_ = hi_.array() - gamma;
      break;
    case SpaceKind::ball_x_interval:
      require(gamma < radius_ && gamma < y_bound_, "shrunk: gamma exceeds the space");
      s.radius_ = radius_ - gamma;
      s.y_bound_ = y_bound_ - gamma;
      break;
  }
  s.margin_ = 0.0;
  return s;
}

namespace {

// Uniform point in the unit ball of R^k: Gaussian direction, radius U^(1/k).
void unit_ball_uniform(VecRef out, RngStream& rng) {
  const Index k = out.size();
  for (Index j = 0; j < k; ++j) out(j) = rng.normal();
  const double norm = out.norm();
  const double r = std::pow(rng.uniform(), 1.0 / static_cast<double>(k));
  if (norm > 0.0) out *= r / norm;
}

}  // namespace

Vec SampleSpace::sample_uniform(RngStream& rng) const {
  Vec out(dims_);
  switch (kind_) {
    case SpaceKind::ball:
      unit_ball_uniform(out, rng);
      out = center_ + radius_ * out;
      break;
    case SpaceKind::box:
      for (Index j = 0; j < dims_; ++j) out(j) = lo_(j) + (hi_(j) - lo_(j)) * rng.uniform();
      break;
    case SpaceKind::ball_x_interval: {
      auto feat = out.head(dims_ - 1);
      unit_ball_uniform(feat, rng);
      feat *= radius_;
      out(dims_ - 1) = y_bound_ * (2.0 * rng.uniform() - 1.0);
      break;
    }
  }
  return out;
}

void SampleSpace::bounding_box(Vec& lo, Vec& hi) const {
  switch (kind_) {
    case SpaceKind::ball:
      lo = center_.array() - radius_;
      hi = center_.array() + radius_;
      break;
    case SpaceKind::box:
      lo = lo_;
      hi = hi_;
      break;
    case SpaceKind::ball_x_interval:
      lo = Vec::Constant(dims_, -radius_);
      hi = Vec::Constant(dims_, radius_);
      lo(dims_ - 1) = -y_bound_;
      hi(dims_ - 1) = y_bound_;
      break;
  }
}

double cost(ConstVecRef x, ConstVecRef y) {
  require(x.size() == y.size(), "cost: dimension mismatch");
  return 0.5 * (x - y).squaredNorm();
}

Mat sample_reference(const SampleSpace& space, ConstVecRef center, double sigma, Index count,
                     RngStream& rng, double acceptance_floor, ReferenceSamplingStats* stats) {
  require(center.size() == space.dims(), "sample_reference: dimension mismatch");
  require(std::isfinite(sigma) && sigma > 0.0, "sample_reference: sigma must be positive");
  require(count >= 1, "sample_reference: count must be at least 1");

  const Index d = space.dims();
  const Index check_after =
      acceptance_floor > 0.0 ? static_cast<Index>(std::ceil(10.0 / acceptance_floor)) : 0;
  Mat out(d, count);
  Vec z(d);
  Index accepted = 0;
  Index proposals = 0;
  while (accepted < count) {
    for (Index j = 0; j < d; ++j) z(j) = center(j) + sigma * rng.normal();
    ++proposals;
    if (space.contains(z, 0.0)) out.col(accepted++) = z;
    if (check_after > 0 && proposals >= check_after && accepted < count &&
        static_cast<double>(accepted) < acceptance_floor * static_cast<double>(proposals)) {
      fail(ErrorCode::sampling_stalled,
           "sample_reference: acceptance rate " +
               std::to_string(static_cast<double>(accepted) / static_cast<double>(proposals)) +
               " below floor");
    }
  }
  if (stats != nullptr) {
    stats->proposals += proposals;
    stats->accepted += accepted;
  }
  return out;
}

}  // namespace wdro
