#include "wdro/data.hpp"

#include <algorithm>
#include <cmath>

#include "wdro/errors.hpp"

namespace wdro {

namespace {

constexpr Index kMaxAttempts = 1000000;

}  // namespace

DataGenerator::DataGenerator(const ExperimentConfig& config)
    : space_(config.space.build()),
      inner_(space_.shrunk(space_.margin())),
      generator_(config.data.generator),
      scale_(config.data.scale),
      noise_(config.data.noise) {
  const auto family = config.model.build_family(space_);
  family_ = family->family();
  const double gamma = space_.margin();
  const bool regression = family_ == Family::linear_regression || family_ == Family::kernel_ridge;
  features_ = regression ? space_.dims() - 1 : space_.dims();
  if (regression) {
    feature_ball_ = true;
    feature_center_ = Vec::Zero(features_);
    feature_radius_ = space_.radius() - gamma;
  } else if (space_.kind() == SpaceKind::ball) {
    feature_ball_ = true;
    feature_center_ = space_.center();
    feature_radius_ = space_.radius() - gamma;
  } else {
    feature_ball_ = false;
    inner_.bounding_box(feature_lo_, feature_hi_);
    feature_center_ = 0.5 * (feature_lo_ + feature_hi_);
    feature_radius_ = 0.0;
  }
  if (feature_ball_) {
    feature_lo_ = feature_center_.array() - feature_radius_;
    feature_hi_ = feature_center_.array() + feature_radius_;
  }
  loc_ = config.data.loc.size() == 0 ? feature_center_ : config.data.loc;
  if (config.data.theta_true.size() == 0) {
    theta_true_ = Vec::Zero(features_);
    theta_true_(0) = 1.0;
  } else {
    theta_true_ = config.data.theta_true;
  }
  require(loc_.size() == features_, "data.loc has the wrong dimension");
  require(family_ == Family::constant || theta_true_.size() == features_,
          "data.theta_true has the wrong dimension");
}

Vec DataGenerator::draw_features(RngStream& rng) const {
  Vec x(features_);
  for (Index attempt = 0; attempt < kMaxAttempts; ++attempt) {
    for (Index j = 0; j < features_; ++j) {
      x(j) = generator_ == "uniform"
                 ? feature_lo_(j) + (feature_hi_(j) - feature_lo_(j)) * rng.uniform()
                 : loc_(j) + scale_ * rng.normal();
    }
    const bool inside = feature_ball_
                            ? (x - feature_center_).norm() <= feature_radius_
                            : ((x.array() >= feature_lo_.array()) && (x.array() <= feature_hi_.array())).all();
    if (inside) return x;
  }
  fail(ErrorCode::sampling_stalled, "data generation: feature rejection sampling stalled");
}

Vec DataGenerator::draw(RngStream& rng) const {
  for (Index attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const Vec x = draw_features(rng);
    Vec xi(space_.dims());
    switch (family_) {
      case Family::logistic: {
        const double score = theta_true_.dot(x) + noise_ * rng.normal();
        const double label = score >= 0.0 ? 1.0 : -1.0;
        xi = -label * x;
        break;
      }
      case Family::linear_regression:
      case Family::kernel_ridge: {
        const double bound = space_.y_bound() - space_.margin();
        const double y = theta_true_.dot(x) + noise_ * rng.normal();
        xi.head(features_) = x;
        xi(features_) = std::clamp(y, -bound, bound);
        break;
      }
      case Family::constant:
        xi = x;
        break;
    }
    if (inner_.contains(xi, 1e-12)) return xi;
  }
  fail(ErrorCode::sampling_stalled, "data generation: rejection into the shrunken space stalled");
}

Dataset DataGenerator::generate(Index n, RngStream& rng) const {
  require(n >= 1, "data generation: n must be >= 1");
  Dataset data;
  data.points.resize(space_.dims(), n);
  for (Index i = 0; i < n; ++i) data.points.col(i) = draw(rng);
  return data;
}

Dataset generate_dataset(const ExperimentConfig& config, Index replicate, Index n) {
  const Index count = n < 0 ? config.data.n : n;
  const DataGenerator generator(config);
  RngStream rng = RngStream::derive(config.experiment.seed, StreamPurpose::data,
                                    {static_cast<std::uint64_t>(replicate),
                                     static_cast<std::uint64_t>(count)});
  return generator.generate(count, rng);
}

Mat draw_reference_sample(const ExperimentConfig& config, Index count, StreamPurpose purpose) {
  const DataGenerator generator(config);
  RngStream rng = RngStream::derive(config.experiment.seed, purpose);
  return generator.generate(count, rng).points;
}

}  // namespace wdro
