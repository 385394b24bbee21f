#pragma once

#include <cstdint>

#include "wdro/config.hpp"
#include "wdro/rng.hpp"
#include "wdro/types.hpp"

namespace wdro {

/// The synthetic distribution P of an experiment config.
///
/// Features x ~ N(loc, scale^2 I) (or uniform) are rejected into the
/// gamma-shrunken feature set. Regression targets are y = <theta_true, x> +
/// noise * N(0, 1), clipped into [-(B - gamma), B - gamma], giving xi = (x, y).
/// Logistic labels y = sign(<theta_true, x> + noise * N(0, 1)) are folded into
/// xi = -y x. The constant family uses xi = x. Every draw satisfies
/// B(xi, gamma) in Xi; draws that would not are rejected.
class DataGenerator {
 public:
  explicit DataGenerator(const ExperimentConfig& config);

  const SampleSpace& space() const { return space_; }
  Vec draw(RngStream& rng) const;
  Dataset generate(Index n, RngStream& rng) const;

 private:
  Vec draw_features(RngStream& rng) const;

  SampleSpace space_;
  SampleSpace inner_;     // gamma-shrunken Xi
  Family family_;
  std::string generator_;
  Index features_;
  Vec loc_;
  double scale_;
  Vec theta_true_;
  double noise_;
  double feature_radius_;  // ball features: radius of the shrunken feature ball
  Vec feature_lo_;
  Vec feature_hi_;
  bool feature_ball_;
  Vec feature_center_;
};

/// Training set of replicate `replicate` with n points (n < 0: data.n), drawn
/// from the stream keyed by (seed, data, replicate, n).
Dataset generate_dataset(const ExperimentConfig& config, Index replicate, Index n = -1);

/// `count` draws from P on the stream keyed by (seed, purpose).
Mat draw_reference_sample(const ExperimentConfig& config, Index count,
                          StreamPurpose purpose = StreamPurpose::true_risk);

}  // namespace wdro
