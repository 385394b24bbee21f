#pragma once

#include <string_view>

#include "wdro/rng.hpp"
#include "wdro/types.hpp"

namespace wdro {

enum class SpaceKind { ball, box, ball_x_interval };

std::string_view to_string(SpaceKind kind);

/// Compact convex sample space Xi.
///
/// Three shapes are supported: a Euclidean ball, an axis-aligned box, and the
/// product of a centered feature ball with a target interval [-B, B] (the
/// target is the last coordinate). Each space carries an interior margin
/// gamma; synthetic data is generated inside the gamma-shrunken space so that
/// B(xi, gamma) is contained in Xi for every generated point.
class SampleSpace {
 public:
  /// Ball B(center, radius). A negative margin selects the default 0.1 * radius.
  static SampleSpace ball(Vec center, double radius, double margin = -1.0);
  static SampleSpace box(Vec lo, Vec hi, double margin = -1.0);
  /// B(0, radius) in R^feature_dims times [-y_bound, y_bound].
  static SampleSpace ball_x_interval(Index feature_dims, double radius, double y_bound,
                                     double margin = -1.0);

  SpaceKind kind() const { return kind_; }
  Index dims() const { return dims_; }
  double margin() const { return margin_; }
  double radius() const { return radius_; }
  double y_bound() const { return y_bound_; }
  const Vec& center() const { return center_; }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }

  /// Euclidean projection onto Xi.
  Vec project(ConstVecRef x) const;
  void project_inplace(VecRef x) const;

  bool contains(ConstVecRef x, double tol = 1e-12) const;

  /// Distance from an interior point to the complement of Xi (0 outside).
  double boundary_distance(ConstVecRef x) const;

  double diameter() const;

  /// Same shape shrunk by `gamma` so that shrunk.contains(x) implies B(x, gamma) in Xi.
  SampleSpace shrunk(double gamma) const;

  Vec sample_uniform(RngStream& rng) const;

  /// Axis-aligned bounding box of Xi.
  void bounding_box(Vec& lo, Vec& hi) const;

 private:
  SampleSpace() = default;
  void check_dims(ConstVecRef x) const {
    if (x.size() != dims_) [[unlikely]] dims_mismatch(x.size());
  }
  [[noreturn]] void dims_mismatch(Index got) const;

  SpaceKind kind_ = SpaceKind::ball;
  Index dims_ = 0;
  double margin_ = 0.0;
  double radius_ = 0.0;
  double y_bound_ = 0.0;
  Vec center_;
  Vec lo_;
  Vec hi_;
};

/// Transport cost c(x, y) = |x - y|^2 / 2.
double cost(ConstVecRef x, ConstVecRef y);

struct ReferenceSamplingStats {
  Index proposals = 0;
  Index accepted = 0;
  double acceptance_rate() const {
    return proposals == 0 ? 1.0 : static_cast<double>(accepted) / static_cast<double>(proposals);
  }
};

/// Draws `count` i.i.d. points from the truncated Gaussian reference
/// pi_sigma(. | center), density proportional to 1{z in Xi} exp(-|center - z|^2 / (2 sigma^2)),
/// by rejection from the untruncated Gaussian. Throws sampling_stalled when the
/// acceptance rate falls below `acceptance_floor` after 10 / acceptance_floor proposals.
Mat sample_reference(const SampleSpace& space, ConstVecRef center, double sigma, Index count,
                     RngStream& rng, double acceptance_floor = 1e-3,
                     ReferenceSamplingStats* stats = nullptr);

}  // namespace wdro
