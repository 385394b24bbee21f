#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "wdro/geometry.hpp"
#include "wdro/types.hpp"

namespace wdro {

enum class Family { logistic, linear_regression, kernel_ridge, constant };

std::string_view to_string(Family family);
/// Throws ErrorCode::unimplemented for names outside the supported families.
Family parse_family(std::string_view name);

/// Parameter set Theta: an annulus r_lo <= |theta| <= r_hi, a box, or a single point.
class ThetaSet {
 public:
  enum class Kind { annulus, box, point };

  static ThetaSet annulus(double r_lo, double r_hi);
  static ThetaSet box(Vec lo, Vec hi);
  static ThetaSet point(Vec value);

  Kind kind() const { return kind_; }
  double r_lo() const { return r_lo_; }
  double r_hi() const { return r_hi_; }

  Vec project(ConstVecRef theta) const;
  bool contains(ConstVecRef theta, double tol = 1e-12) const;

 private:
  Kind kind_ = Kind::point;
  double r_lo_ = 0.0;
  double r_hi_ = 0.0;
  Vec lo_;
  Vec hi_;
  Vec point_;
};

/// Smoothness metadata of xi -> f(theta, xi) on Xi.
struct Smoothness {
  double gradient_lipschitz = 0.0;  // M
  double gradient_bound = 0.0;      // G
};

/// Maximizer set of xi -> f(theta, xi) over Xi: either finitely many points or all of Xi.
class ArgmaxSet {
 public:
  static ArgmaxSet whole_space(double max_value);
  static ArgmaxSet points(Mat points, double max_value);

  bool is_whole_space() const { return whole_space_; }
  const Mat& point_matrix() const { return points_; }
  double max_value() const { return max_value_; }

  /// d(xi, argmax)^2 / 2.
  double half_sq_distance(ConstVecRef xi) const;
  /// Nearest maximizer to `query` (the projection of the query when argmax = Xi).
  Vec representative(const SampleSpace& space, ConstVecRef query) const;

 private:
  bool whole_space_ = false;
  Mat points_;
  double max_value_ = 0.0;
};

/// A parametric loss family f(theta, xi) with hand-coded derivatives.
class LossFamily {
 public:
  virtual ~LossFamily() = default;

  virtual Family family() const = 0;
  virtual Index theta_dim() const = 0;
  /// Required dimension of xi, or 0 when any dimension is accepted.
  virtual Index xi_dim() const = 0;

  virtual double value(const Vec& theta, ConstVecRef xi) const = 0;
  /// Returns f and writes grad_xi f into `grad`.
  virtual double value_grad_xi(const Vec& theta, ConstVecRef xi, VecRef grad) const = 0;
  virtual void grad_theta(const Vec& theta, ConstVecRef xi, VecRef grad) const = 0;

  /// f at every column of `points`.
  virtual void values(const Vec& theta, const Mat& points, VecRef out) const;
  /// sum_s weights(s) * grad_theta f(theta, points.col(s)).
  virtual Vec weighted_grad_theta(const Vec& theta, const Mat& points, ConstVecRef weights) const;

  virtual std::optional<ArgmaxSet> closed_form_argmax(const Vec& theta,
                                                      const SampleSpace& space) const;
  virtual std::optional<Smoothness> smoothness(const Vec& theta, const SampleSpace& space) const;

  const ThetaSet& theta_set() const { return theta_set_; }

 protected:
  explicit LossFamily(ThetaSet theta_set) : theta_set_(std::move(theta_set)) {}

 private:
  ThetaSet theta_set_;
};

/// f(theta, xi) = log(1 + exp(<xi, theta>)); xi stands for -y * x.
std::shared_ptr<const LossFamily> logistic_family(Index dims, ThetaSet theta_set);
/// f(theta, (x, y)) = (<theta, x> - y)^2 / 2.
std::shared_ptr<const LossFamily> linear_regression_family(Index feature_dims, ThetaSet theta_set);
/// f(theta, (x, y)) = (sum_j alpha_j k(x, x_j) - y)^2 / 2 + mu |alpha|^2 / 2 with a Gaussian
/// kernel of the given bandwidth; theta = (alpha_1..alpha_m, x_1..x_m).
std::shared_ptr<const LossFamily> kernel_ridge_family(Index feature_dims, Index centers,
                                                      double bandwidth, double ridge_mu,
                                                      ThetaSet theta_set);
/// f(theta, xi) = theta(0); Theta is the single point {c}.
std::shared_ptr<const LossFamily> constant_family(double value);

/// A loss family bound to one parameter value. Immutable; cheap to copy.
class LossModel {
 public:
  LossModel(std::shared_ptr<const LossFamily> family, Vec theta);

  const LossFamily& family() const { return *family_; }
  const std::shared_ptr<const LossFamily>& family_ptr() const { return family_; }
  Family kind() const { return family_->family(); }
  const Vec& theta() const { return theta_; }

  /// Same family, new parameter (not projected).
  LossModel with_theta(Vec theta) const;

  double value(ConstVecRef xi) const { return family_->value(theta_, xi); }
  double value_grad_xi(ConstVecRef xi, VecRef grad) const {
    return family_->value_grad_xi(theta_, xi, grad);
  }
  Vec grad_xi(ConstVecRef xi) const;
  Vec grad_theta(ConstVecRef xi) const;
  void values(const Mat& points, VecRef out) const { family_->values(theta_, points, out); }

  std::optional<ArgmaxSet> closed_form_argmax(const SampleSpace& space) const {
    return family_->closed_form_argmax(theta_, space);
  }
  std::optional<Smoothness> smoothness(const SampleSpace& space) const {
    return family_->smoothness(theta_, space);
  }

  /// Constant a >= 0 such that f + a >= 0 on a coarse probe grid of `space`.
  /// Every dual quantity is shift-equivariant, so reported risks use the unshifted loss.
  double nonnegativity_shift(const SampleSpace& space) const;

 private:
  std::shared_ptr<const LossFamily> family_;
  Vec theta_;
};

struct ArgmaxOptions {
  bool allow_numeric = true;
  int random_starts = 64;
  int grid_per_dim = 201;  // dense probe grid, used for d <= 2
  double tol = 1e-9;
};

/// Maximizers of f(theta, .) over Xi: closed form when the family provides one,
/// otherwise multistart projected ascent seeded by a probe grid (d <= 2) and
/// random points. Throws unimplemented when no closed form exists and
/// numeric fallback is disabled.
ArgmaxSet argmax_set(const LossModel& model, const SampleSpace& space,
                     const ArgmaxOptions& options = {});

}  // namespace wdro
