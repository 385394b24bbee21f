#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "wdro/dual.hpp"
#include "wdro/types.hpp"

namespace wdro {

/// One evaluation of lambda -> mean_i phi(f, xi_i, lambda, eps, sigma).
struct DualEval {
  double lambda = 0.0;
  double mean_phi = 0.0;
  double slope = 0.0;      // mean_i d phi_i / d lambda
  double curvature = 0.0;  // mean_i d^2 phi_i / d lambda^2 (eps > 0 only)
  double stderr = 0.0;     // Monte Carlo standard error of mean_phi (eps > 0, when requested)
  double min_ess = 0.0;
  bool low_ess = false;
  bool converged = true;

  double objective(double rho) const { return lambda * rho * rho + mean_phi; }
  double objective_slope(double rho) const { return rho * rho + slope; }
};

/// The sample-averaged dual generator over a fixed dataset.
///
/// For eps > 0 the reference draws pi_sigma(. | xi_i) are taken once at
/// construction and reused for every lambda and every theta, so the objective
/// is a smooth deterministic function of (theta, lambda). For eps = 0 each
/// data point keeps a fixed set of random ascent starts and a warm start from
/// the previous evaluation.
class DualObjective {
 public:
  DualObjective(const LossModel& model, const SampleSpace& space, const Dataset& data,
                double eps, double sigma, const McBudget& budget, std::uint64_t seed);

  /// Rebinds the objective to a new parameter of the same family.
  void set_model(const LossModel& model);
  const LossModel& model() const { return model_; }
  const SampleSpace& space() const { return space_; }
  const Dataset& data() const { return data_; }
  double eps() const { return eps_; }
  double sigma() const { return sigma_; }

  /// lambda = +infinity is accepted for eps = 0 and returns the empirical mean of f.
  DualEval evaluate(double lambda, bool with_stderr = false);

  /// (1/n) sum_i of the envelope gradient in theta at `lambda`: the Gibbs
  /// average of grad_theta f for eps > 0, grad_theta f at the inner maximizer for eps = 0.
  Vec envelope_grad_theta(double lambda);

  /// Inner maximizers from the most recent eps = 0 evaluation, one column per data point.
  const Mat& inner_points() const { return inner_points_; }

  double empirical_mean_loss() const;
  /// (1/2) mean_i |grad_xi f(xi_i)|^2.
  double half_mean_sq_grad() const;

  Index evaluations() const { return evaluations_; }

 private:
  void refresh_losses();

  LossModel model_;
  SampleSpace space_;
  Dataset data_;
  double eps_;
  double sigma_;
  McBudget budget_;

  // eps > 0: frozen reference draws, S per data point, column-blocked.
  Index per_xi_ = 0;
  Mat ref_points_;
  Vec ref_costs_;
  Vec ref_losses_;

  // eps = 0: per-point random starts and warm starts.
  std::vector<Mat> random_starts_;
  Mat inner_points_;
  bool have_warm_ = false;
  std::optional<ArgmaxSet> argmax_;
  std::optional<Smoothness> smoothness_;

  std::optional<double> last_lambda_;
  Vec last_weights_;  // eps > 0 Gibbs weights at last_lambda_, length n * S
  Index evaluations_ = 0;
};

}  // namespace wdro
