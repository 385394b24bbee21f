#pragma once

#include <Eigen/Dense>

namespace wdro {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;
using VecRef = Eigen::Ref<Vec>;
using ConstVecRef = Eigen::Ref<const Vec>;

/// Empirical sample: one point per column.
struct Dataset {
  Mat points;

  Index size() const { return points.cols(); }
  Index dims() const { return points.rows(); }
  auto point(Index i) const { return points.col(i); }
};

}  // namespace wdro
