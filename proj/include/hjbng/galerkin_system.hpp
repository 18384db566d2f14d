#pragma once

#include <Eigen/Dense>

namespace hjbng {

/// Projected dynamics M theta' = V for a trial family with p + 1 parameters.
struct GalerkinSystem {
  Eigen::MatrixXd M;
  Eigen::VectorXd V;

  int p() const { return static_cast<int>(M.rows()) - 1; }
};

}  // namespace hjbng
