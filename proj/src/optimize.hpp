#pragma once

#include <Eigen/Dense>

#include <functional>

namespace slmrf {

struct NelderMeadOptions {
  double initial_step = 0.5;
  // Stop when the spread of simplex values is below reltol * (|f| + reltol),
  // the same rule as R's optim().
  double reltol = 1e-8;
  int max_evaluations = 500;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Derivative-free simplex minimization. Non-finite objective values are
// treated as +inf so the simplex contracts away from invalid regions.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start, const NelderMeadOptions& opts = {});

}  // namespace slmrf
