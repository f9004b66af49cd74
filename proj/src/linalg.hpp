#pragma once

#include <Eigen/Dense>

#include <string>

namespace slmrf {

// Cholesky factorization with the bounded rescue: on failure, add
// 1e-10 * trace(A) / n to the diagonal and retry once, then throw
// SingularityError naming `what`.
class Cholesky {
 public:
  Cholesky() = default;
  Cholesky(Eigen::MatrixXd a, const std::string& what);

  Eigen::Index size() const { return llt_.rows(); }
  bool jittered() const { return jittered_; }
  double log_det() const;

  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const { return llt_.solve(b); }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return llt_.solve(b); }
  // L^{-1} b
  Eigen::MatrixXd half_solve(const Eigen::MatrixXd& b) const {
    return llt_.matrixL().solve(b);
  }
  // L b
  Eigen::MatrixXd lower_times(const Eigen::MatrixXd& b) const { return llt_.matrixL() * b; }
  Eigen::MatrixXd inverse() const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  bool jittered_ = false;
};

// Non-throwing variant used inside optimizers: returns false if both the
// plain and jittered factorizations fail.
bool try_cholesky(Eigen::MatrixXd a, Eigen::LLT<Eigen::MatrixXd>& out);

// Condition number of X after scaling each column to unit norm.
double scaled_condition_number(const Eigen::MatrixXd& x);

}  // namespace slmrf
