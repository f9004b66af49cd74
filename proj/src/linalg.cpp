#include "linalg.hpp"

#include "common.hpp"

#include <cmath>
#include <limits>

namespace slmrf {

namespace {

bool factor_with_rescue(Eigen::MatrixXd& a, Eigen::LLT<Eigen::MatrixXd>& llt, bool& jittered) {
  jittered = false;
  llt.compute(a);
  if (llt.info() == Eigen::Success) return true;
  const auto n = a.rows();
  if (n == 0) return false;
  const double jitter = 1e-10 * a.trace() / static_cast<double>(n);
  if (!(jitter > 0.0)) return false;
  a.diagonal().array() += jitter;
  llt.compute(a);
  jittered = true;
  return llt.info() == Eigen::Success;
}

}  // namespace

Cholesky::Cholesky(Eigen::MatrixXd a, const std::string& what) {
  if (!factor_with_rescue(a, llt_, jittered_)) {
    throw SingularityError(what + " is not positive definite");
  }
}

double Cholesky::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Eigen::MatrixXd Cholesky::inverse() const {
  return llt_.solve(Eigen::MatrixXd::Identity(size(), size()));
}

bool try_cholesky(Eigen::MatrixXd a, Eigen::LLT<Eigen::MatrixXd>& out) {
  bool jittered = false;
  return factor_with_rescue(a, out, jittered);
}

double scaled_condition_number(const Eigen::MatrixXd& x) {
  if (x.cols() == 0) return 1.0;
  Eigen::MatrixXd s = x;
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    const double norm = s.col(j).norm();
    if (norm == 0.0) return std::numeric_limits<double>::infinity();
    s.col(j) /= norm;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(s);
  const auto& sv = svd.singularValues();
  const double smin = sv[sv.size() - 1];
  if (smin <= 0.0 || sv.size() < s.cols()) return std::numeric_limits<double>::infinity();
  return sv[0] / smin;
}

}  // namespace slmrf
