#include "lm.hpp"

#include "common.hpp"
#include "linalg.hpp"
#include "slm.hpp"

#include <cmath>
#include <numbers>

namespace slmrf {

OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  OlsFit f;
  f.n = y.size();
  f.k = x.cols();
  if (x.cols() == 0) {
    f.rss = y.squaredNorm();
    return f;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  f.coef = qr.solve(y);
  f.rank = qr.rank();
  f.rss = (y - x * f.coef).squaredNorm();
  return f;
}

double lm_aic(double rss, Eigen::Index n, Eigen::Index k, double y_variance) {
  const double nd = static_cast<double>(n);
  const double floor = 1e-12 * y_variance * nd;
  const double r = std::max(rss, floor > 0.0 ? floor : 1e-300);
  return nd * (std::log(2.0 * std::numbers::pi) + 1.0) + nd * std::log(r / nd) +
         2.0 * static_cast<double>(k + 1);
}

double lm_aic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const auto f = ols(x, y);
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / static_cast<double>(y.size());
  return lm_aic(f.rss, f.n, f.k, var);
}

Eigen::VectorXd LinearModel::t_stats() const {
  Eigen::VectorXd t(beta.size());
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    t[j] = beta[j] / std::sqrt(sigma2 * xtx_inv(j, j));
  }
  return t;
}

PredictionResult LinearModel::predict(const Eigen::VectorXd& x0) const {
  PredictionResult r;
  r.mean = x0.dot(beta);
  r.variance = sigma2 * (1.0 + x0.dot(xtx_inv * x0));
  return r;
}

std::vector<PredictionResult> LinearModel::predict(const SpatialDataset& sites) const {
  const Eigen::MatrixXd x = build_design(recipe, sites);
  if (x.cols() != beta.size()) throw InputError("prediction design does not match the model");
  std::vector<PredictionResult> out;
  out.reserve(sites.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.push_back(predict(x.row(i).transpose()));
  return out;
}

LinearModel fit_lm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, DesignRecipe recipe) {
  const auto n = x.rows();
  const auto k = x.cols();
  if (n <= k) {
    throw FitError("linear model needs more rows (" + std::to_string(n) + ") than columns (" +
                   std::to_string(k) + ")");
  }
  LinearModel m;
  m.recipe = std::move(recipe);
  m.n = n;
  Eigen::MatrixXd xtx = x.transpose() * x;
  const Cholesky chol(xtx, "X'X");
  m.beta = chol.solve(Eigen::VectorXd(x.transpose() * y));
  m.xtx_inv = chol.inverse();
  m.sigma2 = (y - x * m.beta).squaredNorm() / static_cast<double>(n - k);
  return m;
}

LinearModel fit_lm(const SpatialDataset& data, const DesignRecipe& recipe) {
  if (!data.has_response()) throw InputError("dataset has no response column");
  const Eigen::MatrixXd x0 = build_design(recipe, data);
  const DesignRecipe kept = drop_aliased(recipe, x0);
  const Eigen::MatrixXd x = kept.width() == recipe.width() ? x0 : build_design(kept, data);
  return fit_lm(x, data.response, kept);
}

}  // namespace slmrf
