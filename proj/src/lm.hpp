#pragma once

#include "core.hpp"
#include "kriging.hpp"

#include <Eigen/Dense>

namespace slmrf {

// Ordinary least squares summary. Rank-deficient designs are solved by
// column-pivoted QR; `rank` reports the numerical rank.
struct OlsFit {
  Eigen::VectorXd coef;
  double rss = 0.0;
  Eigen::Index rank = 0;
  Eigen::Index n = 0;
  Eigen::Index k = 0;
};

OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// Gaussian AIC of an OLS fit with k coefficients:
//   n (log(2 pi) + 1) + n log(RSS / n) + 2 (k + 1)
// RSS is floored at 1e-12 * var(y) * n so perfect fits stay finite.
double lm_aic(double rss, Eigen::Index n, Eigen::Index k, double y_variance);
double lm_aic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// Linear model with t statistics and Gaussian prediction intervals using the
// unbiased residual variance and the leverage term.
struct LinearModel {
  DesignRecipe recipe;
  Eigen::VectorXd beta;
  Eigen::MatrixXd xtx_inv;
  double sigma2 = 0.0;  // RSS / (n - k)
  Eigen::Index n = 0;

  Eigen::VectorXd t_stats() const;
  PredictionResult predict(const Eigen::VectorXd& x0) const;
  std::vector<PredictionResult> predict(const SpatialDataset& sites) const;
};

LinearModel fit_lm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, DesignRecipe recipe = {});
LinearModel fit_lm(const SpatialDataset& data, const DesignRecipe& recipe);

}  // namespace slmrf
