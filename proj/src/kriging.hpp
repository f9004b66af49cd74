#pragma once

#include "slm.hpp"

#include <utility>
#include <vector>

namespace slmrf {

// Gaussian multiplier for a two-sided interval: 1.645 at 0.90, 1.960 at 0.95.
double gaussian_multiplier(double level);

struct PredictionResult {
  double mean = 0.0;
  double variance = 0.0;

  double se() const;
  std::pair<double, double> interval(double level) const;
};

// Clamps tiny negative variances to zero; warns when below -1e-10.
double clamp_variance(double v);

// Universal kriging from a fitted SLM. Factorizations are computed once at
// construction; prediction is read-only.
class KrigingPredictor {
 public:
  explicit KrigingPredictor(const FittedSLM& model);

  // x0 is the design row for the new site.
  PredictionResult predict(const Location& site, const Eigen::VectorXd& x0) const;
  std::vector<PredictionResult> predict(const std::vector<Location>& sites,
                                        const Eigen::MatrixXd& design) const;

  // Covariances between the training sites and `sites` (n x m), nugget
  // included where a site coincides with a training location.
  Eigen::MatrixXd cross_covariance(const std::vector<Location>& sites) const;
  // C(s0, s0), nugget included.
  double point_variance(const Location& site) const;

 private:
  const FittedSLM& model_;
  SigmaInverse inverse_;
  std::optional<Cholesky> knot_chol_;
  Eigen::VectorXd weights_;     // Sigma^{-1} (Y - X beta)
  Eigen::MatrixXd sigma_inv_x_; // Sigma^{-1} X
};

PredictionResult uk_predict(const FittedSLM& model, const Location& site,
                            const Eigen::VectorXd& x0);
// Row `row` of `sites`, with the design built from the model's recipe.
PredictionResult uk_predict(const FittedSLM& model, const SpatialDataset& sites, std::size_t row);

// Intercept-only model; rejects anything else.
PredictionResult ok_predict(const FittedSLM& model, const Location& site);

// Per-row uk_predict with shared factorizations. Errors name the offending row.
std::vector<PredictionResult> batch_predict(const FittedSLM& model, const SpatialDataset& sites);

}  // namespace slmrf
