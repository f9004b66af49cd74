#pragma once

#include "forest.hpp"
#include "kriging.hpp"
#include "slm.hpp"

#include <vector>

namespace slmrf {

struct RFRKOptions {
  ForestOptions forest;
  // Krige out-of-bag residuals; false uses in-sample residuals.
  bool oob_residuals = true;
  // Residual field fit; the method is forced to ML and the mean to zero.
  FitOptions residual;
};

// Random forest plus a zero-mean exponential field fitted to its residuals.
struct RFRKModel {
  ForestModel forest;
  // Zero-column design; training_response holds the residuals.
  FittedSLM residual_model;
  bool oob_residuals = false;

  const CovarianceParams& residual_cov() const { return residual_model.cov; }
  const Eigen::VectorXd& residuals() const { return residual_model.training_response; }
  bool converged() const { return residual_model.converged; }
};

RFRKModel fit_rfrk(const SpatialDataset& data, const RFRKOptions& options = {});
// Reuses a forest already fitted to `data`; options.forest is ignored.
RFRKModel fit_rfrk(ForestModel forest, const SpatialDataset& data, const RFRKOptions& options);

// Builds the residual model around a fitted forest with fixed covariance
// parameters (no estimation).
RFRKModel make_rfrk(ForestModel forest, const SpatialDataset& data, const CovarianceParams& cov,
                    bool oob_residuals = false);

// Shares the residual factorization across many predictions.
class RFRKPredictor {
 public:
  explicit RFRKPredictor(const RFRKModel& model);

  // Mean is the forest prediction plus the simple-kriging prediction of the
  // residual; the variance is the simple-kriging variance alone.
  PredictionResult predict(const Location& site, const Eigen::VectorXd& covariates) const;
  std::vector<PredictionResult> predict(const SpatialDataset& sites) const;
  // Simple-kriging prediction of the residual field at each site.
  std::vector<PredictionResult> residual_predict(const std::vector<Location>& sites) const;

 private:
  const RFRKModel& model_;
  KrigingPredictor kriging_;
};

PredictionResult rfrk_predict(const RFRKModel& model, const Location& site,
                              const Eigen::VectorXd& covariates);
std::vector<PredictionResult> rfrk_predict(const RFRKModel& model, const SpatialDataset& sites);

}  // namespace slmrf
