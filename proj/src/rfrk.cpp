#include "rfrk.hpp"

#include "common.hpp"

namespace slmrf {

namespace {

Eigen::VectorXd forest_residuals(const ForestModel& forest, const SpatialDataset& data, bool oob) {
  const Eigen::MatrixXd x = forest.features(data);
  const Eigen::VectorXd fitted = oob ? oob_predict(forest, x) : rf_predict(forest, x);
  return data.response - fitted;
}

FittedSLM residual_shell(const SpatialDataset& data, Eigen::VectorXd residuals) {
  FittedSLM m;
  m.method = Method::ML;
  m.beta = Eigen::VectorXd(0);
  m.beta_cov = Eigen::MatrixXd(0, 0);
  m.training_locations = data.locations;
  m.training_design = Eigen::MatrixXd(static_cast<Eigen::Index>(data.rows()), 0);
  m.training_response = std::move(residuals);
  return m;
}

}  // namespace

RFRKModel fit_rfrk(const SpatialDataset& data, const RFRKOptions& options) {
  if (!data.has_response()) throw InputError("dataset has no response column");
  return fit_rfrk(fit_forest(data, options.forest), data, options);
}

RFRKModel fit_rfrk(ForestModel forest, const SpatialDataset& data, const RFRKOptions& options) {
  if (!data.has_response()) throw InputError("dataset has no response column");
  if (static_cast<std::size_t>(forest.training_response.size()) != data.rows()) {
    throw InputError("forest was not fitted to this dataset");
  }
  RFRKModel m;
  m.forest = std::move(forest);
  m.oob_residuals = options.oob_residuals;
  const Eigen::VectorXd e = forest_residuals(m.forest, data, options.oob_residuals);
  FitOptions fo = options.residual;
  fo.method = Method::ML;
  const Eigen::MatrixXd none(static_cast<Eigen::Index>(data.rows()), 0);
  m.residual_model = fit_slm_design(none, e, data.locations, fo).model;
  return m;
}

RFRKModel make_rfrk(ForestModel forest, const SpatialDataset& data, const CovarianceParams& cov,
                    bool oob_residuals) {
  if (!data.has_response()) throw InputError("dataset has no response column");
  cov.validate();
  RFRKModel m;
  m.forest = std::move(forest);
  m.oob_residuals = oob_residuals;
  m.residual_model = residual_shell(data, forest_residuals(m.forest, data, oob_residuals));
  m.residual_model.cov = cov;
  return m;
}

RFRKPredictor::RFRKPredictor(const RFRKModel& model)
    : model_(model), kriging_(model.residual_model) {}

std::vector<PredictionResult> RFRKPredictor::residual_predict(
    const std::vector<Location>& sites) const {
  return kriging_.predict(sites, Eigen::MatrixXd(static_cast<Eigen::Index>(sites.size()), 0));
}

PredictionResult RFRKPredictor::predict(const Location& site,
                                        const Eigen::VectorXd& covariates) const {
  PredictionResult r = residual_predict({site})[0];
  r.mean += rf_predict(model_.forest, covariates);
  return r;
}

std::vector<PredictionResult> RFRKPredictor::predict(const SpatialDataset& sites) const {
  const Eigen::VectorXd f = rf_predict(model_.forest, model_.forest.features(sites));
  auto out = residual_predict(sites.locations);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].mean += f[static_cast<Eigen::Index>(i)];
  return out;
}

PredictionResult rfrk_predict(const RFRKModel& model, const Location& site,
                              const Eigen::VectorXd& covariates) {
  return RFRKPredictor(model).predict(site, covariates);
}

std::vector<PredictionResult> rfrk_predict(const RFRKModel& model, const SpatialDataset& sites) {
  return RFRKPredictor(model).predict(sites);
}

}  // namespace slmrf
