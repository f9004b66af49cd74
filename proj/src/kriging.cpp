#include "kriging.hpp"

#include "common.hpp"

#include <cmath>
#include <sstream>

namespace slmrf {

double gaussian_multiplier(double level) {
  if (level == 0.90) return 1.645;
  if (level == 0.95) return 1.960;
  std::ostringstream os;
  os << "unsupported interval level " << level << " (0.90 or 0.95)";
  throw InputError(os.str());
}

double PredictionResult::se() const { return std::sqrt(variance); }

std::pair<double, double> PredictionResult::interval(double level) const {
  const double h = gaussian_multiplier(level) * se();
  return {mean - h, mean + h};
}

double clamp_variance(double v) {
  if (v >= 0.0) return v;
  if (v < -1e-10) {
    std::ostringstream os;
    os << "negative prediction variance " << v << " clamped to 0";
    warn(os.str());
  }
  return 0.0;
}

namespace {

LikelihoodGeometry model_geometry(const FittedSLM& m) {
  return m.knots ? LikelihoodGeometry::reduced(m.training_locations, *m.knots)
                 : LikelihoodGeometry::full(m.training_locations);
}

}  // namespace

KrigingPredictor::KrigingPredictor(const FittedSLM& model)
    : model_(model), inverse_(model_geometry(model), model.cov) {
  const auto& x = model.training_design;
  weights_ = inverse_.apply(model.training_response - x * model.beta);
  sigma_inv_x_ = inverse_.apply(x);
  if (model.knots) {
    knot_chol_.emplace(correlated_part(distance_matrix(model.knots->knots), model.cov),
                       "knot covariance matrix K");
  }
}

Eigen::MatrixXd KrigingPredictor::cross_covariance(const std::vector<Location>& sites) const {
  const auto& train = model_.training_locations;
  Eigen::MatrixXd c;
  if (!model_.knots) {
    c = correlated_part(distance_matrix(train, sites), model_.cov);
  } else {
    const auto& knots = model_.knots->knots;
    const Eigen::MatrixXd s_train = correlated_part(distance_matrix(train, knots), model_.cov);
    const Eigen::MatrixXd s_new = correlated_part(distance_matrix(sites, knots), model_.cov);
    c = s_train * knot_chol_->solve(Eigen::MatrixXd(s_new.transpose()));
  }
  if (model_.cov.nugget > 0.0) {
    for (std::size_t j = 0; j < sites.size(); ++j) {
      for (std::size_t i = 0; i < train.size(); ++i) {
        if (train[i] == sites[j]) {
          c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += model_.cov.nugget;
        }
      }
    }
  }
  return c;
}

double KrigingPredictor::point_variance(const Location& site) const {
  if (!model_.knots) return model_.cov.sill();
  const Eigen::MatrixXd s0 =
      correlated_part(distance_matrix({site}, model_.knots->knots), model_.cov);
  const Eigen::MatrixXd s0t = s0.transpose();
  return (s0 * knot_chol_->solve(s0t))(0, 0) + model_.cov.nugget;
}

std::vector<PredictionResult> KrigingPredictor::predict(const std::vector<Location>& sites,
                                                        const Eigen::MatrixXd& design) const {
  const auto k = model_.training_design.cols();
  if (design.cols() != k || design.rows() != static_cast<Eigen::Index>(sites.size())) {
    throw InputError("prediction design has " + std::to_string(design.cols()) +
                     " columns, model expects " + std::to_string(k));
  }
  std::vector<PredictionResult> out(sites.size());
  constexpr std::size_t chunk = 512;
  for (std::size_t start = 0; start < sites.size(); start += chunk) {
    const std::size_t stop = std::min(sites.size(), start + chunk);
    std::vector<Location> block(sites.begin() + static_cast<std::ptrdiff_t>(start),
                                sites.begin() + static_cast<std::ptrdiff_t>(stop));
    const Eigen::MatrixXd c = cross_covariance(block);
    const Eigen::MatrixXd sc = inverse_.apply(c);
    for (std::size_t b = 0; b < block.size(); ++b) {
      const auto col = static_cast<Eigen::Index>(b);
      const auto row = static_cast<Eigen::Index>(start + b);
      const Eigen::VectorXd x0 = design.row(row).transpose();
      PredictionResult r;
      r.mean = x0.dot(model_.beta) + c.col(col).dot(weights_);
      double var = point_variance(block[b]) - c.col(col).dot(sc.col(col));
      if (k > 0) {
        const Eigen::VectorXd t = x0 - sigma_inv_x_.transpose() * c.col(col);
        var += t.dot(model_.beta_cov * t);
      }
      r.variance = clamp_variance(var);
      out[start + b] = r;
    }
  }
  return out;
}

PredictionResult KrigingPredictor::predict(const Location& site, const Eigen::VectorXd& x0) const {
  return predict(std::vector<Location>{site}, Eigen::MatrixXd(x0.transpose()))[0];
}

PredictionResult uk_predict(const FittedSLM& model, const Location& site,
                            const Eigen::VectorXd& x0) {
  return KrigingPredictor(model).predict(site, x0);
}

PredictionResult uk_predict(const FittedSLM& model, const SpatialDataset& sites, std::size_t row) {
  if (row >= sites.rows()) throw InputError("prediction row out of range");
  const auto one = sites.subset({row});
  const Eigen::MatrixXd x0 = build_design(model.recipe, one);
  return uk_predict(model, one.locations[0], Eigen::VectorXd(x0.row(0).transpose()));
}

PredictionResult ok_predict(const FittedSLM& model, const Location& site) {
  if (!model.recipe.intercept_only() || model.training_design.cols() != 1) {
    throw InputError("ordinary kriging requires an intercept-only model");
  }
  return uk_predict(model, site, Eigen::VectorXd::Ones(1));
}

std::vector<PredictionResult> batch_predict(const FittedSLM& model, const SpatialDataset& sites) {
  Eigen::MatrixXd design;
  try {
    design = build_design(model.recipe, sites);
  } catch (const InputError& e) {
    throw InputError(std::string("prediction sites: ") + e.what());
  }
  return KrigingPredictor(model).predict(sites.locations, design);
}

}  // namespace slmrf
