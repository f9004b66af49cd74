#pragma once

#include "core.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace slmrf {

// Candidate linear-model forms for one covariate x with g = boxcox(x):
//   IndicatorOnly             y ~ I(x != 0)
//   IndicatorTimesBoxCox      y ~ g(x) I(x != 0)
//   IndicatorPlusInteraction  y ~ I(x != 0) + g(x) I(x != 0)
//   Linear                    y ~ g(x)
//   Quadratic                 y ~ g(x) + g(x)^2
// The first three apply to zero-inflated covariates, the last two otherwise.
enum class TransformFamily {
  IndicatorOnly,
  IndicatorTimesBoxCox,
  IndicatorPlusInteraction,
  Linear,
  Quadratic,
};

const char* to_string(TransformFamily f);
TransformFamily family_from_string(const std::string& s);
// Slope parameters the family adds (the intercept is shared by all).
int family_size(TransformFamily f);

struct TransformSpec {
  std::string covariate;
  TransformFamily family = TransformFamily::Linear;
  double lambda1 = 1.0;
  double lambda2 = 0.0;
  double aic = 0.0;
  bool zero_inflated = false;
  // Every candidate was rank deficient; the covariate enters untransformed.
  bool raw_fallback = false;
};

struct TransformOptions {
  double zero_inflation_threshold = 0.02;
  std::vector<double> lambda1_grid = {0.0,  0.25, 0.5,  0.75, 1.0,  1.25, 1.5,
                                      1.75, 2.0,  2.25, 2.5,  2.75, 3.0};
};

// Shifts tried for one covariate: {0, 1} when the smallest relevant value is
// positive, otherwise {1, |min| + 1}, keeping only shifts that make every
// relevant value positive. Relevant values are the nonzero ones for
// zero-inflated covariates.
std::vector<double> lambda2_grid(const Eigen::VectorXd& x, bool zero_inflated);

// Columns the family adds to an intercept-only model.
Eigen::MatrixXd candidate_columns(const Eigen::VectorXd& x, TransformFamily family, double lambda1,
                                  double lambda2);

// AIC of the OLS fit of y on [1, columns]; nullopt if the design is rank
// deficient.
std::optional<double> fit_candidate_lm(const Eigen::VectorXd& y, const Eigen::MatrixXd& columns);

TransformSpec select_transform(const SpatialDataset& data, const std::string& covariate,
                               const TransformOptions& options = {});

// Design terms implementing a chosen transform; all share `group`.
std::vector<DesignTerm> transform_terms(const TransformSpec& spec, int group);

struct TransformSelection {
  DesignRecipe recipe;
  std::vector<TransformSpec> specs;
};

// Intercept, each numeric covariate's chosen terms and categorical dummies,
// in covariate order. Per-covariate failures become warnings.
TransformSelection select_all(const SpatialDataset& data, const TransformOptions& options = {},
                              int threads = 1);

// covariate,family,lambda1,lambda2,aic
void write_transform_csv(std::ostream& os, const std::vector<TransformSpec>& specs);

}  // namespace slmrf
