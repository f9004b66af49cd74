#pragma once

#include "core.hpp"
#include "covariance.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace slmrf {

enum class Method { ML, REML };

const char* to_string(Method m);
Method method_from_string(const std::string& s);

// Full-rank or reduced-rank covariance. A reduced model either places
// `knot_count` knots by k-means (0 selects default_knot_count) or reuses
// `knots` verbatim.
struct RankMode {
  bool reduced = false;
  std::size_t knot_count = 0;
  std::optional<KnotSet> knots;

  static RankMode full() { return {}; }
  static RankMode with_knots(std::size_t r) { return {true, r, std::nullopt}; }
  static RankMode with_knots(KnotSet k) { return {true, k.size(), std::move(k)}; }
};

struct FitOptions {
  Method method = Method::REML;
  RankMode rank = RankMode::full();
  int restarts = 3;
  double tolerance = 1e-8;
  int max_iterations = 500;
  std::uint64_t seed = 1;
  // Overrides the heuristic starting point.
  std::optional<CovarianceParams> initial;

  void validate() const;
};

// Distances cached once per fit: n x n for full rank, n x r and r x r for
// reduced rank.
class LikelihoodGeometry {
 public:
  static LikelihoodGeometry full(const std::vector<Location>& locations);
  static LikelihoodGeometry reduced(const std::vector<Location>& locations, KnotSet knots);

  bool is_reduced() const { return reduced_; }
  std::size_t rows() const { return rows_; }
  const Eigen::MatrixXd& site_distances() const { return dist_; }
  const Eigen::MatrixXd& site_knot_distances() const { return site_knot_; }
  const Eigen::MatrixXd& knot_distances() const { return knot_knot_; }
  const KnotSet& knots() const { return knots_; }
  double max_distance() const { return max_distance_; }

 private:
  bool reduced_ = false;
  std::size_t rows_ = 0;
  Eigen::MatrixXd dist_;
  Eigen::MatrixXd site_knot_;
  Eigen::MatrixXd knot_knot_;
  KnotSet knots_;
  double max_distance_ = 0.0;
};

// Applies Sigma^{-1} for either rank mode and reports log|Sigma|.
class SigmaInverse {
 public:
  SigmaInverse(const LikelihoodGeometry& geom, const CovarianceParams& params);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& v) const;
  double log_det() const { return log_det_; }

 private:
  std::optional<Cholesky> full_;
  std::optional<ReducedRankInverse> reduced_;
  double log_det_ = 0.0;
};

struct ProfiledBeta {
  Eigen::VectorXd beta;
  Eigen::MatrixXd beta_cov;  // (X' Sigma^{-1} X)^{-1}
};

ProfiledBeta profile_beta(const CovarianceParams& theta, const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& response, const LikelihoodGeometry& geom);
ProfiledBeta profile_beta(const CovarianceParams& theta, const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& response, const std::vector<Location>& locations,
                          const RankMode& rank = RankMode::full(), std::uint64_t seed = 1);

// Negative log-likelihood with beta profiled out; REML adds
// -k log(2 pi) + log|X' Sigma^{-1} X|.
double neg_log_likelihood(const CovarianceParams& theta, const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& response, const LikelihoodGeometry& geom,
                          Method method);
double neg_log_likelihood(const CovarianceParams& theta, const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& response, const std::vector<Location>& locations,
                          Method method, const RankMode& rank = RankMode::full(),
                          std::uint64_t seed = 1);

struct SLMDiagnostics {
  double neg_log_lik = 0.0;
  double aic = 0.0;
  double effective_range = 0.0;
  double nugget_to_sill = 0.0;
  Eigen::VectorXd t_stats;
  bool converged = true;
  int evaluations = 0;
};

// Distance (km) beyond which correlation drops below 0.01; 0 when the
// formula is not positive.
double effective_range(const CovarianceParams& p);
double nugget_to_sill(const CovarianceParams& p);

struct FittedSLM {
  DesignRecipe recipe;
  Eigen::VectorXd beta;
  Eigen::MatrixXd beta_cov;
  CovarianceParams cov;
  Method method = Method::REML;
  std::optional<KnotSet> knots;  // set for reduced-rank models
  std::vector<Location> training_locations;
  Eigen::MatrixXd training_design;
  Eigen::VectorXd training_response;
  bool converged = true;
};

struct SLMFit {
  FittedSLM model;
  SLMDiagnostics diagnostics;
};

// Drops near-aliased columns (scaled condition number > 1e10), scanning left
// to right so the rightmost member of an aliased set goes first.
DesignRecipe drop_aliased(const DesignRecipe& recipe, const Eigen::MatrixXd& design);

// Fits covariance parameters by simplex search over log parameters. A fit
// that exhausts its iterations returns the best point found with
// converged == false rather than throwing.
SLMFit fit_slm(const SpatialDataset& data, const DesignRecipe& recipe, const FitOptions& options);

// Same on a prebuilt design. The design may have zero columns (zero-mean
// simple kriging).
SLMFit fit_slm_design(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                      const std::vector<Location>& locations, const FitOptions& options,
                      DesignRecipe recipe = {});

SLMDiagnostics diagnose(const FittedSLM& model, const LikelihoodGeometry& geom);

}  // namespace slmrf
