#pragma once

#include "core.hpp"
#include "linalg.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace slmrf {

// Exponential covariance parameters: nugget (sigma^2_eps), partial sill
// (sigma^2_z) and range (alpha, km).
struct CovarianceParams {
  double nugget = 0.0;
  double partial_sill = 1.0;
  double range = 1.0;

  double sill() const { return nugget + partial_sill; }
  void validate() const;
  friend bool operator==(const CovarianceParams&, const CovarianceParams&) = default;
};

// psill * exp(-d / range), plus the nugget when d == 0 exactly.
double exp_cov(double d, const CovarianceParams& params);

Eigen::MatrixXd distance_matrix(const std::vector<Location>& a, const std::vector<Location>& b);
Eigen::MatrixXd distance_matrix(const std::vector<Location>& a);

// Sigma = R + nugget * I.
Eigen::MatrixXd full_sigma(const std::vector<Location>& locations, const CovarianceParams& params);
// Same, from a cached distance matrix.
Eigen::MatrixXd sigma_from_distances(const Eigen::MatrixXd& dist, const CovarianceParams& params);
// psill * exp(-d / range) elementwise, no nugget (cross-covariances, S, K).
Eigen::MatrixXd correlated_part(const Eigen::MatrixXd& dist, const CovarianceParams& params);

struct KnotSet {
  std::vector<Location> knots;
  std::size_t size() const { return knots.size(); }
};

// min(ceil(n / 10), 200), at least 1.
std::size_t default_knot_count(std::size_t n);

// k-means centroids of the coordinates (25 seeded restarts, best
// within-cluster sum of squares). r == n returns the locations themselves and
// r == 1 returns their centroid.
KnotSet place_knots(const std::vector<Location>& locations, std::size_t r, std::uint64_t seed);

struct ReducedRankFactors {
  Eigen::MatrixXd S;  // n x r, site-to-knot covariances
  Eigen::MatrixXd K;  // r x r, knot-to-knot covariances
  double nugget = 0.0;

  static ReducedRankFactors build(const Eigen::MatrixXd& site_knot_dist,
                                  const Eigen::MatrixXd& knot_knot_dist,
                                  const CovarianceParams& params);
};

// Applies the inverse of Sigma = S K^{-1} S' + nugget I through the
// Sherman-Morrison-Woodbury identity; only r x r systems are factorized.
class ReducedRankInverse {
 public:
  explicit ReducedRankInverse(ReducedRankFactors factors);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& v) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  // log|Sigma| by the matrix determinant lemma.
  double log_det() const { return log_det_; }
  const ReducedRankFactors& factors() const { return f_; }

 private:
  ReducedRankFactors f_;
  Cholesky inner_;  // nugget K + S'S
  double log_det_ = 0.0;
};

}  // namespace slmrf
