#pragma once

#include "core.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace slmrf {

struct TreeNode {
  // -1 marks a leaf
  int variable = -1;
  double threshold = 0.0;           // numeric: x <= threshold goes left
  std::vector<double> left_levels;  // categorical: levels routed left
  std::vector<double> right_levels;
  bool unseen_left = true;  // unseen levels follow the child with more rows
  int left = -1;
  int right = -1;
  int leaf = -1;  // index into the tree's leaf tables

  bool is_leaf() const { return variable < 0; }
};

// Regression tree whose leaves archive the training rows (bootstrap
// multiplicity included) that landed in them.
struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<std::vector<int>> leaf_rows;
  std::vector<double> leaf_means;

  // x points at one row of p covariate values.
  int leaf_of(const double* x, const std::vector<bool>& categorical) const;
  std::size_t depth() const;
};

struct ForestOptions {
  int trees = 1000;
  int mtry = 0;  // 0: default_mtry(p)
  int min_node_size = 5;
  std::uint64_t seed = 1;
  // Test mode: grow every tree on the full sample (no out-of-bag rows).
  bool bootstrap = true;
  int threads = 0;
};

// floor(p / 3), at least 1
int default_mtry(std::size_t p);

struct ForestModel {
  std::vector<RegressionTree> trees;
  std::vector<std::vector<int>> oob_rows;  // per tree
  int mtry = 1;
  int min_node_size = 5;
  std::uint64_t seed = 1;
  bool bootstrap = true;
  std::vector<std::string> names;
  std::vector<bool> categorical;
  Eigen::VectorXd training_response;
  std::vector<int> response_order;  // training rows sorted by response

  std::size_t num_features() const { return names.size(); }
  // Covariate matrix of `data` in training column order.
  Eigen::MatrixXd features(const SpatialDataset& data) const;
};

ForestModel fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const ForestOptions& options, std::vector<std::string> names = {},
                       std::vector<bool> categorical = {});
ForestModel fit_forest(const SpatialDataset& data, const ForestOptions& options);

// Mean of per-tree leaf means.
double rf_predict(const ForestModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd rf_predict(const ForestModel& model, const Eigen::MatrixXd& x);

// Per-training-row weights: (1/B) sum_b [row shares x's leaf in tree b] / leaf size.
Eigen::VectorXd qrf_weights(const ForestModel& model, const Eigen::VectorXd& x);
// Left-continuous inverse of the weighted empirical CDF.
double qrf_quantile(const ForestModel& model, const Eigen::VectorXd& x, double alpha);
std::vector<double> qrf_quantiles(const ForestModel& model, const Eigen::VectorXd& x,
                                  const std::vector<double>& alphas);
// One row per site, one column per level; equal to the per-site overload.
Eigen::MatrixXd qrf_quantiles(const ForestModel& model, const Eigen::MatrixXd& x,
                              const std::vector<double>& alphas);

// Out-of-bag predictions (mean over trees where the row was out of bag);
// rows never out of bag fall back to the in-sample prediction.
Eigen::VectorXd oob_predict(const ForestModel& model, const Eigen::MatrixXd& x);

// Average over trees with a non-empty out-of-bag set of the increase in
// out-of-bag MSE when one covariate is permuted. `identity_permutation` is a
// test hook that leaves columns unpermuted.
Eigen::VectorXd permutation_importance(const ForestModel& model, const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& y, std::uint64_t seed,
                                       bool identity_permutation = false);

// covariate,importance sorted by decreasing importance
void write_importance_csv(std::ostream& os, const ForestModel& model,
                          const Eigen::VectorXd& importance);

}  // namespace slmrf
