#pragma once

#include "core.hpp"
#include "covariance.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace slmrf {

enum class Dominance { Linear, Nonlinear };

const char* to_string(Dominance d);

// One cell of the 2^3 design: which term dominates f, target R^2 and the
// nugget / partial-sill split of the error field.
struct SimCase {
  int id = 1;
  Dominance dominance = Dominance::Nonlinear;
  double r_squared = 0.1;
  double nugget = 9.0;
  double partial_sill = 1.0;
  double range = 0.5;
  int n_train = 500;
  int n_test = 1000;
  int replicates = 20;

  // Share of var(a g + h) carried by a g.
  double nonlinear_share() const { return dominance == Dominance::Nonlinear ? 0.9 : 0.1; }
  CovarianceParams error_params() const { return {nugget, partial_sill, range}; }

  static SimCase preset(int id);
  static std::vector<SimCase> all();
};

// delta = L w + eps with L L' the partial-sill exponential covariance and eps
// independent N(0, nugget).
Eigen::VectorXd sample_grf(const std::vector<Location>& locations, const CovarianceParams& params,
                           std::uint64_t seed);

// x has columns x1..x4. g = sin(5 pi x1 x2), h = 2 x3 - x4.
Eigen::VectorXd sim_nonlinear_term(const Eigen::MatrixXd& x);
Eigen::VectorXd sim_linear_term(const Eigen::MatrixXd& x);

// a = sqrt(share / (1 - share) * var(h) / var(g)), sample variances.
double calibrate_a(const Eigen::MatrixXd& x, double share);
// c = sqrt(R^2 / (1 - R^2) * delta_variance / var(a g + h)).
double calibrate_c(const Eigen::MatrixXd& x, double a, double delta_variance, double r_squared);

double sample_variance(const Eigen::VectorXd& v);

struct SimDataset {
  SpatialDataset train;
  SpatialDataset test;
  double a = 0.0;
  double c = 0.0;
  Eigen::MatrixXd x;      // x1..x4 on all points, train rows first
  Eigen::VectorXd f;      // c (a g + h)
  Eigen::VectorXd delta;  // error field on all points
};

// Uniform sites and covariates on the unit square; c is calibrated against
// the realized sample variance of delta.
SimDataset generate_sim(const SimCase& c, std::uint64_t seed);

struct SimOptions {
  int replicates = 20;
  int n_train = 500;
  int n_test = 1000;
  int trees = 1000;
  int mtry = 0;
  int min_node_size = 5;
  bool oob_residuals = true;
  int restarts = 3;
  int threads = 0;
};

enum SimModel { kSimLM = 0, kSimSLM, kSimRF, kSimRFRK, kSimModels };
const char* sim_model_name(int model);

struct SimScore {
  double rmspe = 0.0;
  double pic90 = 0.0;
  double pic95 = 0.0;
};

struct ReplicateResult {
  bool ok = false;
  std::string error;
  double a = 0.0;
  double c = 0.0;
  double realized_r_squared = 0.0;
  double realized_share = 0.0;
  std::array<SimScore, kSimModels> scores{};
};

struct CaseReport {
  SimCase spec;
  double a = 0.0;  // averaged over successful replicates
  double c = 0.0;
  std::array<SimScore, kSimModels> scores{};
  int successes = 0;
  std::vector<ReplicateResult> replicates;
};

ReplicateResult run_replicate(const SimCase& c, std::uint64_t seed, const SimOptions& options);
// Replicate seeds derive from (seed, case id, replicate).
CaseReport run_case(SimCase c, std::uint64_t seed, const SimOptions& options = {});

// case,dominance,r_squared,nugget,partial_sill,a,c, then RMSPE and PIC90 per model
void write_simulation_csv(std::ostream& os, const std::vector<CaseReport>& reports);

}  // namespace slmrf
