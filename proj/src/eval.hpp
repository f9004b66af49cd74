#pragma once

#include "core.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace slmrf {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const { return hi - lo; }
};

// One held-out prediction with its 90% and 95% intervals.
struct IntervalPrediction {
  double mean = 0.0;
  Interval i90;
  Interval i95;
};

double rmspe(const Eigen::VectorXd& observed, const Eigen::VectorXd& predicted);

// Share of observations strictly inside their interval. Zero-length
// intervals are left out; nullopt when none remain.
std::optional<double> interval_coverage(const Eigen::VectorXd& observed,
                                        const std::vector<Interval>& intervals);

// Fold id in [0, k) per row: a seeded shuffle dealt round-robin, so fold
// sizes differ by at most one.
std::vector<int> fold_assignment(std::size_t n, int k, std::uint64_t seed);

struct PipelineOutput {
  std::vector<IntervalPrediction> predictions;  // one per test row
  std::optional<std::size_t> k_params;          // fixed effects in the fitted model
};

// Fits on `train` and predicts `test`. `seed` is derived per fold.
using Pipeline = std::function<PipelineOutput(const SpatialDataset& train,
                                              const SpatialDataset& test, std::uint64_t seed)>;

struct CVReport {
  std::string label;
  std::optional<double> k_params;  // mean over successful folds
  double rmspe = 0.0;
  std::optional<double> pic90;
  std::optional<double> pic95;
  std::vector<double> interval_lengths;  // positive 90% interval lengths
  std::vector<int> folds;
  std::vector<int> failed_folds;
  Eigen::VectorXd predicted;  // NaN for rows of failed folds
};

// Each fold is predicted by the pipeline fitted to the other folds; metrics
// pool the held-out predictions. A failing fold is reported and skipped.
CVReport kfold_cv(const SpatialDataset& data, const std::string& label, const Pipeline& pipeline,
                  int k = 10, std::uint64_t seed = 1, int threads = 0);

// Model,k,RMSPE,PIC90,PIC95 (absent values left empty)
void write_cv_csv(std::ostream& os, const std::vector<CVReport>& reports);
// Model,n,min,q1,median,q3,max over the 90% interval lengths
void write_interval_summary_csv(std::ostream& os, const std::vector<CVReport>& reports);

}  // namespace slmrf
