#include "eval.hpp"

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace slmrf {

double rmspe(const Eigen::VectorXd& observed, const Eigen::VectorXd& predicted) {
  if (observed.size() != predicted.size()) {
    throw InputError("observed and predicted lengths differ");
  }
  if (observed.size() == 0) throw InputError("rmspe needs at least one value");
  return std::sqrt((observed - predicted).squaredNorm() / static_cast<double>(observed.size()));
}

std::optional<double> interval_coverage(const Eigen::VectorXd& observed,
                                        const std::vector<Interval>& intervals) {
  if (static_cast<std::size_t>(observed.size()) != intervals.size()) {
    throw InputError("observed values and intervals differ in number");
  }
  std::size_t used = 0, inside = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& iv = intervals[i];
    if (!(iv.lo <= iv.hi)) {
      throw InputError("malformed interval at row " + std::to_string(i + 1));
    }
    if (iv.lo == iv.hi) continue;
    ++used;
    const double y = observed[static_cast<Eigen::Index>(i)];
    inside += iv.lo < y && y < iv.hi;
  }
  if (used == 0) return std::nullopt;
  return static_cast<double>(inside) / static_cast<double>(used);
}

std::vector<int> fold_assignment(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw InputError("cross-validation needs k >= 2");
  if (n < static_cast<std::size_t>(k)) {
    throw InputError("cross-validation needs at least k = " + std::to_string(k) + " rows");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed, 0x666f6c64 /* fold */);
  rng.shuffle(order);
  std::vector<int> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return fold;
}

CVReport kfold_cv(const SpatialDataset& data, const std::string& label, const Pipeline& pipeline,
                  int k, std::uint64_t seed, int threads) {
  if (!data.has_response()) throw InputError("dataset has no response column");
  const std::size_t n = data.rows();
  CVReport rep;
  rep.label = label;
  rep.folds = fold_assignment(n, k, seed);

  std::vector<std::optional<PipelineOutput>> outputs(static_cast<std::size_t>(k));
  std::vector<std::vector<std::size_t>> test_rows(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) test_rows[static_cast<std::size_t>(rep.folds[i])].push_back(i);

  parallel_for(static_cast<std::size_t>(k), threads, [&](std::size_t f) {
    std::vector<std::size_t> train_rows;
    for (std::size_t i = 0; i < n; ++i) {
      if (rep.folds[i] != static_cast<int>(f)) train_rows.push_back(i);
    }
    try {
      auto out = pipeline(data.subset(train_rows), data.subset(test_rows[f]),
                          Rng(seed, 0x6376 /* cv */, f).next());
      if (out.predictions.size() != test_rows[f].size()) {
        throw FitError("pipeline returned the wrong number of predictions");
      }
      outputs[f] = std::move(out);
    } catch (const Error& e) {
      warn(label + ": fold " + std::to_string(f + 1) + " failed: " + e.what());
    }
  });

  rep.predicted = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n),
                                            std::numeric_limits<double>::quiet_NaN());
  std::vector<double> obs, pred;
  std::vector<Interval> i90, i95;
  double k_sum = 0.0;
  int k_count = 0;
  for (std::size_t f = 0; f < outputs.size(); ++f) {
    if (!outputs[f]) {
      rep.failed_folds.push_back(static_cast<int>(f));
      continue;
    }
    if (outputs[f]->k_params) {
      k_sum += static_cast<double>(*outputs[f]->k_params);
      ++k_count;
    }
    for (std::size_t j = 0; j < test_rows[f].size(); ++j) {
      const auto row = test_rows[f][j];
      const auto& p = outputs[f]->predictions[j];
      rep.predicted[static_cast<Eigen::Index>(row)] = p.mean;
      obs.push_back(data.response[static_cast<Eigen::Index>(row)]);
      pred.push_back(p.mean);
      i90.push_back(p.i90);
      i95.push_back(p.i95);
      if (p.i90.length() > 0.0) rep.interval_lengths.push_back(p.i90.length());
    }
  }
  if (obs.empty()) throw FitError(label + ": every cross-validation fold failed");
  if (k_count > 0) rep.k_params = k_sum / k_count;
  const Eigen::VectorXd o = Eigen::Map<Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
  const Eigen::VectorXd p = Eigen::Map<Eigen::VectorXd>(pred.data(), static_cast<Eigen::Index>(pred.size()));
  rep.rmspe = rmspe(o, p);
  rep.pic90 = interval_coverage(o, i90);
  rep.pic95 = interval_coverage(o, i95);
  return rep;
}

namespace {

void write_optional(std::ostream& os, const std::optional<double>& v) {
  if (v) os << *v;
}

// Linear interpolation between order statistics.
double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

void write_cv_csv(std::ostream& os, const std::vector<CVReport>& reports) {
  const auto old = os.precision(10);
  os << "Model,k,RMSPE,PIC90,PIC95\n";
  for (const auto& r : reports) {
    os << r.label << ',';
    write_optional(os, r.k_params);
    os << ',' << r.rmspe << ',';
    write_optional(os, r.pic90);
    os << ',';
    write_optional(os, r.pic95);
    os << '\n';
  }
  os.precision(old);
}

void write_interval_summary_csv(std::ostream& os, const std::vector<CVReport>& reports) {
  const auto old = os.precision(10);
  os << "Model,n,min,q1,median,q3,max\n";
  for (const auto& r : reports) {
    std::vector<double> v = r.interval_lengths;
    std::sort(v.begin(), v.end());
    os << r.label << ',' << v.size();
    if (v.empty()) {
      os << ",,,,,\n";
      continue;
    }
    for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) os << ',' << quantile_sorted(v, q);
    os << '\n';
  }
  os.precision(old);
}

}  // namespace slmrf
