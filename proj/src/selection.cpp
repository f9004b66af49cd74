#include "selection.hpp"

#include "common.hpp"
#include "lm.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>

namespace slmrf {

std::size_t SelectionTrace::drops() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.action == SelectionStep::Action::Drop;
  return n;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Eigen::Index> group_columns(const DesignRecipe& r, int group) {
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < r.terms.size(); ++j) {
    if (r.terms[j].kind != TermKind::Intercept && r.terms[j].group == group) {
      cols.push_back(static_cast<Eigen::Index>(j));
    }
  }
  return cols;
}

std::string group_label(const DesignRecipe& r, int group) {
  std::string s;
  for (auto j : group_columns(r, group)) {
    if (!s.empty()) s += '+';
    s += r.terms[static_cast<std::size_t>(j)].label();
  }
  return s;
}

Eigen::MatrixXd drop_columns(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(x.rows(), x.cols() - static_cast<Eigen::Index>(cols.size()));
  Eigen::Index c = 0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (std::find(cols.begin(), cols.end(), j) == cols.end()) out.col(c++) = x.col(j);
  }
  return out;
}

// Smallest |t| among the group's columns; NaN when t is unavailable.
double group_min_abs_t(const Eigen::VectorXd& t, const std::vector<Eigen::Index>& cols) {
  if (t.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  double v = kInf;
  for (auto j : cols) v = std::min(v, std::abs(t[j]));
  return v;
}

double group_max_abs_t(const Eigen::VectorXd& t, const std::vector<Eigen::Index>& cols) {
  double v = 0.0;
  for (auto j : cols) v = std::max(v, std::abs(t[j]));
  return v;
}

}  // namespace

StepwiseResult stepwise_lm(const SpatialDataset& data, const DesignRecipe& recipe, int threads) {
  if (!data.has_response()) throw InputError("dataset has no response column");
  const Eigen::VectorXd& y = data.response;
  const double yvar = (y.array() - y.mean()).square().sum() / static_cast<double>(y.size());

  StepwiseResult res;
  res.recipe = recipe;
  Eigen::MatrixXd x = build_design(recipe, data);
  double current = lm_aic(ols(x, y).rss, x.rows(), x.cols(), yvar);

  while (true) {
    const auto groups = res.recipe.groups();
    Eigen::VectorXd t;
    if (ols(x, y).rank == x.cols() && x.rows() > x.cols()) t = fit_lm(x, y).t_stats();

    std::vector<double> aics(groups.size(), kInf);
    parallel_for(groups.size(), threads, [&](std::size_t g) {
      const auto reduced = drop_columns(x, group_columns(res.recipe, groups[g]));
      aics[g] = lm_aic(ols(reduced, y).rss, reduced.rows(), reduced.cols(), yvar);
    });
    // ties go to the rightmost group
    std::optional<std::size_t> best;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (!best || aics[g] <= aics[*best]) best = g;
    }

    SelectionStep step;
    step.aic_before = current;
    if (!best) {
      step.action = SelectionStep::Action::Stop;
      step.aic_after = kInf;
      step.t_stat = std::numeric_limits<double>::quiet_NaN();
      res.trace.steps.push_back(step);
      break;
    }
    const int group = groups[*best];
    const auto cols = group_columns(res.recipe, group);
    step.terms = group_label(res.recipe, group);
    step.aic_after = aics[*best];
    step.t_stat = group_min_abs_t(t, cols);
    if (aics[*best] < current) {
      step.action = SelectionStep::Action::Drop;
      res.trace.steps.push_back(step);
      x = drop_columns(x, cols);
      res.recipe = res.recipe.without_group(group);
      current = aics[*best];
    } else {
      step.action = SelectionStep::Action::Stop;
      res.trace.steps.push_back(step);
      break;
    }
  }
  return res;
}

PruneResult prune_slm(const SpatialDataset& data, const DesignRecipe& recipe,
                      const PruneOptions& options) {
  if (!data.has_response()) throw InputError("dataset has no response column");
  DesignRecipe current = drop_aliased(recipe, build_design(recipe, data));

  const std::size_t r = options.knots ? std::min(options.knots, data.rows())
                                      : default_knot_count(data.rows());
  const KnotSet knots = place_knots(data.locations, r, options.seed);

  FitOptions ml;
  ml.method = Method::ML;
  ml.rank = RankMode::with_knots(knots);
  ml.restarts = options.restarts;
  ml.max_iterations = options.max_iterations;
  ml.tolerance = options.tolerance;
  ml.seed = options.seed;

  PruneResult res;
  SLMFit fit = fit_slm(data, current, ml);
  while (true) {
    const auto groups = current.groups();
    SelectionStep step;
    step.aic_before = fit.diagnostics.aic;
    if (groups.empty()) {
      step.action = SelectionStep::Action::Stop;
      step.aic_after = kInf;
      step.t_stat = std::numeric_limits<double>::quiet_NaN();
      res.trace.steps.push_back(step);
      break;
    }
    const auto& t = fit.diagnostics.t_stats;
    std::size_t pick = 0;
    double pick_t = group_max_abs_t(t, group_columns(current, groups[0]));
    for (std::size_t g = 1; g < groups.size(); ++g) {
      const double v = group_max_abs_t(t, group_columns(current, groups[g]));
      if (options.literal_tstat ? v > pick_t : v < pick_t) {
        pick = g;
        pick_t = v;
      }
    }
    const DesignRecipe candidate = current.without_group(groups[pick]);
    step.terms = group_label(current, groups[pick]);
    step.t_stat = pick_t;
    FitOptions warm = ml;
    warm.initial = fit.model.cov;
    SLMFit next;
    try {
      next = fit_slm(data, candidate, warm);
    } catch (const Error& e) {
      warn(std::string("pruning stopped: refit failed: ") + e.what());
      step.action = SelectionStep::Action::Stop;
      step.aic_after = kInf;
      res.trace.steps.push_back(step);
      break;
    }
    step.aic_after = next.diagnostics.aic;
    if (next.diagnostics.aic > fit.diagnostics.aic) {
      step.action = SelectionStep::Action::Stop;
      res.trace.steps.push_back(step);
      break;
    }
    step.action = SelectionStep::Action::Drop;
    res.trace.steps.push_back(step);
    current = next.model.recipe;
    fit = std::move(next);
  }

  FitOptions final_opts;
  final_opts.method = Method::REML;
  final_opts.rank = RankMode::full();
  final_opts.restarts = options.restarts;
  final_opts.max_iterations = options.max_iterations;
  final_opts.tolerance = options.tolerance;
  final_opts.seed = options.seed;
  res.fit = fit_slm(data, current, final_opts);
  return res;
}

void write_trace_csv(std::ostream& os, const SelectionTrace& trace) {
  const auto old = os.precision(12);
  os << "action,terms,aic_before,aic_after,t_stat\n";
  for (const auto& s : trace.steps) {
    os << (s.action == SelectionStep::Action::Drop ? "drop" : "stop") << ",\"" << s.terms << "\","
       << s.aic_before << ',' << s.aic_after << ',' << s.t_stat << '\n';
  }
  os.precision(old);
}

}  // namespace slmrf
