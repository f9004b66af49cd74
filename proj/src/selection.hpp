#pragma once

#include "core.hpp"
#include "slm.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace slmrf {

struct SelectionStep {
  enum class Action { Drop, Stop };
  Action action = Action::Stop;
  // Labels of the removed (or, for Stop, the tested) term group, joined by '+'.
  std::string terms;
  double aic_before = 0.0;
  double aic_after = 0.0;
  double t_stat = 0.0;
};

struct SelectionTrace {
  std::vector<SelectionStep> steps;
  std::size_t drops() const;
};

struct StepwiseResult {
  DesignRecipe recipe;
  SelectionTrace trace;
};

// Backward elimination on the ordinary linear model: each step removes the
// term group whose removal lowers the Gaussian AIC the most, and stops when no
// removal lowers it. The intercept is never removed.
StepwiseResult stepwise_lm(const SpatialDataset& data, const DesignRecipe& recipe,
                           int threads = 1);

struct PruneOptions {
  // Knots for the reduced-rank ML fits during pruning (0 selects the default).
  std::size_t knots = 0;
  // Remove the largest |t| first instead of the smallest.
  bool literal_tstat = false;
  std::uint64_t seed = 1;
  int restarts = 3;
  int max_iterations = 500;
  double tolerance = 1e-8;
};

struct PruneResult {
  SLMFit fit;  // REML, full rank, on the selected recipe
  SelectionTrace trace;
};

// Second selection phase on the spatial model. Pruning fits use ML with a
// reduced-rank covariance whose knots are placed once and reused; each step
// removes the term group with the smallest (or, in literal mode, largest)
// |t| and continues while AIC does not increase. The final model is refit by
// REML with the full-rank covariance.
PruneResult prune_slm(const SpatialDataset& data, const DesignRecipe& recipe,
                      const PruneOptions& options = {});

// action,terms,aic_before,aic_after,t_stat
void write_trace_csv(std::ostream& os, const SelectionTrace& trace);

}  // namespace slmrf
