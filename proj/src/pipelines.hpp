#pragma once

#include "eval.hpp"
#include "forest.hpp"
#include "lm.hpp"
#include "rfrk.hpp"
#include "selection.hpp"
#include "slm.hpp"
#include "transform.hpp"

#include <optional>
#include <string>
#include <vector>

namespace slmrf {

// The model families compared under cross-validation.
enum class ModelKind { OK, LM, SLM, LM_TF, SLM_TF, RF, RFRK };

// "OK", "LM", "SLM", "LM-TF", "SLM-TF", "RF", "RFRK"
const char* to_string(ModelKind k);
// Case-insensitive inverse of to_string.
ModelKind model_kind_from_string(const std::string& s);
std::vector<ModelKind> all_model_kinds();
bool uses_transforms(ModelKind k);
bool is_spatial_linear(ModelKind k);

struct PipelineOptions {
  int trees = 1000;
  int mtry = 0;
  int min_node_size = 5;
  std::size_t knots = 0;
  bool literal_tstat = false;
  bool oob_residuals = true;
  int restarts = 3;
  int max_iterations = 500;  // per covariance optimizer run
  int threads = 0;
  // Skip the transformation search and selection and fit this recipe
  // (fast cross-validation mode).
  std::optional<DesignRecipe> fixed_recipe;
};

// Transformation search (TF kinds), stepwise LM selection and, for the
// spatial kinds, t-statistic pruning. OK yields the intercept; RF and RFRK
// have no recipe and are rejected.
struct RecipeSelection {
  DesignRecipe recipe;
  std::vector<TransformSpec> transforms;
  SelectionTrace stepwise;
  SelectionTrace pruning;
  std::optional<SLMFit> slm_fit;  // final REML fit for the spatial kinds
};
RecipeSelection select_recipe(ModelKind kind, const SpatialDataset& data,
                              const PipelineOptions& options, std::uint64_t seed);

Pipeline make_pipeline(ModelKind kind, const PipelineOptions& options = {});

IntervalPrediction gaussian_intervals(double mean, double variance);

}  // namespace slmrf
