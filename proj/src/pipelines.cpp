#include "pipelines.hpp"

#include "common.hpp"
#include "kriging.hpp"

#include <algorithm>
#include <cctype>

namespace slmrf {

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::OK:
      return "OK";
    case ModelKind::LM:
      return "LM";
    case ModelKind::SLM:
      return "SLM";
    case ModelKind::LM_TF:
      return "LM-TF";
    case ModelKind::SLM_TF:
      return "SLM-TF";
    case ModelKind::RF:
      return "RF";
    case ModelKind::RFRK:
      return "RFRK";
  }
  return "?";
}

std::vector<ModelKind> all_model_kinds() {
  return {ModelKind::OK,     ModelKind::LM, ModelKind::SLM, ModelKind::LM_TF,
          ModelKind::SLM_TF, ModelKind::RF, ModelKind::RFRK};
}

ModelKind model_kind_from_string(const std::string& s) {
  std::string up = s;
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (auto k : all_model_kinds()) {
    if (up == to_string(k)) return k;
  }
  throw InputError("unknown model '" + s + "' (ok, lm, slm, lm-tf, slm-tf, rf, rfrk)");
}

bool uses_transforms(ModelKind k) { return k == ModelKind::LM_TF || k == ModelKind::SLM_TF; }

bool is_spatial_linear(ModelKind k) {
  return k == ModelKind::OK || k == ModelKind::SLM || k == ModelKind::SLM_TF;
}

IntervalPrediction gaussian_intervals(double mean, double variance) {
  PredictionResult r{mean, variance};
  IntervalPrediction p;
  p.mean = mean;
  const auto a = r.interval(0.90);
  const auto b = r.interval(0.95);
  p.i90 = {a.first, a.second};
  p.i95 = {b.first, b.second};
  return p;
}

namespace {

FitOptions reml_full(const PipelineOptions& o, std::uint64_t seed) {
  FitOptions f;
  f.method = Method::REML;
  f.rank = RankMode::full();
  f.restarts = o.restarts;
  f.max_iterations = o.max_iterations;
  f.seed = seed;
  return f;
}

std::vector<IntervalPrediction> from_results(const std::vector<PredictionResult>& r) {
  std::vector<IntervalPrediction> out;
  out.reserve(r.size());
  for (const auto& p : r) out.push_back(gaussian_intervals(p.mean, p.variance));
  return out;
}

ForestOptions forest_options(const PipelineOptions& o, std::uint64_t seed) {
  ForestOptions f;
  f.trees = o.trees;
  f.mtry = o.mtry;
  f.min_node_size = o.min_node_size;
  f.seed = seed;
  f.threads = o.threads;
  return f;
}

}  // namespace

RecipeSelection select_recipe(ModelKind kind, const SpatialDataset& data,
                              const PipelineOptions& options, std::uint64_t seed) {
  RecipeSelection s;
  if (kind == ModelKind::RF || kind == ModelKind::RFRK) {
    throw InputError(std::string(to_string(kind)) + " has no design recipe");
  }
  if (kind == ModelKind::OK) {
    s.recipe = DesignRecipe::intercept();
    s.slm_fit = fit_slm(data, s.recipe, reml_full(options, seed));
    return s;
  }
  DesignRecipe start;
  if (uses_transforms(kind)) {
    auto t = select_all(data, {}, options.threads);
    start = std::move(t.recipe);
    s.transforms = std::move(t.specs);
  } else {
    start = DesignRecipe::raw(data);
  }
  auto step = stepwise_lm(data, start, options.threads);
  s.stepwise = std::move(step.trace);
  s.recipe = std::move(step.recipe);
  if (is_spatial_linear(kind)) {
    PruneOptions po;
    po.knots = options.knots;
    po.literal_tstat = options.literal_tstat;
    po.seed = seed;
    po.restarts = options.restarts;
    po.max_iterations = options.max_iterations;
    auto pr = prune_slm(data, s.recipe, po);
    s.pruning = std::move(pr.trace);
    s.recipe = pr.fit.model.recipe;
    s.slm_fit = std::move(pr.fit);
  }
  return s;
}

Pipeline make_pipeline(ModelKind kind, const PipelineOptions& options) {
  return [kind, options](const SpatialDataset& train, const SpatialDataset& test,
                         std::uint64_t seed) -> PipelineOutput {
    PipelineOutput out;
    switch (kind) {
      case ModelKind::RF: {
        const auto forest = fit_forest(train, forest_options(options, seed));
        const Eigen::MatrixXd x = forest.features(test);
        out.predictions.resize(test.rows());
        const Eigen::VectorXd mean = rf_predict(forest, x);
        const Eigen::MatrixXd q = qrf_quantiles(forest, x, {0.025, 0.05, 0.95, 0.975});
        for (std::size_t i = 0; i < test.rows(); ++i) {
          const auto r = static_cast<Eigen::Index>(i);
          auto& p = out.predictions[i];
          p.mean = mean[r];
          p.i90 = {q(r, 1), q(r, 2)};
          p.i95 = {q(r, 0), q(r, 3)};
        }
        return out;
      }
      case ModelKind::RFRK: {
        RFRKOptions ro;
        ro.forest = forest_options(options, seed);
        ro.oob_residuals = options.oob_residuals;
        ro.residual.restarts = options.restarts;
        ro.residual.max_iterations = options.max_iterations;
        ro.residual.seed = seed;
        const auto model = fit_rfrk(train, ro);
        out.predictions = from_results(rfrk_predict(model, test));
        return out;
      }
      default:
        break;
    }

    DesignRecipe recipe;
    std::optional<SLMFit> fit;
    if (options.fixed_recipe) {
      recipe = *options.fixed_recipe;
    } else {
      auto sel = select_recipe(kind, train, options, seed);
      recipe = std::move(sel.recipe);
      fit = std::move(sel.slm_fit);
    }
    if (is_spatial_linear(kind)) {
      if (!fit) fit = fit_slm(train, recipe, reml_full(options, seed));
      out.k_params = fit->model.beta.size();
      out.predictions = from_results(batch_predict(fit->model, test));
    } else {
      const auto lm = fit_lm(train, recipe);
      out.k_params = lm.beta.size();
      out.predictions = from_results(lm.predict(test));
    }
    return out;
  };
}

}  // namespace slmrf
