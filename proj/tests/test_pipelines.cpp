#include "doctest.h"

#include "oracles.hpp"
#include "pipelines.hpp"
#include "sim.hpp"

#include <cmath>

using namespace slmrf;

namespace {

SpatialDataset small_sim(int n, std::uint64_t seed) {
  SimCase c = SimCase::preset(6);
  c.n_train = n;
  c.n_test = 30;
  return generate_sim(c, seed).train;
}

}  // namespace

TEST_CASE("model kind names") {
  const auto kinds = all_model_kinds();
  REQUIRE(kinds.size() == 7);
  const char* names[] = {"OK", "LM", "SLM", "LM-TF", "SLM-TF", "RF", "RFRK"};
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    CHECK(std::string(to_string(kinds[i])) == names[i]);
    CHECK(model_kind_from_string(names[i]) == kinds[i]);
  }
  CHECK(model_kind_from_string("slm-tf") == ModelKind::SLM_TF);
  CHECK_THROWS_AS(model_kind_from_string("gam"), InputError);
  CHECK(uses_transforms(ModelKind::LM_TF));
  CHECK_FALSE(uses_transforms(ModelKind::SLM));
  CHECK(is_spatial_linear(ModelKind::OK));
  CHECK(is_spatial_linear(ModelKind::SLM_TF));
  CHECK_FALSE(is_spatial_linear(ModelKind::RFRK));
}

TEST_CASE("gaussian intervals") {
  const auto p = gaussian_intervals(1.0, 4.0);
  CHECK(p.mean == 1.0);
  CHECK(p.i90.lo == doctest::Approx(1.0 - 1.645 * 2.0).epsilon(1e-3));
  CHECK(p.i95.hi == doctest::Approx(1.0 + 1.960 * 2.0).epsilon(1e-3));
  const auto z = gaussian_intervals(1.0, 0.0);
  CHECK(z.i90.length() == 0.0);
}

TEST_CASE("recipe selection") {
  const auto d = small_sim(80, 1);
  PipelineOptions o;
  o.restarts = 1;
  CHECK_THROWS_AS(select_recipe(ModelKind::RF, d, o, 1), InputError);
  const auto ok = select_recipe(ModelKind::OK, d, o, 1);
  CHECK(ok.recipe.intercept_only());
  REQUIRE(ok.slm_fit.has_value());
  CHECK(ok.slm_fit->model.beta.size() == 1);

  const auto lm = select_recipe(ModelKind::LM, d, o, 1);
  CHECK_FALSE(lm.slm_fit.has_value());
  CHECK(lm.recipe.has_intercept());
  CHECK(lm.transforms.empty());

  const auto slm = select_recipe(ModelKind::SLM_TF, d, o, 1);
  CHECK(slm.transforms.size() == 4);
  REQUIRE(slm.slm_fit.has_value());
  CHECK(slm.slm_fit->model.recipe.terms == slm.recipe.terms);
}

TEST_CASE("every pipeline predicts each test row") {
  const auto all = small_sim(90, 2);
  std::vector<std::size_t> tr, te;
  for (std::size_t i = 0; i < all.rows(); ++i) (i % 6 == 0 ? te : tr).push_back(i);
  const auto train = all.subset(tr);
  const auto test = all.subset(te);
  PipelineOptions o;
  o.trees = 30;
  o.restarts = 1;
  for (auto kind : all_model_kinds()) {
    CAPTURE(to_string(kind));
    const auto out = make_pipeline(kind, o)(train, test, 3);
    REQUIRE(out.predictions.size() == test.rows());
    for (const auto& p : out.predictions) {
      CHECK(std::isfinite(p.mean));
      CHECK(p.i95.lo <= p.i90.lo);
      CHECK(p.i90.hi <= p.i95.hi);
      CHECK(p.i90.lo <= p.i90.hi);
    }
    CHECK(out.k_params.has_value() == (kind != ModelKind::RF && kind != ModelKind::RFRK));
    const auto again = make_pipeline(kind, o)(train, test, 3);
    CHECK(again.predictions[0].mean == out.predictions[0].mean);
  }
}

TEST_CASE("fixed recipe skips selection") {
  const auto d = small_sim(60, 3);
  PipelineOptions o;
  o.restarts = 1;
  o.fixed_recipe = DesignRecipe::intercept();
  const auto out = make_pipeline(ModelKind::LM, o)(d, d.subset({0, 1, 2}), 1);
  CHECK(*out.k_params == 1);
  CHECK(out.predictions[0].mean == doctest::Approx(d.response.mean()));
}
