#include "doctest.h"

#include "lm.hpp"
#include "oracles.hpp"
#include "selection.hpp"
#include "sim.hpp"
#include "transform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace slmrf;

namespace {

// n sites with covariate values from `draw` and response f(x) + sd * noise.
template <typename Draw, typename F>
SpatialDataset planted(std::size_t n, std::uint64_t seed, Draw draw, F f, double sd) {
  Rng rng(seed);
  std::vector<Location> s(n);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    s[i] = {rng.uniform(), rng.uniform()};
    x(r, 0) = draw(rng);
    y[r] = f(x(r, 0)) + sd * rng.normal();
  }
  return make_dataset(std::move(s), y, x, {"x"});
}

double unif_0_10(Rng& r) { return 0.1 + 9.9 * r.uniform(); }

}  // namespace

TEST_CASE("ols and the Gaussian AIC") {
  Rng rng(41);
  Eigen::MatrixXd x(30, 2);
  Eigen::VectorXd y(30);
  for (Eigen::Index i = 0; i < 30; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.uniform();
    y[i] = 1.0 + 2.0 * x(i, 1) + 0.1 * rng.normal();
  }
  const auto f = ols(x, y);
  const Eigen::VectorXd normal = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  CHECK(oracle::rel_err(f.coef, normal) < 1e-10);
  CHECK(f.rank == 2);
  const double rss = (y - x * normal).squaredNorm();
  CHECK(f.rss == doctest::Approx(rss));
  const double n = 30;
  CHECK(lm_aic(rss, 30, 2, 1.0) ==
        doctest::Approx(n * (std::log(2 * std::numbers::pi) + 1) + n * std::log(rss / n) + 2 * 3));
  // same RSS, fewer coefficients: lower AIC
  CHECK(lm_aic(rss, 30, 2, 1.0) < lm_aic(rss, 30, 3, 1.0));
  // a perfect fit stays finite through the RSS floor
  CHECK(std::isfinite(lm_aic(0.0, 30, 2, 1.0)));
}

TEST_CASE("linear model prediction interval uses the leverage") {
  Rng rng(42);
  Eigen::MatrixXd x(25, 2);
  Eigen::VectorXd y(25);
  for (Eigen::Index i = 0; i < 25; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.uniform();
    y[i] = 0.5 - x(i, 1) + 0.3 * rng.normal();
  }
  const auto lm = fit_lm(x, y);
  const Eigen::Vector2d x0(1.0, 0.8);
  const auto r = lm.predict(x0);
  const Eigen::Vector2d b = (x.transpose() * x).inverse() * x.transpose() * y;
  const double s2 = (y - x * b).squaredNorm() / 23.0;
  const double lev = x0.dot((x.transpose() * x).inverse() * x0);
  CHECK(r.mean == doctest::Approx(x0.dot(b)));
  CHECK(r.variance == doctest::Approx(s2 * (1.0 + lev)));
  const Eigen::VectorXd t = lm.t_stats();
  CHECK(t[1] == doctest::Approx(b[1] / std::sqrt(s2 * (x.transpose() * x).inverse()(1, 1))));
}

TEST_CASE("lambda2 grid") {
  CHECK(lambda2_grid(Eigen::Vector3d(0.5, 1, 2), false) == std::vector<double>{0.0, 1.0});
  CHECK(lambda2_grid(Eigen::Vector3d(-2.0, 1, 2), false) == std::vector<double>{3.0});
  CHECK(lambda2_grid(Eigen::Vector3d(0.0, 1, 2), false) == std::vector<double>{1.0});
  // zero-inflated: only the nonzero values must be positive
  CHECK(lambda2_grid(Eigen::Vector3d(0.0, 0.5, 2), true) == std::vector<double>{0.0, 1.0});
}

TEST_CASE("candidate columns") {
  const Eigen::Vector3d x(0.0, 1.0, 3.0);
  const auto c = candidate_columns(x, TransformFamily::IndicatorPlusInteraction, 2.0, 1.0);
  CHECK(c.cols() == 2);
  CHECK(c(0, 0) == 0.0);
  CHECK(c(0, 1) == 0.0);
  CHECK(c(2, 0) == 1.0);
  CHECK(c(2, 1) == doctest::Approx(7.5));
  const auto q = candidate_columns(x, TransformFamily::Quadratic, 1.0, 1.0);
  CHECK(q(2, 1) == doctest::Approx(9.0));
}

TEST_CASE("fit_candidate_lm") {
  const Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(20, 1, 20);
  SUBCASE("perfect fit is finite") {
    const Eigen::VectorXd y = 3.0 * xs.array() + 1.0;
    CHECK(std::isfinite(*fit_candidate_lm(y, xs)));
  }
  SUBCASE("constant column is rank deficient") {
    CHECK_FALSE(fit_candidate_lm(xs, Eigen::VectorXd::Ones(20)).has_value());
  }
}

TEST_CASE("log-linear truth: lambda1 = 0 minimizes AIC on the linear family") {
  int hits = 0;
  for (std::uint64_t rep = 1; rep <= 20; ++rep) {
    // over a single decade log and the quarter power are hard to tell apart
    const auto d = planted(50, rep, [](Rng& r) { return 0.1 + 99.9 * r.uniform(); },
                           [](double v) { return std::log(v + 1.0); }, 0.1);
    const Eigen::VectorXd x = d.covariates.col(0);
    double best = INFINITY, best_l1 = -1;
    for (double l1 : TransformOptions{}.lambda1_grid) {
      for (double l2 : lambda2_grid(x, false)) {
        const double aic = *fit_candidate_lm(d.response, candidate_columns(x, TransformFamily::Linear, l1, l2));
        if (aic < best) {
          best = aic;
          best_l1 = l1;
        }
      }
    }
    hits += best_l1 == 0.0;
  }
  CHECK(hits >= 18);
}

TEST_CASE("select_transform") {
  SUBCASE("zero-inflated covariates only use indicator families") {
    const auto d = planted(
        100, 3, [](Rng& r) { return r.uniform() < 0.4 ? 0.0 : unif_0_10(r); },
        [](double v) { return v; }, 1.0);
    const auto t = select_transform(d, "x");
    CHECK(t.zero_inflated);
    CHECK((t.family == TransformFamily::IndicatorOnly ||
           t.family == TransformFamily::IndicatorTimesBoxCox ||
           t.family == TransformFamily::IndicatorPlusInteraction));
  }
  SUBCASE("covariate without zeros never uses indicator families") {
    const auto d = planted(100, 4, unif_0_10, [](double v) { return std::sqrt(v); }, 0.2);
    const auto t = select_transform(d, "x");
    CHECK_FALSE(t.zero_inflated);
    CHECK((t.family == TransformFamily::Linear || t.family == TransformFamily::Quadratic));
  }
  SUBCASE("exponential covariate of the response selects the log") {
    // x = exp(signal): y is exactly linear in log(x)
    const auto d = planted(60, 5, [](Rng& r) { return std::exp(3.0 * r.uniform()); },
                           [](double v) { return 2.0 * std::log(v); }, 0.0);
    CHECK(select_transform(d, "x").lambda1 == 0.0);
  }
  SUBCASE("quadratic in log") {
    int hits = 0;
    for (std::uint64_t rep = 1; rep <= 10; ++rep) {
      const auto d = planted(100, 100 + rep, unif_0_10,
                             [](double v) { return std::pow(std::log(v), 2); }, 0.3);
      hits += select_transform(d, "x").family == TransformFamily::Quadratic;
    }
    CHECK(hits >= 9);
  }
  SUBCASE("deterministic") {
    const auto d = planted(80, 6, unif_0_10, [](double v) { return std::log(v); }, 0.5);
    const auto a = select_transform(d, "x");
    const auto b = select_transform(d, "x");
    CHECK(a.family == b.family);
    CHECK(a.lambda1 == b.lambda1);
    CHECK(a.lambda2 == b.lambda2);
    CHECK(a.aic == b.aic);
  }
  SUBCASE("constant and categorical covariates are rejected") {
    auto d = planted(20, 7, unif_0_10, [](double v) { return v; }, 1.0);
    d.columns[0].is_categorical = true;
    CHECK_THROWS_AS(select_transform(d, "x"), InputError);
    CHECK_THROWS_AS(select_transform(d, "nope"), InputError);
  }
}

TEST_CASE("select_all") {
  Rng rng(43);
  const std::size_t n = 200;
  std::vector<Location> s(n);
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    s[i] = {rng.uniform(), rng.uniform()};
    x(r, 0) = rng.uniform() < 0.3 ? 0.0 : unif_0_10(rng);
    x(r, 1) = unif_0_10(rng);
    x(r, 2) = static_cast<double>(1 + rng.index(3));
    const double a = x(r, 0) != 0.0 ? 3.0 + 2.0 * std::log(x(r, 0)) : 0.0;
    y[r] = a + std::pow(std::log(x(r, 1)), 2) + 0.5 * x(r, 2) + 0.3 * rng.normal();
  }
  const auto d = make_dataset(s, y, x, {"zi", "q", "eco"}, {false, false, true});
  const auto sel = select_all(d);
  REQUIRE(sel.specs.size() == 2);
  CHECK(sel.specs[0].family == TransformFamily::IndicatorPlusInteraction);
  CHECK(sel.specs[1].family == TransformFamily::Quadratic);
  // intercept + 2 + 2 + two dummies for three ecoregion levels
  CHECK(sel.recipe.width() == 7);
  CHECK(build_design(sel.recipe, d).cols() == 7);
  const auto again = select_all(d);
  CHECK(again.recipe == sel.recipe);

  std::ostringstream os;
  write_transform_csv(os, sel.specs);
  CHECK(os.str().rfind("covariate,family,lambda1,lambda2,aic\n", 0) == 0);
}

TEST_CASE("select_all with linear choices has width p + 1") {
  Rng rng(44);
  const std::size_t n = 150;
  std::vector<Location> s(n);
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    s[i] = {rng.uniform(), rng.uniform()};
    for (Eigen::Index j = 0; j < 3; ++j) x(r, j) = 1.0 + rng.uniform();
    y[r] = x(r, 0) - 2 * x(r, 1) + 3 * x(r, 2) + 0.01 * rng.normal();
  }
  const auto d = make_dataset(s, y, x, {"a", "b", "c"});
  const auto sel = select_all(d);
  std::size_t width = 1;
  bool all_linear = true;
  for (const auto& spec : sel.specs) {
    width += static_cast<std::size_t>(family_size(spec.family));
    all_linear = all_linear && spec.family == TransformFamily::Linear;
  }
  CHECK(sel.recipe.width() == width);
  if (all_linear) CHECK(sel.recipe.width() == 4);

  // every covariate on the linear family adds one column
  DesignRecipe r = DesignRecipe::intercept();
  for (const auto& name : {"a", "b", "c"}) {
    TransformSpec t;
    t.covariate = name;
    t.family = TransformFamily::Linear;
    for (auto& term : transform_terms(t, 1)) r.terms.push_back(term);
  }
  CHECK(r.width() == 4);
}

namespace {

// y = 1 + 2 a - 1.5 b + noise, with a pure-noise column c.
SpatialDataset noise_column_data(std::uint64_t seed, std::size_t n, double field_psill = 0.0) {
  Rng rng(seed);
  auto s = oracle::random_locations(n, rng);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
  for (auto& v : x.reshaped()) v = rng.uniform();
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    y[i] = 1.0 + 2.0 * x(i, 0) - 1.5 * x(i, 1) + 0.3 * rng.normal();
  }
  if (field_psill > 0.0) {
    const auto e = sample_grf(s, {0.0, field_psill, 0.3}, seed);
    y += e;
  }
  return make_dataset(std::move(s), y, x, {"a", "b", "c"});
}

}  // namespace

TEST_CASE("stepwise_lm") {
  SUBCASE("noise column is dropped, signal kept") {
    int dropped = 0, kept_signal = 0;
    for (std::uint64_t rep = 1; rep <= 20; ++rep) {
      const auto d = noise_column_data(rep, 200);
      const auto res = stepwise_lm(d, DesignRecipe::raw(d));
      bool has_c = false, has_ab = true;
      const auto labels = res.recipe.labels();
      for (const auto& l : labels) has_c = has_c || l == "c";
      has_ab = std::find(labels.begin(), labels.end(), "a") != labels.end() &&
               std::find(labels.begin(), labels.end(), "b") != labels.end();
      dropped += !has_c;
      kept_signal += has_ab;
      const auto& steps = res.trace.steps;
      REQUIRE(!steps.empty());
      CHECK(steps.back().action == SelectionStep::Action::Stop);
      for (const auto& st : steps) {
        if (st.action == SelectionStep::Action::Drop) CHECK(st.aic_after < st.aic_before);
        else CHECK(st.aic_after >= st.aic_before);
      }
    }
    // AIC keeps a null column when its likelihood-ratio statistic exceeds 2,
    // which happens with probability ~0.16, so ~17/20 drops are expected.
    CHECK(dropped >= 14);
    CHECK(kept_signal == 20);
  }
  SUBCASE("all-signal design has no drops") {
    Rng rng(45);
    const std::size_t n = 100;
    auto s = oracle::random_locations(n, rng);
    Eigen::MatrixXd x(n, 2);
    for (auto& v : x.reshaped()) v = rng.uniform();
    Eigen::VectorXd y = 1.0 + 3.0 * x.col(0).array() - 2.0 * x.col(1).array();
    for (auto& v : y) v += 0.1 * rng.normal();
    const auto d = make_dataset(std::move(s), y, x, {"a", "b"});
    CHECK(stepwise_lm(d, DesignRecipe::raw(d)).trace.drops() == 0);
  }
  SUBCASE("an exact duplicate column goes in the first step") {
    auto d = noise_column_data(46, 100);
    d.covariates.col(2) = d.covariates.col(0);
    const auto res = stepwise_lm(d, DesignRecipe::raw(d));
    REQUIRE(res.trace.steps.size() >= 1);
    const auto& first = res.trace.steps[0];
    CHECK(first.action == SelectionStep::Action::Drop);
    CHECK((first.terms == "a" || first.terms == "c"));
    const auto labels = res.recipe.labels();
    CHECK(std::count_if(labels.begin(), labels.end(),
                        [](const std::string& l) { return l == "a" || l == "c"; }) == 1);
  }
  SUBCASE("term groups are dropped atomically") {
    auto d = noise_column_data(47, 150);
    DesignRecipe r = DesignRecipe::intercept();
    r.terms.push_back({TermKind::Raw, "a", 1, 0, false, 0, 1});
    r.terms.push_back({TermKind::Raw, "b", 1, 0, false, 0, 2});
    r.terms.push_back({TermKind::BoxCox, "c", 1, 1, false, 0, 3});
    r.terms.push_back({TermKind::BoxCoxSquared, "c", 1, 1, false, 0, 3});
    const auto res = stepwise_lm(d, r);
    int c_terms = 0;
    for (const auto& t : res.recipe.terms) c_terms += t.covariate == "c";
    CHECK((c_terms == 0 || c_terms == 2));
  }
}

TEST_CASE("prune_slm") {
  SUBCASE("strong signal: no drops, REML full-rank refit") {
    const auto d = noise_column_data(48, 120, 0.5);
    DesignRecipe r = DesignRecipe::intercept();
    r.terms.push_back({TermKind::Raw, "a", 1, 0, false, 0, 1});
    r.terms.push_back({TermKind::Raw, "b", 1, 0, false, 0, 2});
    PruneOptions po;
    po.restarts = 1;
    const auto res = prune_slm(d, r, po);
    CHECK(res.trace.drops() == 0);
    CHECK(res.trace.steps.back().action == SelectionStep::Action::Stop);
    CHECK(res.fit.model.method == Method::REML);
    CHECK_FALSE(res.fit.model.knots.has_value());
    CHECK(res.fit.model.recipe == r);
  }
  SUBCASE("noise column goes first and the trace is monotone") {
    int first_c = 0;
    for (std::uint64_t rep = 1; rep <= 6; ++rep) {
      const auto d = noise_column_data(200 + rep, 120, 0.5);
      PruneOptions po;
      po.restarts = 1;
      po.seed = rep;
      const auto res = prune_slm(d, DesignRecipe::raw(d), po);
      const auto& steps = res.trace.steps;
      REQUIRE(!steps.empty());
      first_c += steps[0].terms == "c";
      for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
        CHECK(steps[i].action == SelectionStep::Action::Drop);
        CHECK(steps[i].aic_after <= steps[i].aic_before);
      }
      CHECK(steps.back().action == SelectionStep::Action::Stop);
      // the final recipe is a subset of the input
      for (const auto& t : res.fit.model.recipe.terms) {
        const auto& all = DesignRecipe::raw(d).terms;
        CHECK(std::find(all.begin(), all.end(), t) != all.end());
      }
    }
    CHECK(first_c >= 5);
  }
  SUBCASE("literal mode removes the largest |t| first") {
    const auto d = noise_column_data(49, 120, 0.5);
    PruneOptions po;
    po.restarts = 1;
    po.literal_tstat = true;
    const auto res = prune_slm(d, DesignRecipe::raw(d), po);
    CHECK(res.trace.steps[0].terms != "c");
  }
  SUBCASE("identical inputs give identical traces") {
    const auto d = noise_column_data(50, 80, 0.5);
    PruneOptions po;
    po.restarts = 1;
    const auto a = prune_slm(d, DesignRecipe::raw(d), po);
    const auto b = prune_slm(d, DesignRecipe::raw(d), po);
    REQUIRE(a.trace.steps.size() == b.trace.steps.size());
    for (std::size_t i = 0; i < a.trace.steps.size(); ++i) {
      CHECK(a.trace.steps[i].terms == b.trace.steps[i].terms);
      CHECK(a.trace.steps[i].aic_after == b.trace.steps[i].aic_after);
    }
  }
}
