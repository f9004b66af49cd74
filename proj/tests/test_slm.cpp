#include "doctest.h"

#include "kriging.hpp"
#include "lm.hpp"
#include "oracles.hpp"
#include "sim.hpp"
#include "slm.hpp"

#include <cmath>
#include <numbers>

using namespace slmrf;

namespace {

struct Instance {
  std::vector<Location> s;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  CovarianceParams p;
};

Instance random_instance(Rng& rng, std::size_t n, Eigen::Index k) {
  Instance in;
  in.s = oracle::random_locations(n, rng);
  in.x.resize(static_cast<Eigen::Index>(n), k);
  in.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < in.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < k; ++j) in.x(i, j) = j == 0 ? 1.0 : rng.normal();
    in.y[i] = 2.0 + rng.normal();
  }
  in.p = {0.05 + rng.uniform(), 0.2 + 2.0 * rng.uniform(), 0.05 + 0.8 * rng.uniform()};
  return in;
}

// Exponential field plus a linear trend on random sites.
SpatialDataset simulated(std::size_t n, const CovarianceParams& p, std::uint64_t seed,
                         double slope = 2.0) {
  Rng rng(seed);
  auto s = oracle::random_locations(n, rng);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
  for (auto& v : x.reshaped()) v = rng.uniform();
  const Eigen::VectorXd e = sample_grf(s, p, seed + 1);
  Eigen::VectorXd y = 1.0 + slope * x.col(0).array() + e.array();
  return make_dataset(std::move(s), y, x, {"x1"});
}

DesignRecipe intercept_and_x1() {
  DesignRecipe r = DesignRecipe::intercept();
  r.terms.push_back({TermKind::Raw, "x1", 1, 0, false, 0, 1});
  return r;
}

}  // namespace

TEST_CASE("single-point ML likelihood") {
  const CovarianceParams p{0.4, 1.1, 0.3};
  const double v = neg_log_likelihood(p, Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, 3.7),
                                      std::vector<Location>{{0.2, 0.2}}, Method::ML);
  CHECK(v == doctest::Approx(0.5 * (std::log(2 * std::numbers::pi) + std::log(1.5))));
}

TEST_CASE("likelihood matches the dense formula") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = random_instance(rng, 4 + rng.index(17), 1 + static_cast<Eigen::Index>(rng.index(3)));
    for (Method m : {Method::ML, Method::REML}) {
      const double got = neg_log_likelihood(in.p, in.x, in.y, in.s, m);
      CHECK(oracle::rel_err(got, oracle::nll(in.p, in.x, in.y, in.s, m == Method::REML)) < 1e-9);
    }
  }
}

TEST_CASE("reduced rank with knots at the data equals full rank") {
  Rng rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = random_instance(rng, 5 + rng.index(30), 2);
    const auto rank = RankMode::with_knots(KnotSet{in.s});
    for (Method m : {Method::ML, Method::REML}) {
      const double full = neg_log_likelihood(in.p, in.x, in.y, in.s, m);
      const double red = neg_log_likelihood(in.p, in.x, in.y, in.s, m, rank);
      CHECK(oracle::rel_err(full, red) < 1e-8);
    }
  }
}

TEST_CASE("ML and REML agree without fixed effects") {
  Rng rng(23);
  const auto in = random_instance(rng, 15, 1);
  const Eigen::MatrixXd none(15, 0);
  CHECK(neg_log_likelihood(in.p, none, in.y, in.s, Method::ML) ==
        doctest::Approx(neg_log_likelihood(in.p, none, in.y, in.s, Method::REML)));
}

TEST_CASE("profile_beta") {
  Rng rng(24);
  SUBCASE("identity covariance gives OLS") {
    const auto in = random_instance(rng, 12, 3);
    const auto pb = profile_beta({1.0, 1e-300, 1.0}, in.x, in.y, in.s);
    const auto ols_fit = ols(in.x, in.y);
    CHECK(oracle::rel_err(pb.beta, ols_fit.coef) < 1e-10);
  }
  SUBCASE("intercept only is the Sigma-weighted mean") {
    const auto in = random_instance(rng, 10, 1);
    const auto pb = profile_beta(in.p, in.x, in.y, in.s);
    const Eigen::MatrixXd si = oracle::sigma(in.s, in.p).inverse();
    CHECK(pb.beta[0] == doctest::Approx((si * in.y).sum() / si.sum()).epsilon(1e-10));
    CHECK(pb.beta_cov(0, 0) == doctest::Approx(1.0 / si.sum()).epsilon(1e-10));
  }
  SUBCASE("noiseless linear response is recovered") {
    auto in = random_instance(rng, 15, 3);
    const Eigen::Vector3d b(1.5, -2.0, 0.25);
    in.y = in.x * b;
    const auto pb = profile_beta({1e-10, 1.0, 0.3}, in.x, in.y, in.s);
    CHECK(oracle::rel_err(pb.beta, Eigen::MatrixXd(b)) < 1e-6);
  }
}

TEST_CASE("published diagnostic anchors") {
  struct Col {
    CovarianceParams p;
    double range;
    double ratio;
  };
  // nugget, partial sill, range -> effective range (km), nugget-to-sill
  const Col cols[] = {{{278.08, 135.05, 139.09}, 485.03, 0.67},
                      {{257.17, 68.59, 189.31}, 576.87, 0.79},
                      {{226.78, 53.03, 167.98}, 494.19, 0.81},
                      {{261.08, 13.52, 100.66}, 160.44, 0.95}};
  for (const auto& c : cols) {
    CHECK(std::abs(effective_range(c.p) - c.range) <= 0.5);
    CHECK(std::abs(nugget_to_sill(c.p) - c.ratio) <= 0.005);
  }
  CHECK(effective_range({1.0, 0.0, 1.0}) == 0.0);
  // correlation never reaches 0.01 of the sill when the nugget dominates
  CHECK(effective_range({1000.0, 1.0, 1.0}) == 0.0);
}

TEST_CASE("fit_slm on a simulated field") {
  const auto data = simulated(150, {0.5, 3.0, 0.3}, 5);
  FitOptions fo;
  const auto fit = fit_slm(data, intercept_and_x1(), fo);
  const auto& m = fit.model;
  CHECK(fit.diagnostics.converged);
  CHECK(m.beta.size() == 2);
  CHECK(m.cov.partial_sill > 0.0);
  CHECK(fit.diagnostics.aic ==
        doctest::Approx(2.0 * fit.diagnostics.neg_log_lik + 2.0 * (2 + 3)));
  CHECK(fit.diagnostics.nugget_to_sill ==
        doctest::Approx(m.cov.nugget / (m.cov.nugget + m.cov.partial_sill)));
  CHECK(fit.diagnostics.t_stats[1] == doctest::Approx(m.beta[1] / std::sqrt(m.beta_cov(1, 1))));

  // the optimum is a local minimum of the likelihood in every log direction
  const double best = fit.diagnostics.neg_log_lik;
  for (int j = 0; j < 3; ++j) {
    for (double h : {-0.05, 0.05}) {
      CovarianceParams q = m.cov;
      double* f = j == 0 ? &q.nugget : j == 1 ? &q.partial_sill : &q.range;
      *f *= std::exp(h);
      CHECK(neg_log_likelihood(q, m.training_design, m.training_response, m.training_locations,
                               Method::REML) >= best - 1e-7);
    }
  }

  const auto again = fit_slm(data, intercept_and_x1(), fo);
  CHECK(again.model.cov == m.cov);
  CHECK(again.model.beta == m.beta);
}

TEST_CASE("ML fit scales with the response") {
  const auto data = simulated(120, {0.5, 2.0, 0.25}, 9);
  FitOptions fo;
  fo.method = Method::ML;
  const auto a = fit_slm(data, intercept_and_x1(), fo);
  auto scaled = data;
  scaled.response *= 3.0;
  const auto b = fit_slm(scaled, intercept_and_x1(), fo);
  CHECK(b.model.cov.nugget / 9.0 == doctest::Approx(a.model.cov.nugget).epsilon(1e-4));
  CHECK(b.model.cov.partial_sill / 9.0 == doctest::Approx(a.model.cov.partial_sill).epsilon(1e-4));
  CHECK(b.model.cov.range == doctest::Approx(a.model.cov.range).epsilon(1e-4));
  for (Eigen::Index j = 0; j < 2; ++j) {
    CHECK(b.diagnostics.t_stats[j] == doctest::Approx(a.diagnostics.t_stats[j]).epsilon(1e-4));
  }
}

TEST_CASE("pure nugget data") {
  // Spurious weak structure is a genuine likelihood optimum in some samples,
  // so the ratio test asks for a majority and predictions must match OLS.
  int high = 0;
  double slm_sse = 0.0, ols_sse = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto all = simulated(350, {1.0, 1e-12, 0.3}, seed * 17);
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < all.rows(); ++i) (i < 150 ? tr : te).push_back(i);
    const auto train = all.subset(tr);
    const auto test = all.subset(te);
    const auto fit = fit_slm(train, intercept_and_x1(), {});
    high += fit.diagnostics.nugget_to_sill >= 0.9;
    const auto pred = batch_predict(fit.model, test);
    const auto lm = fit_lm(train, intercept_and_x1());
    const auto lp = lm.predict(test);
    for (std::size_t i = 0; i < test.rows(); ++i) {
      const double y = test.response[static_cast<Eigen::Index>(i)];
      slm_sse += (y - pred[i].mean) * (y - pred[i].mean);
      ols_sse += (y - lp[i].mean) * (y - lp[i].mean);
    }
  }
  CHECK(high >= 5);
  CHECK(std::sqrt(slm_sse / ols_sse) <= 1.02);
}

TEST_CASE("fit_slm contract") {
  const auto data = simulated(60, {0.5, 1.0, 0.3}, 3);
  SUBCASE("too few sites") {
    const auto small = data.subset({0, 1, 2, 3});
    CHECK_THROWS_AS(fit_slm(small, intercept_and_x1(), {}), FitError);
  }
  SUBCASE("exhausted iterations flag non-convergence without throwing") {
    FitOptions fo;
    fo.max_iterations = 5;
    fo.restarts = 1;
    const auto fit = fit_slm(data, intercept_and_x1(), fo);
    CHECK_FALSE(fit.model.converged);
    CHECK_FALSE(fit.diagnostics.converged);
    CHECK(std::isfinite(fit.diagnostics.neg_log_lik));
  }
  SUBCASE("invalid options") {
    FitOptions fo;
    fo.restarts = 0;
    CHECK_THROWS_AS(fit_slm(data, intercept_and_x1(), fo), InputError);
    fo.restarts = 1;
    fo.tolerance = 0.0;
    CHECK_THROWS_AS(fit_slm(data, intercept_and_x1(), fo), InputError);
  }
  SUBCASE("reduced rank fit") {
    FitOptions fo;
    fo.method = Method::ML;
    fo.rank = RankMode::with_knots(8);
    const auto fit = fit_slm(data, intercept_and_x1(), fo);
    REQUIRE(fit.model.knots.has_value());
    CHECK(fit.model.knots->size() == 8);
  }
}

TEST_CASE("drop_aliased removes the rightmost copy") {
  Rng rng(25);
  Eigen::MatrixXd x(20, 3);
  for (auto& v : x.reshaped()) v = rng.normal();
  x.col(0).setOnes();
  x.col(2) = x.col(1);
  DesignRecipe r = DesignRecipe::intercept();
  r.terms.push_back({TermKind::Raw, "a"});
  r.terms.push_back({TermKind::Raw, "b"});
  const auto kept = drop_aliased(r, x);
  REQUIRE(kept.width() == 2);
  CHECK(kept.terms[1].covariate == "a");
}
