#include "doctest.h"

#include "common.hpp"
#include "kriging.hpp"
#include "pipelines.hpp"
#include "sim.hpp"
#include "slm.hpp"

#include <cmath>
#include <sstream>

using namespace slmrf;

namespace {

PipelineOutput mean_model(const SpatialDataset& train, const SpatialDataset& test, std::uint64_t) {
  PipelineOutput out;
  const double m = train.response.mean();
  for (std::size_t i = 0; i < test.rows(); ++i) out.predictions.push_back({m, {m - 1, m + 1}, {m - 2, m + 2}});
  out.k_params = 1;
  return out;
}

SpatialDataset noise_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Location> s(n);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = {rng.uniform(), rng.uniform()};
    y[static_cast<Eigen::Index>(i)] = 5.0 + 2.0 * rng.normal();
    x(static_cast<Eigen::Index>(i), 0) = rng.uniform();
  }
  return make_dataset(std::move(s), y, x, {"x1"});
}

}  // namespace

TEST_CASE("rmspe") {
  CHECK(rmspe(Eigen::Vector2d(3, -4), Eigen::Vector2d::Zero()) == doctest::Approx(3.5355).epsilon(1e-4));
  CHECK(rmspe(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3)) == 0.0);
  CHECK_THROWS_AS(rmspe(Eigen::Vector2d(1, 2), Eigen::Vector3d(1, 2, 3)), InputError);
  CHECK_THROWS_AS(rmspe(Eigen::VectorXd(), Eigen::VectorXd()), InputError);
}

TEST_CASE("interval coverage") {
  const Eigen::Vector4d y(0.0, 1.0, 2.0, 5.0);
  SUBCASE("bounds are strict") {
    const std::vector<Interval> iv{{-1, 1}, {1, 2}, {1, 3}, {0, 4}};
    CHECK(*interval_coverage(y, iv) == doctest::Approx(0.5));
  }
  SUBCASE("zero-length intervals are left out") {
    const std::vector<Interval> iv{{0, 0}, {0, 2}, {2, 2}, {5, 5}};
    CHECK(*interval_coverage(y, iv) == 1.0);
    const std::vector<Interval> none{{0, 0}, {1, 1}, {2, 2}, {5, 5}};
    CHECK_FALSE(interval_coverage(y, none).has_value());
  }
  SUBCASE("malformed input") {
    CHECK_THROWS_AS(interval_coverage(y, {{0, 1}}), InputError);
    CHECK_THROWS_AS(interval_coverage(y, {{0, 1}, {2, 1}, {0, 1}, {0, 1}}), InputError);
  }
}

TEST_CASE("fold assignment") {
  const auto f = fold_assignment(23, 10, 4);
  std::vector<int> sizes(10, 0);
  for (int v : f) {
    REQUIRE(v >= 0);
    REQUIRE(v < 10);
    ++sizes[static_cast<std::size_t>(v)];
  }
  for (int s : sizes) CHECK((s == 2 || s == 3));
  CHECK(f == fold_assignment(23, 10, 4));
  CHECK(f != fold_assignment(23, 10, 5));
  CHECK_THROWS_AS(fold_assignment(5, 10, 1), InputError);
  CHECK_THROWS_AS(fold_assignment(5, 1, 1), InputError);
}

TEST_CASE("cross-validation of a mean model") {
  const auto d = noise_data(400, 1);
  const auto rep = kfold_cv(d, "mean", mean_model, 10, 3);
  CHECK(rep.rmspe == doctest::Approx(std::sqrt(sample_variance(d.response))).epsilon(0.02));
  CHECK(rep.k_params == 1.0);
  CHECK(rep.failed_folds.empty());
  CHECK(rep.interval_lengths.size() == 400);
  CHECK(rep.predicted.allFinite());

  const auto again = kfold_cv(d, "mean", mean_model, 10, 3, 4);
  CHECK(again.rmspe == rep.rmspe);
  CHECK(again.predicted == rep.predicted);
  CHECK(*again.pic90 == *rep.pic90);
}

TEST_CASE("failing folds are reported and skipped") {
  const auto d = noise_data(50, 2);
  int calls = 0;
  const Pipeline flaky = [&](const SpatialDataset& tr, const SpatialDataset& te, std::uint64_t s) {
    if (te.rows() > 0 && te.locations[0].easting < 0.3) throw FitError("boom");
    ++calls;
    return mean_model(tr, te, s);
  };
  const auto rep = kfold_cv(d, "flaky", flaky, 5, 1, 1);
  CHECK(rep.failed_folds.size() + static_cast<std::size_t>(calls) == 5);
  for (int f : rep.failed_folds) {
    for (std::size_t i = 0; i < d.rows(); ++i) {
      if (rep.folds[i] == f) CHECK(std::isnan(rep.predicted[static_cast<Eigen::Index>(i)]));
    }
  }
  const Pipeline broken = [](const SpatialDataset&, const SpatialDataset&, std::uint64_t) -> PipelineOutput {
    throw FitError("always");
  };
  CHECK_THROWS_AS(kfold_cv(d, "broken", broken, 5, 1, 1), FitError);
}

TEST_CASE("csv writers") {
  CVReport a;
  a.label = "OK";
  a.k_params = 1.0;
  a.rmspe = 2.5;
  a.pic90 = 0.9;
  a.pic95 = 0.95;
  a.interval_lengths = {4, 1, 3, 2, 5};
  CVReport b;
  b.label = "RF";
  b.rmspe = 3.0;
  std::ostringstream os;
  write_cv_csv(os, {a, b});
  CHECK(os.str() == "Model,k,RMSPE,PIC90,PIC95\nOK,1,2.5,0.9,0.95\nRF,,3,,\n");
  std::ostringstream is;
  write_interval_summary_csv(is, {a, b});
  CHECK(is.str() == "Model,n,min,q1,median,q3,max\nOK,5,1,2,3,4,5\nRF,0,,,,,\n");
}

TEST_CASE("spatial linear model intervals cover about 90%") {
  SimCase c = SimCase::preset(6);
  c.n_train = 300;
  c.n_test = 1000;
  const auto d = generate_sim(c, 42);
  FitOptions fo;
  fo.restarts = 1;
  const auto fit = fit_slm(d.train, DesignRecipe::raw(d.train), fo);
  const auto pred = batch_predict(fit.model, d.test);
  std::vector<Interval> iv;
  for (const auto& p : pred) {
    const auto g = gaussian_intervals(p.mean, p.variance);
    iv.push_back(g.i90);
  }
  const double cov = *interval_coverage(d.test.response, iv);
  CHECK(cov >= 0.87);
  CHECK(cov <= 0.93);
}
