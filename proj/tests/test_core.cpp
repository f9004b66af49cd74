#include "doctest.h"

#include "common.hpp"
#include "core.hpp"
#include "test_util.hpp"

#include <cmath>
#include <numbers>

using namespace slmrf;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

SpatialDataset two_column_data() {
  return make_dataset({{0, 0}, {1, 0}, {0, 1}, {1, 1}}, Eigen::Vector4d(1, 2, 3, 4),
                      (Eigen::MatrixXd(4, 2) << 2, 1, 3, 2, 0, 1, 5, 2).finished(), {"c1", "eco"},
                      {false, true});
}

}  // namespace

TEST_CASE("load_csv reads a minimal file") {
  TempDir dir("core");
  const auto path = dir.write("a.csv", "x,y,resp,c1\n0,0,1.5,0\n1,0,2.5,0\n0,1,3.5,5\n");
  const auto d = load_csv(path, Schema::parse("easting:x,northing:y,response:resp"));
  CHECK(d.rows() == 3);
  CHECK(d.cols() == 1);
  CHECK(d.columns[0].name == "c1");
  CHECK(d.columns[0].zero_fraction == doctest::Approx(2.0 / 3.0));
  CHECK(d.response[2] == 3.5);
  CHECK(d.locations[2] == Location{0, 1});
}

TEST_CASE("load_csv rejects bad cells naming row and column") {
  TempDir dir("core");
  const auto path = dir.write("a.csv", "x,y,resp,c1\n0,0,1,1\n1,0,NA,2\n0,1,3,3\n");
  const auto msg =
      error_of([&] { load_csv(path, Schema::parse("easting:x,northing:y,response:resp")); });
  CHECK(msg.find("row 2") != std::string::npos);
  CHECK(msg.find("resp") != std::string::npos);
}

TEST_CASE("load_csv rejects missing columns, missing files and duplicate sites") {
  TempDir dir("core");
  const auto path = dir.write("a.csv", "x,y,resp\n0,0,1\n1,0,2\n");
  CHECK_THROWS_AS(load_csv(path, Schema::parse("easting:x,northing:lat,response:resp")),
                  InputError);
  CHECK_THROWS_AS(load_csv(dir.file("missing.csv"), Schema::parse("easting:x,northing:y")),
                  InputError);
  const auto dup = dir.write("d.csv", "x,y,resp\n0,0,1\n1,0,2\n0,0,3\n");
  const auto msg = error_of([&] { load_csv(dup, Schema::parse("easting:x,northing:y,response:resp")); });
  CHECK(msg.find("duplicate location") != std::string::npos);
}

TEST_CASE("load_csv drops constant covariates and honours ignore and categorical roles") {
  TempDir dir("core");
  const auto path = dir.write(
      "a.csv", "id,x,y,resp,k,eco,c1\n1,0,0,1,7,1,0.5\n2,1,0,2,7,2,0.1\n3,0,1,3,7,1,0.3\n");
  const auto d =
      load_csv(path, Schema::parse("easting:x,northing:y,response:resp,categorical:eco,ignore:id"));
  REQUIRE(d.cols() == 2);
  CHECK(d.columns[0].name == "eco");
  CHECK(d.columns[0].is_categorical);
  CHECK(d.columns[1].name == "c1");
  CHECK_FALSE(d.column_index("k").has_value());
  CHECK_FALSE(d.column_index("id").has_value());
}

TEST_CASE("load_csv without a response reads prediction sites") {
  TempDir dir("core");
  const auto path = dir.write("s.csv", "x,y,c1\n0,0,1\n1,0,2\n");
  const auto d = load_csv(path, Schema::parse("easting:x,northing:y"));
  CHECK(d.rows() == 2);
  CHECK_FALSE(d.has_response());
}

TEST_CASE("Schema::parse rejects malformed entries") {
  CHECK_THROWS_AS(Schema::parse("easting:x,northing"), InputError);
  CHECK_THROWS_AS(Schema::parse("easting:x,colour:y"), InputError);
  CHECK_THROWS_AS(Schema::parse("response:r"), InputError);
}

TEST_CASE("boxcox") {
  CHECK(boxcox(1.0, 1.0, 0.0) == doctest::Approx(0.0));
  CHECK(boxcox(std::numbers::e - 1.0, 0.0, 1.0) == doctest::Approx(1.0));
  CHECK(boxcox(3.0, 2.0, 1.0) == doctest::Approx(7.5));
  CHECK_THROWS_AS(boxcox(-2.0, 1.0, 1.0), InputError);
  for (double x : {0.3, 1.0, 4.0, 25.0}) {
    CHECK(std::abs(boxcox(x, 1e-6, 0.5) - boxcox(x, 0.0, 0.5)) < 1e-4);
  }
}

TEST_CASE("build_design") {
  const auto d = two_column_data();
  SUBCASE("intercept") {
    const auto x = build_design(DesignRecipe::intercept(), d);
    CHECK(x.rows() == 4);
    CHECK(x.cols() == 1);
    CHECK(x.isOnes());
  }
  SUBCASE("boxcox with lambda1 = 1") {
    DesignRecipe r;
    r.terms.push_back({TermKind::BoxCox, "c1", 1.0, 0.0});
    const auto one = make_dataset({{0, 0}, {1, 0}}, Eigen::Vector2d(0, 0),
                                  Eigen::MatrixXd(Eigen::Vector2d(2, 3)), {"c1"});
    const auto x = build_design(r, one);
    CHECK(x(0, 0) == doctest::Approx(1.0));
    CHECK(x(1, 0) == doctest::Approx(2.0));
  }
  SUBCASE("log with shift") {
    DesignRecipe r;
    r.terms.push_back({TermKind::BoxCox, "c1", 0.0, 1.0});
    const auto one = make_dataset({{0, 0}, {1, 0}}, Eigen::Vector2d(0, 0),
                                  Eigen::MatrixXd(Eigen::Vector2d(0, std::numbers::e - 1)), {"c1"});
    const auto x = build_design(r, one);
    CHECK(x(0, 0) == doctest::Approx(0.0));
    CHECK(x(1, 0) == doctest::Approx(1.0));
  }
  SUBCASE("domain violation names the covariate") {
    DesignRecipe r;
    r.terms.push_back({TermKind::BoxCox, "c1", 0.5, -1.0});
    const auto msg = error_of([&] { build_design(r, d); });
    CHECK(msg.find("c1") != std::string::npos);
  }
  SUBCASE("nonzero-only terms skip zeros") {
    DesignRecipe r;
    r.terms.push_back({TermKind::IndicatorNonzero, "c1"});
    DesignTerm t{TermKind::BoxCox, "c1", 0.0, 0.0};
    t.nonzero_only = true;
    r.terms.push_back(t);
    const auto x = build_design(r, d);
    CHECK(x(2, 0) == 0.0);
    CHECK(x(2, 1) == 0.0);
    CHECK(x(0, 0) == 1.0);
    CHECK(x(0, 1) == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("raw recipe drops the reference level of categorical covariates") {
    const auto r = DesignRecipe::raw(d);
    const auto x = build_design(r, d);
    CHECK(r.has_intercept());
    REQUIRE(x.cols() == 3);  // intercept, level 2 dummy, c1
    CHECK(x.col(0).isOnes());
    const Eigen::Vector4d dummy(0, 1, 0, 1);
    bool found = false;
    for (Eigen::Index j = 0; j < x.cols(); ++j) found = found || x.col(j) == Eigen::VectorXd(dummy);
    CHECK(found);
    CHECK(build_design(r, d) == x);
  }
  SUBCASE("two intercepts are rejected") {
    DesignRecipe r = DesignRecipe::intercept();
    r.terms.push_back(DesignRecipe::intercept().terms[0]);
    CHECK_THROWS_AS(build_design(r, d), InputError);
  }
  SUBCASE("unknown covariate is rejected") {
    DesignRecipe r;
    r.terms.push_back({TermKind::Raw, "nope"});
    CHECK_THROWS_AS(build_design(r, d), InputError);
  }
}

TEST_CASE("recipe groups") {
  DesignRecipe r = DesignRecipe::intercept();
  r.terms.push_back({TermKind::IndicatorNonzero, "a", 1, 0, false, 0, 1});
  r.terms.push_back({TermKind::BoxCox, "a", 0, 0, true, 0, 1});
  r.terms.push_back({TermKind::Raw, "b", 1, 0, false, 0, 2});
  CHECK(r.groups() == std::vector<int>{1, 2});
  const auto dropped = r.without_group(1);
  CHECK(dropped.width() == 2);
  CHECK(dropped.terms[1].covariate == "b");
}

TEST_CASE("make_dataset validation") {
  CHECK_THROWS_AS(make_dataset({{0, 0}, {0, 1e-12}}, Eigen::Vector2d(1, 2), Eigen::MatrixXd(2, 0), {}),
                  InputError);
  CHECK_THROWS_AS(make_dataset({{0, 0}, {1, 1}}, Eigen::Vector2d(1, NAN), Eigen::MatrixXd(2, 0), {}),
                  InputError);
  const auto d = two_column_data();
  const auto s = d.subset({3, 1});
  CHECK(s.rows() == 2);
  CHECK(s.response[0] == 4.0);
  CHECK(s.locations[1] == Location{1, 0});
}

TEST_CASE("Rng streams are reproducible and distinct") {
  Rng a(7, 1, 2), b(7, 1, 2), c(7, 1, 3);
  const auto x = a.next();
  CHECK(x == b.next());
  CHECK(x != c.next());
  Rng u(3);
  double lo = 1, hi = 0;
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    CHECK(u.index(7) < 7);
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
}

TEST_CASE("parallel_for visits each index once and rethrows") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 5) throw FitError("boom");
                               }),
                  FitError);
}
