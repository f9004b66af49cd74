#include "sim.hpp"

#include "common.hpp"
#include "eval.hpp"
#include "forest.hpp"
#include "lm.hpp"
#include "pipelines.hpp"
#include "rfrk.hpp"
#include "slm.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

namespace slmrf {

const char* to_string(Dominance d) { return d == Dominance::Nonlinear ? "NL" : "L"; }

SimCase SimCase::preset(int id) {
  if (id < 1 || id > 8) throw InputError("simulation case must be 1..8");
  SimCase c;
  c.id = id;
  const int k = id - 1;
  c.dominance = k < 4 ? Dominance::Nonlinear : Dominance::Linear;
  c.r_squared = (k % 4) < 2 ? 0.1 : 0.9;
  const bool nugget_heavy = k % 2 == 0;
  c.nugget = nugget_heavy ? 9.0 : 1.0;
  c.partial_sill = nugget_heavy ? 1.0 : 9.0;
  return c;
}

std::vector<SimCase> SimCase::all() {
  std::vector<SimCase> out;
  for (int i = 1; i <= 8; ++i) out.push_back(preset(i));
  return out;
}

Eigen::VectorXd sample_grf(const std::vector<Location>& locations, const CovarianceParams& params,
                           std::uint64_t seed) {
  if (params.nugget < 0.0 || params.partial_sill < 0.0 || !(params.range > 0.0)) {
    throw InputError("invalid covariance parameters for field simulation");
  }
  const auto n = static_cast<Eigen::Index>(locations.size());
  Rng rng(seed, 0x677266 /* grf */);
  Eigen::VectorXd w(n), eps(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = rng.normal();
  for (Eigen::Index i = 0; i < n; ++i) eps[i] = rng.normal();
  Eigen::VectorXd out = std::sqrt(params.nugget) * eps;
  if (params.partial_sill > 0.0) {
    const Cholesky chol(correlated_part(distance_matrix(locations), params),
                        "simulated field covariance");
    out += chol.lower_times(w);
  }
  return out;
}

Eigen::VectorXd sim_nonlinear_term(const Eigen::MatrixXd& x) {
  return (5.0 * std::numbers::pi * x.col(0).array() * x.col(1).array()).sin().matrix();
}

Eigen::VectorXd sim_linear_term(const Eigen::MatrixXd& x) { return 2.0 * x.col(2) - x.col(3); }

double sample_variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) throw InputError("sample variance needs at least two values");
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

double calibrate_a(const Eigen::MatrixXd& x, double share) {
  if (!(share > 0.0 && share < 1.0)) throw InputError("nonlinear share must lie in (0, 1)");
  const double vg = sample_variance(sim_nonlinear_term(x));
  const double vh = sample_variance(sim_linear_term(x));
  if (!(vg > 0.0) || !(vh > 0.0)) throw InputError("degenerate covariate sample");
  return std::sqrt(share / (1.0 - share) * vh / vg);
}

double calibrate_c(const Eigen::MatrixXd& x, double a, double delta_variance, double r_squared) {
  if (!(r_squared > 0.0 && r_squared < 1.0)) throw InputError("R^2 target must lie in (0, 1)");
  if (!(delta_variance > 0.0)) throw InputError("error variance must be positive");
  const double vf = sample_variance(a * sim_nonlinear_term(x) + sim_linear_term(x));
  if (!(vf > 0.0)) throw InputError("degenerate covariate sample");
  return std::sqrt(r_squared / (1.0 - r_squared) * delta_variance / vf);
}

SimDataset generate_sim(const SimCase& c, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(c.n_train) + c.n_test;
  if (c.n_train < 1 || c.n_test < 1) throw InputError("simulation needs training and test points");
  Rng rng(seed, 0x73697465 /* site */);
  std::vector<Location> locs(static_cast<std::size_t>(n));
  Eigen::MatrixXd x(n, 4);
  for (auto& l : locs) l = {rng.uniform(), rng.uniform()};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = rng.uniform();
  }

  SimDataset d;
  d.delta = sample_grf(locs, c.error_params(), seed);
  d.a = calibrate_a(x, c.nonlinear_share());
  d.c = calibrate_c(x, d.a, sample_variance(d.delta), c.r_squared);
  d.x = x;
  d.f = d.c * (d.a * sim_nonlinear_term(x) + sim_linear_term(x));
  const Eigen::VectorXd y = d.f + d.delta;

  const std::vector<std::string> names{"x1", "x2", "x3", "x4"};
  auto part = [&](Eigen::Index begin, Eigen::Index count) {
    std::vector<Location> l(locs.begin() + begin, locs.begin() + begin + count);
    return make_dataset(std::move(l), y.segment(begin, count), x.middleRows(begin, count), names);
  };
  d.train = part(0, c.n_train);
  d.test = part(c.n_train, c.n_test);
  return d;
}

const char* sim_model_name(int model) {
  static const char* names[] = {"LM", "SLM", "RF", "RFRK"};
  return names[model];
}

namespace {

SimScore score(const Eigen::VectorXd& y, const std::vector<IntervalPrediction>& p) {
  Eigen::VectorXd mean(y.size());
  std::vector<Interval> i90, i95;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mean[static_cast<Eigen::Index>(i)] = p[i].mean;
    i90.push_back(p[i].i90);
    i95.push_back(p[i].i95);
  }
  SimScore s;
  s.rmspe = rmspe(y, mean);
  s.pic90 = interval_coverage(y, i90).value_or(0.0);
  s.pic95 = interval_coverage(y, i95).value_or(0.0);
  return s;
}

std::vector<IntervalPrediction> gaussian(const std::vector<PredictionResult>& r) {
  std::vector<IntervalPrediction> out;
  for (const auto& p : r) out.push_back(gaussian_intervals(p.mean, p.variance));
  return out;
}

}  // namespace

ReplicateResult run_replicate(const SimCase& sc, std::uint64_t seed, const SimOptions& options) {
  ReplicateResult r;
  SimCase c = sc;
  c.n_train = options.n_train;
  c.n_test = options.n_test;
  const SimDataset d = generate_sim(c, seed);
  r.a = d.a;
  r.c = d.c;
  {
    const Eigen::VectorXd y = d.f + d.delta;
    r.realized_r_squared = sample_variance(d.f) / sample_variance(y);
    const Eigen::VectorXd g = d.c * d.a * sim_nonlinear_term(d.x);
    r.realized_share = sample_variance(g) / sample_variance(d.f);
  }
  const Eigen::VectorXd& y_test = d.test.response;
  const DesignRecipe recipe = DesignRecipe::raw(d.train);

  const auto lm = fit_lm(d.train, recipe);
  r.scores[kSimLM] = score(y_test, gaussian(lm.predict(d.test)));

  FitOptions fo;
  fo.method = Method::REML;
  fo.rank = RankMode::full();
  fo.restarts = options.restarts;
  fo.seed = seed;
  const auto slm = fit_slm(d.train, recipe, fo);
  r.scores[kSimSLM] = score(y_test, gaussian(batch_predict(slm.model, d.test)));

  ForestOptions forest;
  forest.trees = options.trees;
  forest.mtry = options.mtry;
  forest.min_node_size = options.min_node_size;
  forest.seed = seed;
  forest.threads = 1;
  auto rf = fit_forest(d.train, forest);
  {
    const Eigen::MatrixXd x = rf.features(d.test);
    std::vector<IntervalPrediction> p(d.test.rows());
    const Eigen::VectorXd mean = rf_predict(rf, x);
    const Eigen::MatrixXd q = qrf_quantiles(rf, x, {0.025, 0.05, 0.95, 0.975});
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      p[i].mean = mean[r];
      p[i].i90 = {q(r, 1), q(r, 2)};
      p[i].i95 = {q(r, 0), q(r, 3)};
    }
    r.scores[kSimRF] = score(y_test, p);
  }

  RFRKOptions ro;
  ro.oob_residuals = options.oob_residuals;
  ro.residual.restarts = options.restarts;
  ro.residual.seed = seed;
  const auto rfrk = fit_rfrk(std::move(rf), d.train, ro);
  r.scores[kSimRFRK] = score(y_test, gaussian(rfrk_predict(rfrk, d.test)));
  r.ok = true;
  return r;
}

CaseReport run_case(SimCase c, std::uint64_t seed, const SimOptions& options) {
  if (options.replicates < 1) throw InputError("need at least one replicate");
  c.n_train = options.n_train;
  c.n_test = options.n_test;
  c.replicates = options.replicates;
  CaseReport rep;
  rep.spec = c;
  rep.replicates.resize(static_cast<std::size_t>(options.replicates));
  parallel_for(rep.replicates.size(), options.threads, [&](std::size_t i) {
    const std::uint64_t s = Rng(seed, static_cast<std::uint64_t>(c.id), i).next();
    try {
      rep.replicates[i] = run_replicate(c, s, options);
    } catch (const Error& e) {
      rep.replicates[i].error = e.what();
      warn("case " + std::to_string(c.id) + " replicate " + std::to_string(i + 1) +
           " failed: " + e.what());
    }
  });
  for (const auto& r : rep.replicates) {
    if (!r.ok) continue;
    ++rep.successes;
    rep.a += r.a;
    rep.c += r.c;
    for (int m = 0; m < kSimModels; ++m) {
      rep.scores[m].rmspe += r.scores[m].rmspe;
      rep.scores[m].pic90 += r.scores[m].pic90;
      rep.scores[m].pic95 += r.scores[m].pic95;
    }
  }
  if (rep.successes == 0) throw FitError("every replicate of case " + std::to_string(c.id) + " failed");
  const double k = rep.successes;
  rep.a /= k;
  rep.c /= k;
  for (auto& s : rep.scores) {
    s.rmspe /= k;
    s.pic90 /= k;
    s.pic95 /= k;
  }
  return rep;
}

void write_simulation_csv(std::ostream& os, const std::vector<CaseReport>& reports) {
  const auto old = os.precision(6);
  os << "case,dominance,r_squared,nugget,partial_sill,a,c";
  for (int m = 0; m < kSimModels; ++m) {
    os << ',' << sim_model_name(m) << "_RMSPE," << sim_model_name(m) << "_PIC90";
  }
  os << '\n';
  for (const auto& r : reports) {
    os << r.spec.id << ',' << to_string(r.spec.dominance) << ',' << r.spec.r_squared << ','
       << r.spec.nugget << ',' << r.spec.partial_sill << ',' << r.a << ',' << r.c;
    for (const auto& s : r.scores) os << ',' << s.rmspe << ',' << s.pic90;
    os << '\n';
  }
  os.precision(old);
}

}  // namespace slmrf
