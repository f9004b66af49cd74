#include "slm.hpp"

#include "common.hpp"
#include "optimize.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace slmrf {

const char* to_string(Method m) { return m == Method::ML ? "ML" : "REML"; }

Method method_from_string(const std::string& s) {
  if (s == "ML" || s == "ml") return Method::ML;
  if (s == "REML" || s == "reml") return Method::REML;
  throw InputError("unknown estimation method '" + s + "'");
}

void FitOptions::validate() const {
  if (!(tolerance > 0.0)) throw InputError("fit tolerance must be positive");
  if (restarts < 1) throw InputError("optimizer restarts must be at least 1");
  if (max_iterations < 1) throw InputError("max iterations must be at least 1");
}

// ---------------------------------------------------------------------------

LikelihoodGeometry LikelihoodGeometry::full(const std::vector<Location>& locations) {
  LikelihoodGeometry g;
  g.rows_ = locations.size();
  g.dist_ = distance_matrix(locations);
  g.max_distance_ = g.dist_.size() ? g.dist_.maxCoeff() : 0.0;
  return g;
}

LikelihoodGeometry LikelihoodGeometry::reduced(const std::vector<Location>& locations,
                                               KnotSet knots) {
  if (knots.size() == 0 || knots.size() > locations.size()) {
    throw InputError("knot count must lie in [1, n]");
  }
  LikelihoodGeometry g;
  g.reduced_ = true;
  g.rows_ = locations.size();
  g.site_knot_ = distance_matrix(locations, knots.knots);
  g.knot_knot_ = distance_matrix(knots.knots);
  g.knots_ = std::move(knots);
  // the range heuristic needs the data extent, not the knot extent
  double minx = std::numeric_limits<double>::infinity(), maxx = -minx, miny = minx, maxy = -minx;
  for (const auto& l : locations) {
    minx = std::min(minx, l.easting);
    maxx = std::max(maxx, l.easting);
    miny = std::min(miny, l.northing);
    maxy = std::max(maxy, l.northing);
  }
  g.max_distance_ = locations.empty() ? 0.0 : std::hypot(maxx - minx, maxy - miny);
  return g;
}

namespace {

LikelihoodGeometry make_geometry(const std::vector<Location>& locations, const RankMode& rank,
                                 std::uint64_t seed) {
  if (!rank.reduced) return LikelihoodGeometry::full(locations);
  if (rank.knots) return LikelihoodGeometry::reduced(locations, *rank.knots);
  const std::size_t r = rank.knot_count ? rank.knot_count : default_knot_count(locations.size());
  return LikelihoodGeometry::reduced(locations, place_knots(locations, r, seed));
}

}  // namespace

SigmaInverse::SigmaInverse(const LikelihoodGeometry& geom, const CovarianceParams& params) {
  if (geom.is_reduced()) {
    reduced_.emplace(ReducedRankFactors::build(geom.site_knot_distances(), geom.knot_distances(),
                                               params));
    log_det_ = reduced_->log_det();
  } else {
    full_.emplace(sigma_from_distances(geom.site_distances(), params), "covariance matrix Sigma");
    log_det_ = full_->log_det();
  }
}

Eigen::MatrixXd SigmaInverse::apply(const Eigen::MatrixXd& v) const {
  return full_ ? full_->solve(v) : reduced_->apply(v);
}

// ---------------------------------------------------------------------------

namespace {

struct GlsState {
  Eigen::VectorXd beta;
  Eigen::MatrixXd beta_cov;
  double log_det_sigma = 0.0;
  double log_det_xtsx = 0.0;
  double quad = 0.0;
};

GlsState solve_gls(const CovarianceParams& theta, const Eigen::MatrixXd& x,
                   const Eigen::VectorXd& y, const LikelihoodGeometry& geom, bool want_cov) {
  if (static_cast<std::size_t>(y.size()) != geom.rows() || x.rows() != y.size()) {
    throw InputError("design, response and locations disagree in length");
  }
  const SigmaInverse inv(geom, theta);
  const auto k = x.cols();
  Eigen::MatrixXd xy(x.rows(), k + 1);
  xy.leftCols(k) = x;
  xy.col(k) = y;
  const Eigen::MatrixXd sxy = inv.apply(xy);
  GlsState s;
  s.log_det_sigma = inv.log_det();
  const double ysy = y.dot(sxy.col(k));
  if (k == 0) {
    s.quad = ysy;
    s.beta.resize(0);
    s.beta_cov.resize(0, 0);
    return s;
  }
  Eigen::MatrixXd a = x.transpose() * sxy.leftCols(k);
  a = 0.5 * (a + a.transpose()).eval();
  const Eigen::VectorXd b = x.transpose() * sxy.col(k);
  const Cholesky chol(a, "X' Sigma^-1 X");
  s.beta = chol.solve(b);
  s.log_det_xtsx = chol.log_det();
  s.quad = ysy - b.dot(s.beta);
  if (want_cov) s.beta_cov = chol.inverse();
  return s;
}

double nll_from_state(const GlsState& s, std::size_t n, Eigen::Index k, Method method) {
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double v = static_cast<double>(n) * log2pi + s.log_det_sigma + s.quad;
  if (method == Method::REML) v += -static_cast<double>(k) * log2pi + s.log_det_xtsx;
  return 0.5 * v;
}

}  // namespace

ProfiledBeta profile_beta(const CovarianceParams& theta, const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& response, const LikelihoodGeometry& geom) {
  theta.validate();
  auto s = solve_gls(theta, design, response, geom, true);
  return {std::move(s.beta), std::move(s.beta_cov)};
}

ProfiledBeta profile_beta(const CovarianceParams& theta, const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& response, const std::vector<Location>& locations,
                          const RankMode& rank, std::uint64_t seed) {
  return profile_beta(theta, design, response, make_geometry(locations, rank, seed));
}

double neg_log_likelihood(const CovarianceParams& theta, const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& response, const LikelihoodGeometry& geom,
                          Method method) {
  theta.validate();
  const auto s = solve_gls(theta, design, response, geom, false);
  return nll_from_state(s, geom.rows(), design.cols(), method);
}

double neg_log_likelihood(const CovarianceParams& theta, const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& response, const std::vector<Location>& locations,
                          Method method, const RankMode& rank, std::uint64_t seed) {
  return neg_log_likelihood(theta, design, response, make_geometry(locations, rank, seed), method);
}

double effective_range(const CovarianceParams& p) {
  if (!(p.partial_sill > 0.0)) return 0.0;
  const double v = -p.range * std::log(0.01 * p.sill() / p.partial_sill);
  return v > 0.0 ? v : 0.0;
}

double nugget_to_sill(const CovarianceParams& p) { return p.nugget / p.sill(); }

DesignRecipe drop_aliased(const DesignRecipe& recipe, const Eigen::MatrixXd& design) {
  DesignRecipe kept;
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < recipe.terms.size(); ++j) {
    cols.push_back(static_cast<Eigen::Index>(j));
    Eigen::MatrixXd trial(design.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      trial.col(static_cast<Eigen::Index>(c)) = design.col(cols[c]);
    }
    if (scaled_condition_number(trial) > 1e10) {
      warn("dropping near-aliased design column '" + recipe.terms[j].label() + "'");
      cols.pop_back();
      continue;
    }
    kept.terms.push_back(recipe.terms[j]);
  }
  return kept;
}

namespace {

CovarianceParams initial_params(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                const LikelihoodGeometry& geom) {
  double var = 0.0;
  const auto n = y.size();
  if (x.cols() == 0) {
    var = y.squaredNorm() / static_cast<double>(n);
  } else {
    const Eigen::VectorXd coef = x.colPivHouseholderQr().solve(y);
    const double rss = (y - x * coef).squaredNorm();
    const auto dof = std::max<Eigen::Index>(1, n - x.cols());
    var = rss / static_cast<double>(dof);
  }
  if (!(var > 0.0)) var = 1.0;
  double range = geom.max_distance() / 4.0;
  if (!(range > 0.0)) range = 1.0;
  return {0.5 * var, 0.5 * var, range};
}

}  // namespace

SLMDiagnostics diagnose(const FittedSLM& model, const LikelihoodGeometry& geom) {
  SLMDiagnostics d;
  d.neg_log_lik = neg_log_likelihood(model.cov, model.training_design, model.training_response,
                                     geom, model.method);
  const auto k = model.training_design.cols();
  d.aic = 2.0 * d.neg_log_lik + 2.0 * static_cast<double>(k + 3);
  d.effective_range = effective_range(model.cov);
  d.nugget_to_sill = nugget_to_sill(model.cov);
  d.t_stats.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    d.t_stats[j] = model.beta[j] / std::sqrt(model.beta_cov(j, j));
  }
  d.converged = model.converged;
  return d;
}

SLMFit fit_slm_design(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                      const std::vector<Location>& locations, const FitOptions& options,
                      DesignRecipe recipe) {
  options.validate();
  const auto n = static_cast<Eigen::Index>(locations.size());
  const auto k = design.cols();
  if (response.size() != n || design.rows() != n) {
    throw InputError("design, response and locations disagree in length");
  }
  if (n < k + 3) {
    throw FitError("need at least k + 3 = " + std::to_string(k + 3) + " sites to fit " +
                   std::to_string(k) + " fixed effects, have " + std::to_string(n));
  }
  const auto geom = make_geometry(locations, options.rank, options.seed);

  // The overall scale is profiled out: with Sigma = c * Sigma0(t, range),
  // where Sigma0 has unit partial sill and nugget exp(t), the minimizing c is
  // quad0 / m with m = n (ML) or n - k (REML).
  const double m_eff = static_cast<double>(options.method == Method::REML ? n - k : n);
  auto unit_params = [](const Eigen::VectorXd& v) {
    return CovarianceParams{std::exp(v[0]), 1.0, std::exp(v[1])};
  };
  auto profiled = [&](const Eigen::VectorXd& v, double* scale) {
    const auto st = solve_gls(unit_params(v), design, response, geom, false);
    const double c = st.quad / m_eff;
    if (scale) *scale = c;
    const double log2pi = std::log(2.0 * std::numbers::pi);
    double out = static_cast<double>(n) * log2pi + m_eff * std::log(c) + m_eff + st.log_det_sigma;
    if (options.method == Method::REML) out += -static_cast<double>(k) * log2pi + st.log_det_xtsx;
    return 0.5 * out;
  };
  auto objective = [&](const Eigen::VectorXd& v) {
    if (!v.allFinite() || v.cwiseAbs().maxCoeff() > 700.0) {
      return std::numeric_limits<double>::infinity();
    }
    try {
      const double value = profiled(v, nullptr);
      return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const CovarianceParams init = options.initial ? *options.initial
                                                : initial_params(design, response, geom);
  init.validate();
  const double tiny = 1e-6 * init.sill();
  Eigen::VectorXd start(2);
  start << std::log(std::max(init.nugget, tiny) / std::max(init.partial_sill, tiny)),
      std::log(init.range);

  NelderMeadOptions nm;
  nm.reltol = options.tolerance;
  nm.max_evaluations = options.max_iterations;
  Rng rng(options.seed, 0x736c6d /* slm */);
  NelderMeadResult best;
  best.value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  for (int r = 0; r < options.restarts; ++r) {
    Eigen::VectorXd s = start;
    if (r > 0) {
      for (Eigen::Index i = 0; i < s.size(); ++i) s[i] += 0.5 * rng.normal();
    }
    auto res = nelder_mead(objective, s, nm);
    evaluations += res.evaluations;
    if (res.value < best.value) best = res;
  }
  if (!std::isfinite(best.value)) {
    throw FitError("likelihood could not be evaluated at any trial covariance parameters");
  }
  // polish from the best vertex with a smaller simplex
  nm.initial_step = 0.1;
  auto polish = nelder_mead(objective, best.x, nm);
  evaluations += polish.evaluations;
  if (polish.value <= best.value) best = polish;
  const bool converged = best.converged;
  if (!converged) {
    warn("covariance parameter optimizer did not converge; keeping best parameters found");
  }

  SLMFit fit;
  auto& m = fit.model;
  double scale = 1.0;
  profiled(best.x, &scale);
  m.cov = {scale * std::exp(best.x[0]), scale, std::exp(best.x[1])};
  m.method = options.method;
  if (geom.is_reduced()) m.knots = geom.knots();
  m.training_locations = locations;
  m.training_design = design;
  m.training_response = response;
  m.recipe = std::move(recipe);
  m.converged = converged;
  auto pb = profile_beta(m.cov, design, response, geom);
  m.beta = std::move(pb.beta);
  m.beta_cov = std::move(pb.beta_cov);
  fit.diagnostics = diagnose(m, geom);
  fit.diagnostics.evaluations = evaluations;
  return fit;
}

SLMFit fit_slm(const SpatialDataset& data, const DesignRecipe& recipe, const FitOptions& options) {
  if (!data.has_response()) throw InputError("dataset has no response column");
  const Eigen::MatrixXd x0 = build_design(recipe, data);
  const DesignRecipe kept = drop_aliased(recipe, x0);
  const Eigen::MatrixXd x = kept.width() == recipe.width() ? x0 : build_design(kept, data);
  return fit_slm_design(x, data.response, data.locations, options, kept);
}

}  // namespace slmrf
