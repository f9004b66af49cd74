#include "transform.hpp"

#include "common.hpp"
#include "lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <tuple>

namespace slmrf {

const char* to_string(TransformFamily f) {
  switch (f) {
    case TransformFamily::IndicatorOnly:
      return "indicator";
    case TransformFamily::IndicatorTimesBoxCox:
      return "indicator_x_boxcox";
    case TransformFamily::IndicatorPlusInteraction:
      return "indicator_plus_interaction";
    case TransformFamily::Linear:
      return "boxcox_linear";
    case TransformFamily::Quadratic:
      return "boxcox_quadratic";
  }
  return "?";
}

TransformFamily family_from_string(const std::string& s) {
  for (auto f : {TransformFamily::IndicatorOnly, TransformFamily::IndicatorTimesBoxCox,
                 TransformFamily::IndicatorPlusInteraction, TransformFamily::Linear,
                 TransformFamily::Quadratic}) {
    if (s == to_string(f)) return f;
  }
  throw InputError("unknown transform family '" + s + "'");
}

int family_size(TransformFamily f) {
  switch (f) {
    case TransformFamily::IndicatorPlusInteraction:
    case TransformFamily::Quadratic:
      return 2;
    default:
      return 1;
  }
}

std::vector<double> lambda2_grid(const Eigen::VectorXd& x, bool zero_inflated) {
  double lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (zero_inflated && x[i] == 0.0) continue;
    lo = std::min(lo, x[i]);
  }
  if (!std::isfinite(lo)) return {};
  std::vector<double> candidates = lo > 0.0 ? std::vector<double>{0.0, 1.0}
                                            : std::vector<double>{1.0, std::abs(lo) + 1.0};
  std::vector<double> out;
  for (double l2 : candidates) {
    if (lo + l2 > 0.0 && std::find(out.begin(), out.end(), l2) == out.end()) out.push_back(l2);
  }
  return out;
}

Eigen::MatrixXd candidate_columns(const Eigen::VectorXd& x, TransformFamily family, double lambda1,
                                  double lambda2) {
  const auto n = x.size();
  Eigen::MatrixXd c(n, family_size(family));
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool nz = x[i] != 0.0;
    auto g = [&] { return boxcox(x[i], lambda1, lambda2); };
    switch (family) {
      case TransformFamily::IndicatorOnly:
        c(i, 0) = nz ? 1.0 : 0.0;
        break;
      case TransformFamily::IndicatorTimesBoxCox:
        c(i, 0) = nz ? g() : 0.0;
        break;
      case TransformFamily::IndicatorPlusInteraction:
        c(i, 0) = nz ? 1.0 : 0.0;
        c(i, 1) = nz ? g() : 0.0;
        break;
      case TransformFamily::Linear:
        c(i, 0) = g();
        break;
      case TransformFamily::Quadratic: {
        const double v = g();
        c(i, 0) = v;
        c(i, 1) = v * v;
        break;
      }
    }
  }
  return c;
}

std::optional<double> fit_candidate_lm(const Eigen::VectorXd& y, const Eigen::MatrixXd& columns) {
  const auto n = y.size();
  Eigen::MatrixXd x(n, columns.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(columns.cols()) = columns;
  if (!x.allFinite()) return std::nullopt;
  const auto fit = ols(x, y);
  if (fit.rank < x.cols()) return std::nullopt;
  const double var = (y.array() - y.mean()).square().sum() / static_cast<double>(n);
  return lm_aic(fit.rss, n, x.cols(), var);
}

TransformSpec select_transform(const SpatialDataset& data, const std::string& covariate,
                               const TransformOptions& options) {
  if (!data.has_response()) throw InputError("dataset has no response column");
  const auto j = data.column_index(covariate);
  if (!j) throw InputError("unknown covariate '" + covariate + "'");
  const auto& meta = data.columns[*j];
  if (meta.is_categorical) {
    throw InputError("covariate '" + covariate + "' is categorical and is not transformed");
  }
  const Eigen::VectorXd x = data.covariates.col(static_cast<Eigen::Index>(*j));
  if (x.size() == 0 || (x.array() == x[0]).all()) {
    throw InputError("covariate '" + covariate + "' is constant");
  }
  const Eigen::VectorXd& y = data.response;

  TransformSpec best;
  best.covariate = covariate;
  best.zero_inflated = meta.zero_fraction > options.zero_inflation_threshold;
  bool found = false;
  // (aic, parameters, family, lambda1, lambda2), lexicographically smallest wins
  auto key = [](const TransformSpec& s) {
    return std::make_tuple(s.aic, family_size(s.family), static_cast<int>(s.family), s.lambda1,
                           s.lambda2);
  };
  auto consider = [&](TransformFamily family, double l1, double l2) {
    const auto aic = fit_candidate_lm(y, candidate_columns(x, family, l1, l2));
    if (!aic) return;
    TransformSpec s = best;
    s.family = family;
    s.lambda1 = l1;
    s.lambda2 = l2;
    s.aic = *aic;
    if (!found || key(s) < key(best)) {
      best = s;
      found = true;
    }
  };

  const auto shifts = lambda2_grid(x, best.zero_inflated);
  if (best.zero_inflated) {
    if (!shifts.empty()) consider(TransformFamily::IndicatorOnly, 0.0, shifts.front());
    for (double l1 : options.lambda1_grid) {
      for (double l2 : shifts) {
        consider(TransformFamily::IndicatorTimesBoxCox, l1, l2);
        consider(TransformFamily::IndicatorPlusInteraction, l1, l2);
      }
    }
  } else {
    for (double l1 : options.lambda1_grid) {
      for (double l2 : shifts) {
        consider(TransformFamily::Linear, l1, l2);
        consider(TransformFamily::Quadratic, l1, l2);
      }
    }
  }
  if (!found) {
    warn("no usable transformation for covariate '" + covariate + "'; using it untransformed");
    best.family = TransformFamily::Linear;
    best.lambda1 = 1.0;
    best.lambda2 = 0.0;
    best.raw_fallback = true;
    Eigen::MatrixXd col = x;
    best.aic = fit_candidate_lm(y, col).value_or(std::numeric_limits<double>::quiet_NaN());
  }
  return best;
}

std::vector<DesignTerm> transform_terms(const TransformSpec& spec, int group) {
  auto term = [&](TermKind kind, bool nonzero_only) {
    DesignTerm t;
    t.kind = kind;
    t.covariate = spec.covariate;
    t.lambda1 = spec.lambda1;
    t.lambda2 = spec.lambda2;
    t.nonzero_only = nonzero_only;
    t.group = group;
    return t;
  };
  if (spec.raw_fallback) return {term(TermKind::Raw, false)};
  switch (spec.family) {
    case TransformFamily::IndicatorOnly:
      return {term(TermKind::IndicatorNonzero, false)};
    case TransformFamily::IndicatorTimesBoxCox:
      return {term(TermKind::BoxCox, true)};
    case TransformFamily::IndicatorPlusInteraction:
      return {term(TermKind::IndicatorNonzero, false), term(TermKind::BoxCox, true)};
    case TransformFamily::Linear:
      return {term(TermKind::BoxCox, false)};
    case TransformFamily::Quadratic:
      return {term(TermKind::BoxCox, false), term(TermKind::BoxCoxSquared, false)};
  }
  return {};
}

TransformSelection select_all(const SpatialDataset& data, const TransformOptions& options,
                              int threads) {
  const std::size_t p = data.cols();
  std::vector<std::optional<TransformSpec>> specs(p);
  parallel_for(p, threads, [&](std::size_t j) {
    if (data.columns[j].is_categorical) return;
    try {
      specs[j] = select_transform(data, data.columns[j].name, options);
    } catch (const Error& e) {
      warn(std::string("transform search skipped: ") + e.what());
    }
  });
  TransformSelection out;
  out.recipe = DesignRecipe::intercept();
  int group = 1;
  for (std::size_t j = 0; j < p; ++j, ++group) {
    const auto& c = data.columns[j];
    if (c.is_categorical) {
      auto d = category_dummies(data, c.name, group, true);
      out.recipe.terms.insert(out.recipe.terms.end(), d.begin(), d.end());
      continue;
    }
    if (!specs[j]) continue;
    auto terms = transform_terms(*specs[j], group);
    out.recipe.terms.insert(out.recipe.terms.end(), terms.begin(), terms.end());
    out.specs.push_back(*specs[j]);
  }
  return out;
}

void write_transform_csv(std::ostream& os, const std::vector<TransformSpec>& specs) {
  const auto old = os.precision(12);
  os << "covariate,family,lambda1,lambda2,aic\n";
  for (const auto& s : specs) {
    os << s.covariate << ',' << (s.raw_fallback ? "raw" : to_string(s.family)) << ','
       << s.lambda1 << ',' << s.lambda2 << ',' << s.aic << '\n';
  }
  os.precision(old);
}

}  // namespace slmrf
