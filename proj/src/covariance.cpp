#include "covariance.hpp"

#include "common.hpp"

#include <cmath>
#include <limits>

namespace slmrf {

void CovarianceParams::validate() const {
  if (!(nugget >= 0.0) || !(partial_sill >= 0.0) || !(range > 0.0) || !(sill() > 0.0) ||
      !std::isfinite(nugget) || !std::isfinite(partial_sill) || !std::isfinite(range)) {
    throw InputError("invalid covariance parameters (nugget >= 0, partial sill >= 0, range > 0, "
                     "nugget + partial sill > 0 required)");
  }
}

double exp_cov(double d, const CovarianceParams& params) {
  const double c = params.partial_sill * std::exp(-d / params.range);
  return d == 0.0 ? c + params.nugget : c;
}

Eigen::MatrixXd distance_matrix(const std::vector<Location>& a, const std::vector<Location>& b) {
  Eigen::MatrixXd d(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t j = 0; j < b.size(); ++j) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = distance(a[i], b[j]);
    }
  }
  return d;
}

Eigen::MatrixXd distance_matrix(const std::vector<Location>& a) {
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    d(j, j) = 0.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = distance(a[static_cast<std::size_t>(i)], a[static_cast<std::size_t>(j)]);
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Eigen::MatrixXd correlated_part(const Eigen::MatrixXd& dist, const CovarianceParams& params) {
  return params.partial_sill * (-dist.array() / params.range).exp();
}

Eigen::MatrixXd sigma_from_distances(const Eigen::MatrixXd& dist, const CovarianceParams& params) {
  const auto n = dist.rows();
  Eigen::MatrixXd s(n, n);
  const double inv_range = 1.0 / params.range;
  for (Eigen::Index j = 0; j < n; ++j) {
    s(j, j) = params.partial_sill + params.nugget;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = params.partial_sill * std::exp(-dist(i, j) * inv_range);
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

Eigen::MatrixXd full_sigma(const std::vector<Location>& locations, const CovarianceParams& params) {
  params.validate();
  return sigma_from_distances(distance_matrix(locations), params);
}

std::size_t default_knot_count(std::size_t n) {
  const std::size_t r = (n + 9) / 10;
  return std::max<std::size_t>(1, std::min<std::size_t>(r, 200));
}

namespace {

struct Clustering {
  std::vector<Location> centers;
  double wss = std::numeric_limits<double>::infinity();
};

double sq(double v) { return v * v; }

double sqdist(const Location& a, const Location& b) {
  return sq(a.easting - b.easting) + sq(a.northing - b.northing);
}

Clustering kmeans_once(const std::vector<Location>& pts, std::size_t k, Rng& rng) {
  const std::size_t n = pts.size();
  // k-means++ seeding
  std::vector<Location> centers;
  centers.reserve(k);
  centers.push_back(pts[rng.index(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sqdist(pts[i], centers[0]);
  while (centers.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);
    }
    centers.push_back(pts[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sqdist(pts[i], centers.back()));
  }

  std::vector<std::size_t> assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sqdist(pts[i], centers[c]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<double> se(k, 0.0), sn(k, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      se[assign[i]] += pts[i].easting;
      sn[assign[i]] += pts[i].northing;
      ++count[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) {
        centers[c] = {se[c] / static_cast<double>(count[c]), sn[c] / static_cast<double>(count[c])};
        continue;
      }
      // empty cluster: move it to the point farthest from its own center
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = sqdist(pts[i], centers[assign[i]]);
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      centers[c] = pts[far];
      assign[far] = c;
    }
  }
  Clustering out;
  out.wss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double bd = std::numeric_limits<double>::infinity();
    for (const auto& c : centers) bd = std::min(bd, sqdist(pts[i], c));
    out.wss += bd;
  }
  out.centers = std::move(centers);
  return out;
}

}  // namespace

KnotSet place_knots(const std::vector<Location>& locations, std::size_t r, std::uint64_t seed) {
  const std::size_t n = locations.size();
  if (r < 1 || r > n) {
    throw InputError("knot count " + std::to_string(r) + " must lie in [1, " + std::to_string(n) +
                     "]");
  }
  if (r == n) return {locations};
  if (r == 1) {
    double e = 0.0, no = 0.0;
    for (const auto& l : locations) {
      e += l.easting;
      no += l.northing;
    }
    return {{{e / static_cast<double>(n), no / static_cast<double>(n)}}};
  }
  Clustering best;
  for (std::uint64_t restart = 0; restart < 25; ++restart) {
    Rng rng(seed, 0x6b6e6f74 /* knot */, restart);
    auto c = kmeans_once(locations, r, rng);
    if (c.wss < best.wss) best = std::move(c);
  }
  for (std::size_t a = 0; a < best.centers.size(); ++a) {
    for (std::size_t b = a + 1; b < best.centers.size(); ++b) {
      if (best.centers[a] == best.centers[b]) {
        throw FitError("knot placement produced coincident knots");
      }
    }
  }
  return {std::move(best.centers)};
}

ReducedRankFactors ReducedRankFactors::build(const Eigen::MatrixXd& site_knot_dist,
                                             const Eigen::MatrixXd& knot_knot_dist,
                                             const CovarianceParams& params) {
  ReducedRankFactors f;
  f.S = correlated_part(site_knot_dist, params);
  f.K = correlated_part(knot_knot_dist, params);
  f.nugget = params.nugget;
  return f;
}

ReducedRankInverse::ReducedRankInverse(ReducedRankFactors factors) : f_(std::move(factors)) {
  if (!(f_.nugget > 0.0)) {
    throw SingularityError("reduced-rank covariance requires a positive nugget");
  }
  const auto n = f_.S.rows();
  const auto r = f_.S.cols();
  Eigen::MatrixXd inner = f_.nugget * f_.K;
  inner.noalias() += f_.S.transpose() * f_.S;
  inner_ = Cholesky(std::move(inner), "reduced-rank inner matrix (nugget K + S'S)");
  const Cholesky k(f_.K, "knot covariance matrix K");
  log_det_ = inner_.log_det() - k.log_det() +
             static_cast<double>(n - r) * std::log(f_.nugget);
}

Eigen::MatrixXd ReducedRankInverse::apply(const Eigen::MatrixXd& v) const {
  Eigen::MatrixXd stv = f_.S.transpose() * v;
  Eigen::MatrixXd out = v;
  out.noalias() -= f_.S * inner_.solve(stv);
  return out / f_.nugget;
}

Eigen::VectorXd ReducedRankInverse::apply(const Eigen::VectorXd& v) const {
  Eigen::VectorXd stv = f_.S.transpose() * v;
  Eigen::VectorXd out = v;
  out.noalias() -= f_.S * inner_.solve(stv);
  return out / f_.nugget;
}

}  // namespace slmrf
