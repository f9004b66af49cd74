#include "optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace slmrf {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& start, const NelderMeadOptions& opts) {
  const auto dim = start.size();
  const double inf = std::numeric_limits<double>::infinity();
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : inf;
  };

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(dim + 1), start);
  std::vector<double> vals(pts.size());
  for (Eigen::Index i = 0; i < dim; ++i) pts[static_cast<std::size_t>(i + 1)][i] += opts.initial_step;
  for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(pts.size());
  bool converged = false;
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const double best = vals[order.front()];
    const double worst = vals[order.back()];
    if (std::isfinite(worst) &&
        std::abs(worst - best) <= opts.reltol * (std::abs(best) + opts.reltol)) {
      converged = true;
      break;
    }
    if (evals >= opts.max_evaluations) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += pts[order[i]];
    centroid /= static_cast<double>(dim);

    const std::size_t hi = order.back();
    const double second = vals[order[order.size() - 2]];
    const Eigen::VectorXd xr = centroid + (centroid - pts[hi]);
    const double fr = eval(xr);
    if (fr < best) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[hi]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[hi] = xe;
        vals[hi] = fe;
      } else {
        pts[hi] = xr;
        vals[hi] = fr;
      }
      continue;
    }
    if (fr < second) {
      pts[hi] = xr;
      vals[hi] = fr;
      continue;
    }
    // contraction (outside if the reflection improved on the worst point)
    const bool outside = fr < vals[hi];
    const Eigen::VectorXd xc =
        outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (pts[hi] - centroid));
    const double fc = eval(xc);
    if (fc < std::min(fr, vals[hi])) {
      pts[hi] = xc;
      vals[hi] = fc;
      continue;
    }
    // shrink toward the best vertex
    const std::size_t lo = order.front();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == lo) continue;
      pts[i] = pts[lo] + 0.5 * (pts[i] - pts[lo]);
      vals[i] = eval(pts[i]);
    }
  }
  const std::size_t lo = order.front();
  return {pts[lo], vals[lo], evals, converged};
}

}  // namespace slmrf
