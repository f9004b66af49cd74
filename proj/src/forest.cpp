#include "forest.hpp"

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace slmrf {

int default_mtry(std::size_t p) {
  return std::max(1, static_cast<int>(p / 3));
}

int RegressionTree::leaf_of(const double* x, const std::vector<bool>& categorical) const {
  int k = 0;
  while (!nodes[static_cast<std::size_t>(k)].is_leaf()) {
    const TreeNode& node = nodes[static_cast<std::size_t>(k)];
    const double v = x[node.variable];
    bool left;
    if (categorical[static_cast<std::size_t>(node.variable)]) {
      if (std::binary_search(node.left_levels.begin(), node.left_levels.end(), v)) {
        left = true;
      } else if (std::binary_search(node.right_levels.begin(), node.right_levels.end(), v)) {
        left = false;
      } else {
        left = node.unseen_left;
      }
    } else {
      left = v <= node.threshold;
    }
    k = left ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(k)].leaf;
}

std::size_t RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [k, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const auto& node = nodes[static_cast<std::size_t>(k)];
    if (!node.is_leaf()) {
      stack.push_back({node.left, d + 1});
      stack.push_back({node.right, d + 1});
    }
  }
  return best;
}

Eigen::MatrixXd ForestModel::features(const SpatialDataset& data) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.rows()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto c = data.column_index(names[j]);
    if (!c) throw InputError("prediction data lacks covariate '" + names[j] + "'");
    x.col(static_cast<Eigen::Index>(j)) = data.covariates.col(static_cast<Eigen::Index>(*c));
  }
  return x;
}

namespace {

struct Split {
  bool found = false;
  double gain = 0.0;
  int variable = -1;
  double threshold = 0.0;
  std::vector<double> left_levels;
  std::vector<double> right_levels;
};

class Grower {
 public:
  Grower(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<bool>& categorical,
         int mtry, int min_node_size, Rng& rng)
      : x_(x), y_(y), categorical_(categorical), mtry_(mtry), min_node_size_(min_node_size),
        rng_(rng) {}

  RegressionTree grow(std::vector<int> rows) {
    rows_ = std::move(rows);
    tree_ = RegressionTree{};
    grow_node(0, rows_.size());
    return std::move(tree_);
  }

 private:
  int grow_node(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const std::size_t size = end - begin;

    double lo = y_[rows_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = std::min(lo, y_[rows_[i]]);
      hi = std::max(hi, y_[rows_[i]]);
    }
    if (size < 2 * static_cast<std::size_t>(min_node_size_) || lo == hi) {
      make_leaf(id, begin, end, lo, hi);
      return id;
    }

    Split best;
    for (int v : sample_variables()) {
      if (categorical_[static_cast<std::size_t>(v)]) {
        categorical_split(v, begin, end, best);
      } else {
        numeric_split(v, begin, end, best);
      }
    }
    if (!best.found) {
      make_leaf(id, begin, end, lo, hi);
      return id;
    }

    auto goes_left = [&](int r) {
      const double v = x_(r, best.variable);
      if (categorical_[static_cast<std::size_t>(best.variable)]) {
        return std::binary_search(best.left_levels.begin(), best.left_levels.end(), v);
      }
      return v <= best.threshold;
    };
    const auto mid_it = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                              rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                              goes_left);
    const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());

    {
      TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
      node.variable = best.variable;
      node.threshold = best.threshold;
      node.left_levels = std::move(best.left_levels);
      node.right_levels = std::move(best.right_levels);
      node.unseen_left = mid - begin >= end - mid;
    }
    const int left = grow_node(begin, mid);
    const int right = grow_node(mid, end);
    tree_.nodes[static_cast<std::size_t>(id)].left = left;
    tree_.nodes[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  void make_leaf(int id, std::size_t begin, std::size_t end, double lo, double hi) {
    std::vector<int> rows(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                          rows_.begin() + static_cast<std::ptrdiff_t>(end));
    double sum = 0.0;
    for (int r : rows) sum += y_[r];
    const double mean = std::clamp(sum / static_cast<double>(rows.size()), lo, hi);
    tree_.nodes[static_cast<std::size_t>(id)].leaf = static_cast<int>(tree_.leaf_rows.size());
    tree_.leaf_rows.push_back(std::move(rows));
    tree_.leaf_means.push_back(mean);
  }

  // mtry distinct variables, ascending.
  std::vector<int> sample_variables() {
    const int p = static_cast<int>(x_.cols());
    std::vector<int> vars(static_cast<std::size_t>(p));
    std::iota(vars.begin(), vars.end(), 0);
    for (int i = 0; i < mtry_; ++i) {
      const auto j = static_cast<std::size_t>(i) + rng_.index(static_cast<std::size_t>(p - i));
      std::swap(vars[static_cast<std::size_t>(i)], vars[j]);
    }
    vars.resize(static_cast<std::size_t>(mtry_));
    std::sort(vars.begin(), vars.end());
    return vars;
  }

  void numeric_split(int v, std::size_t begin, std::size_t end, Split& best) {
    pairs_.clear();
    double total = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      pairs_.emplace_back(x_(rows_[i], v), y_[rows_[i]]);
      total += y_[rows_[i]];
    }
    std::sort(pairs_.begin(), pairs_.end());
    const double n = static_cast<double>(pairs_.size());
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < pairs_.size(); ++i) {
      left_sum += pairs_[i].second;
      if (pairs_[i].first == pairs_[i + 1].first) continue;
      const double nl = static_cast<double>(i + 1);
      const double right_sum = total - left_sum;
      const double gain = left_sum * left_sum / nl + right_sum * right_sum / (n - nl);
      if (!best.found || gain > best.gain) {
        double threshold = 0.5 * (pairs_[i].first + pairs_[i + 1].first);
        if (!(threshold < pairs_[i + 1].first)) threshold = pairs_[i].first;
        best.found = true;
        best.gain = gain;
        best.variable = v;
        best.threshold = threshold;
        best.left_levels.clear();
        best.right_levels.clear();
      }
    }
  }

  // Levels ordered by mean node response; candidate splits are prefixes of
  // that order.
  void categorical_split(int v, std::size_t begin, std::size_t end, Split& best) {
    struct Level {
      double value;
      double sum = 0.0;
      double count = 0.0;
    };
    std::vector<Level> levels;
    pairs_.clear();
    for (std::size_t i = begin; i < end; ++i) pairs_.emplace_back(x_(rows_[i], v), y_[rows_[i]]);
    std::sort(pairs_.begin(), pairs_.end());
    for (const auto& [lv, yv] : pairs_) {
      if (levels.empty() || levels.back().value != lv) levels.push_back({lv});
      levels.back().sum += yv;
      levels.back().count += 1.0;
    }
    if (levels.size() < 2) return;
    std::stable_sort(levels.begin(), levels.end(), [](const Level& a, const Level& b) {
      return a.sum / a.count < b.sum / b.count;
    });
    double total = 0.0, n = 0.0;
    for (const auto& l : levels) {
      total += l.sum;
      n += l.count;
    }
    double left_sum = 0.0, nl = 0.0;
    for (std::size_t t = 0; t + 1 < levels.size(); ++t) {
      left_sum += levels[t].sum;
      nl += levels[t].count;
      const double right_sum = total - left_sum;
      const double gain = left_sum * left_sum / nl + right_sum * right_sum / (n - nl);
      if (!best.found || gain > best.gain) {
        best.found = true;
        best.gain = gain;
        best.variable = v;
        best.threshold = static_cast<double>(t);
        best.left_levels.clear();
        best.right_levels.clear();
        for (std::size_t k = 0; k < levels.size(); ++k) {
          (k <= t ? best.left_levels : best.right_levels).push_back(levels[k].value);
        }
        std::sort(best.left_levels.begin(), best.left_levels.end());
        std::sort(best.right_levels.begin(), best.right_levels.end());
      }
    }
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  const std::vector<bool>& categorical_;
  int mtry_;
  int min_node_size_;
  Rng& rng_;
  std::vector<int> rows_;
  std::vector<std::pair<double, double>> pairs_;
  RegressionTree tree_;
};

double tree_value(const ForestModel& m, std::size_t b, const double* row) {
  const auto& t = m.trees[b];
  return t.leaf_means[static_cast<std::size_t>(t.leaf_of(row, m.categorical))];
}

// Mean of per-tree values, kept inside their range against rounding.
double forest_value(const ForestModel& m, const double* row) {
  double sum = 0.0, lo = 0.0, hi = 0.0;
  for (std::size_t b = 0; b < m.trees.size(); ++b) {
    const double v = tree_value(m, b, row);
    sum += v;
    lo = b == 0 ? v : std::min(lo, v);
    hi = b == 0 ? v : std::max(hi, v);
  }
  return std::clamp(sum / static_cast<double>(m.trees.size()), lo, hi);
}

void check_width(const ForestModel& m, Eigen::Index p) {
  if (static_cast<std::size_t>(p) != m.num_features()) {
    throw InputError("covariate vector has " + std::to_string(p) + " entries; the forest expects " +
                     std::to_string(m.num_features()));
  }
}

// Calls body(tree, row, leaf) for every tree and row, tree by tree within
// blocks of rows so each tree's nodes stay in cache. Blocks run in parallel;
// within a row, trees are visited in ascending order.
template <typename F>
void for_each_leaf(const ForestModel& m, const Eigen::MatrixXd& x, F&& body) {
  constexpr Eigen::Index block = 256;
  const Eigen::Index n = x.rows();
  const auto blocks = static_cast<std::size_t>((n + block - 1) / block);
  parallel_for(blocks, 0, [&](std::size_t k) {
    const Eigen::Index begin = static_cast<Eigen::Index>(k) * block;
    const Eigen::Index count = std::min(block, n - begin);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows =
        x.middleRows(begin, count);
    for (std::size_t b = 0; b < m.trees.size(); ++b) {
      for (Eigen::Index i = 0; i < count; ++i) {
        body(b, begin + i, m.trees[b].leaf_of(rows.row(i).data(), m.categorical));
      }
    }
  });
}

// Left-continuous inverse of the weighted CDF; the 1e-12 slack absorbs
// rounding in weights that sum to one.
std::vector<double> weighted_quantiles(const ForestModel& m, const double* w,
                                       const std::vector<double>& alphas) {
  const auto& y = m.training_response;
  std::vector<double> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    double cum = 0.0;
    double q = y[m.response_order.back()];
    for (int r : m.response_order) {
      if (w[r] == 0.0) continue;
      cum += w[r];
      q = y[r];
      if (cum >= a - 1e-12) break;
    }
    out.push_back(q);
  }
  return out;
}

void check_alphas(const std::vector<double>& alphas) {
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw InputError("quantile level must lie in (0, 1)");
  }
}

}  // namespace

ForestModel fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const ForestOptions& options, std::vector<std::string> names,
                       std::vector<bool> categorical) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (n < 2) throw InputError("random forest needs at least 2 rows");
  if (p < 1) throw InputError("random forest needs at least 1 covariate");
  if (y.size() != n) throw InputError("response length does not match the covariate rows");
  if (!x.allFinite() || !y.allFinite()) throw InputError("non-finite value in forest training data");
  if (options.trees < 1) throw InputError("number of trees must be at least 1");
  if (options.min_node_size < 1) throw InputError("min_node_size must be at least 1");
  const int mtry = options.mtry == 0 ? default_mtry(static_cast<std::size_t>(p)) : options.mtry;
  if (mtry < 1 || mtry > p) {
    throw InputError("mtry must lie in [1, " + std::to_string(p) + "], got " +
                     std::to_string(mtry));
  }
  if (names.empty()) {
    for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  }
  if (categorical.empty()) categorical.assign(static_cast<std::size_t>(p), false);
  if (names.size() != static_cast<std::size_t>(p) ||
      categorical.size() != static_cast<std::size_t>(p)) {
    throw InputError("covariate names do not match the covariate columns");
  }

  ForestModel m;
  m.mtry = mtry;
  m.min_node_size = options.min_node_size;
  m.seed = options.seed;
  m.bootstrap = options.bootstrap;
  m.names = std::move(names);
  m.categorical = std::move(categorical);
  m.training_response = y;
  m.response_order.resize(static_cast<std::size_t>(n));
  std::iota(m.response_order.begin(), m.response_order.end(), 0);
  std::stable_sort(m.response_order.begin(), m.response_order.end(),
                   [&](int a, int b) { return y[a] < y[b]; });

  const auto trees = static_cast<std::size_t>(options.trees);
  m.trees.resize(trees);
  m.oob_rows.resize(trees);
  parallel_for(trees, options.threads, [&](std::size_t b) {
    Rng rng(options.seed, b);
    std::vector<int> rows(static_cast<std::size_t>(n));
    if (options.bootstrap) {
      std::vector<char> in_bag(static_cast<std::size_t>(n), 0);
      for (auto& r : rows) {
        r = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
        in_bag[static_cast<std::size_t>(r)] = 1;
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!in_bag[static_cast<std::size_t>(i)]) m.oob_rows[b].push_back(static_cast<int>(i));
      }
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    Grower grower(x, y, m.categorical, mtry, options.min_node_size, rng);
    m.trees[b] = grower.grow(std::move(rows));
  });
  return m;
}

ForestModel fit_forest(const SpatialDataset& data, const ForestOptions& options) {
  if (!data.has_response()) throw InputError("dataset has no response column");
  std::vector<std::string> names;
  std::vector<bool> categorical;
  for (const auto& c : data.columns) {
    names.push_back(c.name);
    categorical.push_back(c.is_categorical);
  }
  return fit_forest(data.covariates, data.response, options, std::move(names),
                    std::move(categorical));
}

double rf_predict(const ForestModel& model, const Eigen::VectorXd& x) {
  check_width(model, x.size());
  return forest_value(model, x.data());
}

Eigen::VectorXd rf_predict(const ForestModel& model, const Eigen::MatrixXd& x) {
  check_width(model, x.cols());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.rows());
  Eigen::VectorXd lo(x.rows()), hi(x.rows());
  for_each_leaf(model, x, [&](std::size_t b, Eigen::Index i, int leaf) {
    const double v = model.trees[b].leaf_means[static_cast<std::size_t>(leaf)];
    sum[i] += v;
    lo[i] = b == 0 ? v : std::min(lo[i], v);
    hi[i] = b == 0 ? v : std::max(hi[i], v);
  });
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out[i] = std::clamp(sum[i] / static_cast<double>(model.trees.size()), lo[i], hi[i]);
  }
  return out;
}

Eigen::VectorXd qrf_weights(const ForestModel& model, const Eigen::VectorXd& x) {
  check_width(model, x.size());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(model.training_response.size());
  const double per_tree = 1.0 / static_cast<double>(model.trees.size());
  for (const auto& t : model.trees) {
    const auto& rows = t.leaf_rows[static_cast<std::size_t>(t.leaf_of(x.data(), model.categorical))];
    const double inc = per_tree / static_cast<double>(rows.size());
    for (int r : rows) w[r] += inc;
  }
  return w;
}

std::vector<double> qrf_quantiles(const ForestModel& model, const Eigen::VectorXd& x,
                                  const std::vector<double>& alphas) {
  check_alphas(alphas);
  const Eigen::VectorXd w = qrf_weights(model, x);
  return weighted_quantiles(model, w.data(), alphas);
}

Eigen::MatrixXd qrf_quantiles(const ForestModel& model, const Eigen::MatrixXd& x,
                              const std::vector<double>& alphas) {
  check_width(model, x.cols());
  check_alphas(alphas);
  const Eigen::Index n = model.training_response.size();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, x.rows());  // one column per site
  const double per_tree = 1.0 / static_cast<double>(model.trees.size());
  for_each_leaf(model, x, [&](std::size_t b, Eigen::Index i, int leaf) {
    const auto& rows = model.trees[b].leaf_rows[static_cast<std::size_t>(leaf)];
    const double inc = per_tree / static_cast<double>(rows.size());
    for (int r : rows) w(r, i) += inc;
  });
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(alphas.size()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto q = weighted_quantiles(model, w.col(i).data(), alphas);
    for (std::size_t a = 0; a < q.size(); ++a) out(i, static_cast<Eigen::Index>(a)) = q[a];
  }
  return out;
}

double qrf_quantile(const ForestModel& model, const Eigen::VectorXd& x, double alpha) {
  return qrf_quantiles(model, x, {alpha}).front();
}

Eigen::VectorXd oob_predict(const ForestModel& model, const Eigen::MatrixXd& x) {
  check_width(model, x.cols());
  const auto n = x.rows();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(n);
  for (std::size_t b = 0; b < model.trees.size(); ++b) {
    for (int r : model.oob_rows[b]) {
      if (r >= n) throw InputError("out-of-bag row outside the supplied covariate matrix");
      const Eigen::VectorXd row = x.row(r);
      sum[r] += tree_value(model, b, row.data());
      count[r] += 1.0;
    }
  }
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (count[i] > 0.0) {
      out[i] = sum[i] / count[i];
    } else {
      const Eigen::VectorXd row = x.row(i);
      out[i] = forest_value(model, row.data());
    }
  }
  return out;
}

Eigen::VectorXd permutation_importance(const ForestModel& model, const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& y, std::uint64_t seed,
                                       bool identity_permutation) {
  check_width(model, x.cols());
  if (y.size() != x.rows()) throw InputError("response length does not match the covariate rows");
  const auto p = x.cols();
  const std::size_t trees = model.trees.size();
  Eigen::MatrixXd per_tree = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(trees), p);
  std::vector<char> used(trees, 0);
  parallel_for(trees, 0, [&](std::size_t b) {
    const auto& oob = model.oob_rows[b];
    if (oob.empty()) return;
    used[b] = 1;
    const auto m = oob.size();
    Eigen::MatrixXd rows(p, static_cast<Eigen::Index>(m));  // one OOB row per column
    for (std::size_t k = 0; k < m; ++k) rows.col(static_cast<Eigen::Index>(k)) = x.row(oob[k]);
    auto mse = [&](const Eigen::MatrixXd& r) {
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        const double e = y[oob[k]] - tree_value(model, b, r.col(static_cast<Eigen::Index>(k)).data());
        s += e * e;
      }
      return s / static_cast<double>(m);
    };
    const double base = mse(rows);
    for (Eigen::Index j = 0; j < p; ++j) {
      std::vector<std::size_t> perm(m);
      std::iota(perm.begin(), perm.end(), 0);
      if (!identity_permutation) {
        Rng rng(seed, b, static_cast<std::uint64_t>(j));
        rng.shuffle(perm);
      }
      Eigen::MatrixXd permuted = rows;
      for (std::size_t k = 0; k < m; ++k) {
        permuted(j, static_cast<Eigen::Index>(k)) = rows(j, static_cast<Eigen::Index>(perm[k]));
      }
      per_tree(static_cast<Eigen::Index>(b), j) = mse(permuted) - base;
    }
  });
  const auto contributing = std::count(used.begin(), used.end(), 1);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
  if (contributing == 0) {
    warn("no tree has out-of-bag rows; permutation importance is zero");
    return out;
  }
  for (std::size_t b = 0; b < trees; ++b) {
    if (used[b]) out += per_tree.row(static_cast<Eigen::Index>(b)).transpose();
  }
  return out / static_cast<double>(contributing);
}

void write_importance_csv(std::ostream& os, const ForestModel& model,
                          const Eigen::VectorXd& importance) {
  if (static_cast<std::size_t>(importance.size()) != model.names.size()) {
    throw InputError("importance vector does not match the forest covariates");
  }
  std::vector<std::size_t> order(model.names.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return importance[static_cast<Eigen::Index>(a)] > importance[static_cast<Eigen::Index>(b)];
  });
  const auto old = os.precision(12);
  os << "covariate,importance\n";
  for (auto j : order) os << model.names[j] << ',' << importance[static_cast<Eigen::Index>(j)] << '\n';
  os.precision(old);
}

}  // namespace slmrf
