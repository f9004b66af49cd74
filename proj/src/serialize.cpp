#include "serialize.hpp"

#include "common.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace slmrf {

namespace {

using nlohmann::json;

constexpr const char* kSchema = "slmrf-model";
constexpr int kVersion = 1;

json vec_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd mat_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw VersionError("matrix entry has the wrong number of values");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = data[static_cast<std::size_t>(i * cols + c)];
  }
  return m;
}

json locations_to_json(const std::vector<Location>& locs) {
  json a = json::array();
  for (const auto& l : locs) a.push_back({l.easting, l.northing});
  return a;
}

std::vector<Location> locations_from_json(const json& j) {
  std::vector<Location> out;
  for (const auto& e : j) out.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
  return out;
}

const char* term_kind_name(TermKind k) {
  switch (k) {
    case TermKind::Intercept:
      return "intercept";
    case TermKind::Raw:
      return "raw";
    case TermKind::IndicatorNonzero:
      return "indicator";
    case TermKind::BoxCox:
      return "boxcox";
    case TermKind::BoxCoxSquared:
      return "boxcox_squared";
    case TermKind::CategoryDummy:
      return "category";
  }
  return "?";
}

TermKind term_kind_from(const std::string& s) {
  for (auto k : {TermKind::Intercept, TermKind::Raw, TermKind::IndicatorNonzero, TermKind::BoxCox,
                 TermKind::BoxCoxSquared, TermKind::CategoryDummy}) {
    if (s == term_kind_name(k)) return k;
  }
  throw VersionError("unknown design term kind '" + s + "'");
}

json recipe_to_json(const DesignRecipe& r) {
  json a = json::array();
  for (const auto& t : r.terms) {
    a.push_back({{"kind", term_kind_name(t.kind)},
                 {"covariate", t.covariate},
                 {"lambda1", t.lambda1},
                 {"lambda2", t.lambda2},
                 {"nonzero_only", t.nonzero_only},
                 {"level", t.level},
                 {"group", t.group}});
  }
  return a;
}

DesignRecipe recipe_from_json(const json& j) {
  DesignRecipe r;
  for (const auto& e : j) {
    DesignTerm t;
    t.kind = term_kind_from(e.at("kind").get<std::string>());
    t.covariate = e.at("covariate").get<std::string>();
    t.lambda1 = e.at("lambda1").get<double>();
    t.lambda2 = e.at("lambda2").get<double>();
    t.nonzero_only = e.at("nonzero_only").get<bool>();
    t.level = e.at("level").get<double>();
    t.group = e.at("group").get<int>();
    r.terms.push_back(std::move(t));
  }
  return r;
}

json cov_to_json(const CovarianceParams& c) {
  return {{"nugget", c.nugget}, {"partial_sill", c.partial_sill}, {"range", c.range}};
}

CovarianceParams cov_from_json(const json& j) {
  return {j.at("nugget").get<double>(), j.at("partial_sill").get<double>(),
          j.at("range").get<double>()};
}

json slm_to_json(const FittedSLM& m) {
  json j = {{"recipe", recipe_to_json(m.recipe)},
            {"beta", vec_to_json(m.beta)},
            {"beta_cov", mat_to_json(m.beta_cov)},
            {"cov", cov_to_json(m.cov)},
            {"method", to_string(m.method)},
            {"training_locations", locations_to_json(m.training_locations)},
            {"training_design", mat_to_json(m.training_design)},
            {"training_response", vec_to_json(m.training_response)},
            {"converged", m.converged}};
  if (m.knots) j["knots"] = locations_to_json(m.knots->knots);
  return j;
}

FittedSLM slm_from_json(const json& j) {
  FittedSLM m;
  m.recipe = recipe_from_json(j.at("recipe"));
  m.beta = vec_from_json(j.at("beta"));
  m.beta_cov = mat_from_json(j.at("beta_cov"));
  m.cov = cov_from_json(j.at("cov"));
  m.method = method_from_string(j.at("method").get<std::string>());
  m.training_locations = locations_from_json(j.at("training_locations"));
  m.training_design = mat_from_json(j.at("training_design"));
  m.training_response = vec_from_json(j.at("training_response"));
  m.converged = j.at("converged").get<bool>();
  if (j.contains("knots")) m.knots = KnotSet{locations_from_json(j.at("knots"))};
  return m;
}

json lm_to_json(const LinearModel& m) {
  return {{"recipe", recipe_to_json(m.recipe)},
          {"beta", vec_to_json(m.beta)},
          {"xtx_inv", mat_to_json(m.xtx_inv)},
          {"sigma2", m.sigma2},
          {"n", m.n}};
}

LinearModel lm_from_json(const json& j) {
  LinearModel m;
  m.recipe = recipe_from_json(j.at("recipe"));
  m.beta = vec_from_json(j.at("beta"));
  m.xtx_inv = mat_from_json(j.at("xtx_inv"));
  m.sigma2 = j.at("sigma2").get<double>();
  m.n = j.at("n").get<Eigen::Index>();
  return m;
}

json tree_to_json(const RegressionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    json e = {n.variable, n.threshold, n.left, n.right, n.leaf, n.unseen_left};
    if (!n.left_levels.empty() || !n.right_levels.empty()) {
      e.push_back(n.left_levels);
      e.push_back(n.right_levels);
    }
    nodes.push_back(std::move(e));
  }
  return {{"nodes", nodes}, {"leaf_rows", t.leaf_rows}, {"leaf_means", t.leaf_means}};
}

RegressionTree tree_from_json(const json& j) {
  RegressionTree t;
  for (const auto& e : j.at("nodes")) {
    TreeNode n;
    n.variable = e.at(0).get<int>();
    n.threshold = e.at(1).get<double>();
    n.left = e.at(2).get<int>();
    n.right = e.at(3).get<int>();
    n.leaf = e.at(4).get<int>();
    n.unseen_left = e.at(5).get<bool>();
    if (e.size() > 6) {
      n.left_levels = e.at(6).get<std::vector<double>>();
      n.right_levels = e.at(7).get<std::vector<double>>();
    }
    t.nodes.push_back(std::move(n));
  }
  t.leaf_rows = j.at("leaf_rows").get<std::vector<std::vector<int>>>();
  t.leaf_means = j.at("leaf_means").get<std::vector<double>>();
  return t;
}

json forest_to_json(const ForestModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
  return {{"trees", trees},
          {"oob_rows", m.oob_rows},
          {"mtry", m.mtry},
          {"min_node_size", m.min_node_size},
          {"seed", m.seed},
          {"bootstrap", m.bootstrap},
          {"names", m.names},
          {"categorical", m.categorical},
          {"training_response", vec_to_json(m.training_response)},
          {"response_order", m.response_order}};
}

ForestModel forest_from_json(const json& j) {
  ForestModel m;
  for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
  m.oob_rows = j.at("oob_rows").get<std::vector<std::vector<int>>>();
  m.mtry = j.at("mtry").get<int>();
  m.min_node_size = j.at("min_node_size").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.bootstrap = j.at("bootstrap").get<bool>();
  m.names = j.at("names").get<std::vector<std::string>>();
  m.categorical = j.at("categorical").get<std::vector<bool>>();
  m.training_response = vec_from_json(j.at("training_response"));
  m.response_order = j.at("response_order").get<std::vector<int>>();
  if (m.trees.empty() || m.oob_rows.size() != m.trees.size() ||
      m.categorical.size() != m.names.size() ||
      m.response_order.size() != static_cast<std::size_t>(m.training_response.size())) {
    throw VersionError("inconsistent forest entry");
  }
  return m;
}

// Structural checks so a damaged file fails on load rather than on predict.
void check_tree(const RegressionTree& t, std::size_t n) {
  const auto nodes = static_cast<int>(t.nodes.size());
  const auto leaves = static_cast<int>(t.leaf_rows.size());
  if (nodes == 0 || t.leaf_means.size() != t.leaf_rows.size()) {
    throw VersionError("inconsistent tree entry");
  }
  for (const auto& nd : t.nodes) {
    const bool ok = nd.is_leaf() ? nd.leaf >= 0 && nd.leaf < leaves
                                 : nd.left > 0 && nd.left < nodes && nd.right > 0 &&
                                       nd.right < nodes;
    if (!ok) throw VersionError("inconsistent tree entry");
  }
  for (const auto& rows : t.leaf_rows) {
    if (rows.empty()) throw VersionError("inconsistent tree entry");
    for (int r : rows) {
      if (r < 0 || static_cast<std::size_t>(r) >= n) throw VersionError("inconsistent tree entry");
    }
  }
}

}  // namespace

const char* model_kind_tag(const ModelVariant& model) {
  switch (model.index()) {
    case 0:
      return "slm";
    case 1:
      return "lm";
    case 2:
      return "forest";
    default:
      return "rfrk";
  }
}

std::string serialize_model(const SavedModel& saved) {
  json body = std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, FittedSLM>) {
          return slm_to_json(m);
        } else if constexpr (std::is_same_v<T, LinearModel>) {
          return lm_to_json(m);
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          return forest_to_json(m);
        } else {
          return {{"forest", forest_to_json(m.forest)},
                  {"residual_model", slm_to_json(m.residual_model)},
                  {"oob_residuals", m.oob_residuals}};
        }
      },
      saved.model);
  json doc = {{"schema", kSchema},
              {"version", kVersion},
              {"kind", model_kind_tag(saved.model)},
              {"label", saved.label},
              {"model", std::move(body)}};
  return doc.dump();
}

SavedModel deserialize_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception&) {
    throw VersionError("model file is truncated or not valid JSON");
  }
  try {
    if (!doc.is_object() || doc.value("schema", "") != kSchema) {
      throw VersionError("not a slmrf model file");
    }
    const int version = doc.at("version").get<int>();
    if (version != kVersion) {
      throw VersionError("unsupported model file version " + std::to_string(version) +
                         " (this build reads version " + std::to_string(kVersion) + ")");
    }
    SavedModel out;
    out.label = doc.at("label").get<std::string>();
    const auto kind = doc.at("kind").get<std::string>();
    const json& body = doc.at("model");
    if (kind == "slm") {
      out.model = slm_from_json(body);
    } else if (kind == "lm") {
      out.model = lm_from_json(body);
    } else if (kind == "forest") {
      auto f = forest_from_json(body);
      for (const auto& t : f.trees) check_tree(t, static_cast<std::size_t>(f.training_response.size()));
      out.model = std::move(f);
    } else if (kind == "rfrk") {
      RFRKModel m;
      m.forest = forest_from_json(body.at("forest"));
      for (const auto& t : m.forest.trees) {
        check_tree(t, static_cast<std::size_t>(m.forest.training_response.size()));
      }
      m.residual_model = slm_from_json(body.at("residual_model"));
      m.oob_residuals = body.at("oob_residuals").get<bool>();
      out.model = std::move(m);
    } else {
      throw VersionError("unknown model kind '" + kind + "'");
    }
    return out;
  } catch (const json::exception& e) {
    throw VersionError(std::string("malformed model file: ") + e.what());
  } catch (const InputError& e) {
    throw VersionError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const SavedModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot open '" + path + "' for writing");
  os << serialize_model(model);
  if (!os) throw InputError("failed writing '" + path + "'");
}

SavedModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open model file '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace slmrf
