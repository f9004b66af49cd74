#include "core.hpp"

#include "common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace slmrf {

double distance(const Location& a, const Location& b) {
  return std::hypot(a.easting - b.easting, a.northing - b.northing);
}

std::optional<std::size_t> SpatialDataset::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j].name == name) return j;
  }
  return std::nullopt;
}

Eigen::VectorXd SpatialDataset::column(const std::string& name) const {
  auto j = column_index(name);
  if (!j) throw InputError("unknown covariate '" + name + "'");
  return covariates.col(static_cast<Eigen::Index>(*j));
}

SpatialDataset SpatialDataset::subset(const std::vector<std::size_t>& rows) const {
  SpatialDataset out;
  out.columns = columns;
  out.locations.reserve(rows.size());
  out.covariates.resize(static_cast<Eigen::Index>(rows.size()), covariates.cols());
  if (has_response()) out.response.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    out.locations.push_back(locations[rows[i]]);
    out.covariates.row(static_cast<Eigen::Index>(i)) = covariates.row(r);
    if (has_response()) out.response[static_cast<Eigen::Index>(i)] = response[r];
  }
  for (Eigen::Index j = 0; j < out.covariates.cols(); ++j) {
    const auto zeros = (out.covariates.col(j).array() == 0.0).count();
    out.columns[static_cast<std::size_t>(j)].zero_fraction =
        rows.empty() ? 0.0 : static_cast<double>(zeros) / static_cast<double>(rows.size());
  }
  return out;
}

void SpatialDataset::validate() {
  const auto n = static_cast<Eigen::Index>(locations.size());
  if (response.size() != 0 && response.size() != n) {
    throw InputError("response length " + std::to_string(response.size()) +
                     " does not match location count " + std::to_string(n));
  }
  if (covariates.rows() != n && !(covariates.size() == 0 && columns.empty())) {
    throw InputError("covariate rows do not match location count");
  }
  if (covariates.size() == 0) covariates.resize(n, 0);
  if (static_cast<std::size_t>(covariates.cols()) != columns.size()) {
    throw InputError("covariate column count does not match column metadata");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& loc = locations[static_cast<std::size_t>(i)];
    if (!std::isfinite(loc.easting) || !std::isfinite(loc.northing)) {
      throw InputError("non-finite coordinate at row " + std::to_string(i + 1));
    }
    if (response.size() != 0 && !std::isfinite(response[i])) {
      throw InputError("non-finite response at row " + std::to_string(i + 1));
    }
    for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
      if (!std::isfinite(covariates(i, j))) {
        throw InputError("non-finite value at row " + std::to_string(i + 1) + ", column " +
                         columns[static_cast<std::size_t>(j)].name);
      }
    }
  }
  // duplicates: sweep in easting order
  std::vector<std::size_t> order(locations.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return locations[a].easting < locations[b].easting;
  });
  constexpr double tol = 1e-9;
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      const auto& p = locations[order[a]];
      const auto& q = locations[order[b]];
      if (q.easting - p.easting > tol) break;
      if (std::abs(q.northing - p.northing) <= tol) {
        const auto lo = std::min(order[a], order[b]) + 1;
        const auto hi = std::max(order[a], order[b]) + 1;
        throw InputError("duplicate location at rows " + std::to_string(lo) + " and " +
                         std::to_string(hi));
      }
    }
  }
  for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
    const auto zeros = (covariates.col(j).array() == 0.0).count();
    columns[static_cast<std::size_t>(j)].zero_fraction =
        n == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(n);
  }
}

SpatialDataset make_dataset(std::vector<Location> locations, Eigen::VectorXd response,
                            Eigen::MatrixXd covariates, std::vector<std::string> names,
                            std::vector<bool> categorical) {
  SpatialDataset d;
  d.locations = std::move(locations);
  d.response = std::move(response);
  d.covariates = std::move(covariates);
  for (std::size_t j = 0; j < names.size(); ++j) {
    d.columns.push_back({names[j], j < categorical.size() && categorical[j], 0.0});
  }
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

Schema Schema::parse(const std::string& spec) {
  Schema s;
  for (const auto& entry : split_list(spec, ',')) {
    const auto colon = entry.find(':');
    if (colon == std::string::npos) {
      throw InputError("schema entry '" + entry + "' is not of the form role:column");
    }
    const auto role = trim(entry.substr(0, colon));
    const auto col = trim(entry.substr(colon + 1));
    if (col.empty()) throw InputError("schema entry '" + entry + "' names no column");
    if (role == "easting" || role == "x") {
      s.easting = col;
    } else if (role == "northing" || role == "y") {
      s.northing = col;
    } else if (role == "response") {
      s.response = col;
    } else if (role == "categorical") {
      s.categorical.push_back(col);
    } else if (role == "ignore") {
      s.ignored.push_back(col);
    } else if (role == "covariate") {
      s.covariates.push_back(col);
    } else {
      throw InputError("unknown schema role '" + role + "'");
    }
  }
  if (s.easting.empty() || s.northing.empty()) {
    throw InputError("schema must name an easting and a northing column");
  }
  return s;
}

SpatialDataset load_csv(const std::string& path, const Schema& schema) {
  if (schema.easting.empty() || schema.northing.empty()) {
    throw InputError("schema must name an easting and a northing column");
  }
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("'" + path + "' is empty (header row required)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> pos;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (!pos.emplace(header[j], j).second) {
      throw InputError("duplicate header column '" + header[j] + "'");
    }
  }
  auto require = [&](const std::string& name, const char* role) {
    auto it = pos.find(name);
    if (it == pos.end()) {
      throw InputError(std::string("missing ") + role + " column '" + name + "'");
    }
    return it->second;
  };
  const auto ie = require(schema.easting, "easting");
  const auto in_ = require(schema.northing, "northing");
  std::optional<std::size_t> ir;
  if (!schema.response.empty()) ir = require(schema.response, "response");
  for (const auto& c : schema.categorical) require(c, "categorical");

  std::set<std::string> reserved{schema.easting, schema.northing};
  if (!schema.response.empty()) reserved.insert(schema.response);
  reserved.insert(schema.ignored.begin(), schema.ignored.end());
  std::vector<std::string> cov_names;
  if (!schema.covariates.empty()) {
    for (const auto& c : schema.covariates) {
      require(c, "covariate");
      cov_names.push_back(c);
    }
    for (const auto& c : schema.categorical) {
      if (std::find(cov_names.begin(), cov_names.end(), c) == cov_names.end()) {
        cov_names.push_back(c);
      }
    }
  } else {
    for (const auto& h : header) {
      if (!reserved.count(h)) cov_names.push_back(h);
    }
  }
  std::vector<std::size_t> cov_pos;
  for (const auto& c : cov_names) cov_pos.push_back(pos.at(c));

  std::vector<Location> locs;
  std::vector<double> resp;
  std::vector<std::vector<double>> rows;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row_no;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw InputError("row " + std::to_string(row_no) + " has " + std::to_string(fields.size()) +
                       " fields, header has " + std::to_string(header.size()));
    }
    auto cell = [&](std::size_t j) {
      auto v = parse_number(fields[j]);
      if (!v) {
        throw InputError("non-numeric value '" + fields[j] + "' at row " +
                         std::to_string(row_no) + ", column " + header[j]);
      }
      return *v;
    };
    locs.push_back({cell(ie), cell(in_)});
    if (ir) resp.push_back(cell(*ir));
    std::vector<double> r;
    r.reserve(cov_pos.size());
    for (auto j : cov_pos) r.push_back(cell(j));
    rows.push_back(std::move(r));
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  // drop constant numeric columns: they alias the intercept
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < cov_names.size(); ++j) {
    bool constant = true;
    for (std::size_t i = 1; i < rows.size() && constant; ++i) {
      constant = rows[i][j] == rows[0][j];
    }
    if (constant && n > 1 && schema.drop_constant) {
      warn("dropping constant covariate '" + cov_names[j] + "'");
      continue;
    }
    keep.push_back(j);
  }

  SpatialDataset d;
  d.locations = std::move(locs);
  if (ir) d.response = Eigen::Map<Eigen::VectorXd>(resp.data(), n);
  d.covariates.resize(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto j = keep[k];
    for (Eigen::Index i = 0; i < n; ++i) {
      d.covariates(i, static_cast<Eigen::Index>(k)) = rows[static_cast<std::size_t>(i)][j];
    }
    const bool categorical = std::find(schema.categorical.begin(), schema.categorical.end(),
                                       cov_names[j]) != schema.categorical.end();
    d.columns.push_back({cov_names[j], categorical, 0.0});
  }
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// Design matrices

namespace {

std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string DesignTerm::label() const {
  const std::string lam = fmt_num(lambda1) + ";" + fmt_num(lambda2);
  switch (kind) {
    case TermKind::Intercept:
      return "(Intercept)";
    case TermKind::Raw:
      return covariate;
    case TermKind::IndicatorNonzero:
      return "I(" + covariate + "!=0)";
    case TermKind::BoxCox:
      return (nonzero_only ? "bcnz(" : "bc(") + covariate + ";" + lam + ")";
    case TermKind::BoxCoxSquared:
      return (nonzero_only ? "bcnz(" : "bc(") + covariate + ";" + lam + ")^2";
    case TermKind::CategoryDummy:
      return covariate + "==" + fmt_num(level);
  }
  return {};
}

bool DesignRecipe::has_intercept() const {
  return std::any_of(terms.begin(), terms.end(),
                     [](const DesignTerm& t) { return t.kind == TermKind::Intercept; });
}

bool DesignRecipe::intercept_only() const {
  return terms.size() == 1 && terms[0].kind == TermKind::Intercept;
}

std::vector<std::string> DesignRecipe::labels() const {
  std::vector<std::string> out;
  for (const auto& t : terms) out.push_back(t.label());
  return out;
}

std::vector<int> DesignRecipe::groups() const {
  std::vector<int> out;
  for (const auto& t : terms) {
    if (t.kind == TermKind::Intercept) continue;
    if (std::find(out.begin(), out.end(), t.group) == out.end()) out.push_back(t.group);
  }
  return out;
}

DesignRecipe DesignRecipe::without_group(int group) const {
  DesignRecipe out;
  for (const auto& t : terms) {
    if (t.kind == TermKind::Intercept || t.group != group) out.terms.push_back(t);
  }
  return out;
}

DesignRecipe DesignRecipe::without_term(std::size_t index) const {
  DesignRecipe out = *this;
  out.terms.erase(out.terms.begin() + static_cast<std::ptrdiff_t>(index));
  return out;
}

DesignRecipe DesignRecipe::intercept() {
  DesignRecipe r;
  r.terms.push_back({TermKind::Intercept, "", 1.0, 0.0, false, 0.0, 0});
  return r;
}

std::vector<DesignTerm> category_dummies(const SpatialDataset& data, const std::string& covariate,
                                         int group, bool drop_reference) {
  const auto col = data.column(covariate);
  std::set<double> levels(col.data(), col.data() + col.size());
  std::vector<DesignTerm> out;
  bool first = true;
  for (double lvl : levels) {
    if (first && drop_reference) {
      first = false;
      continue;
    }
    first = false;
    DesignTerm t;
    t.kind = TermKind::CategoryDummy;
    t.covariate = covariate;
    t.level = lvl;
    t.group = group;
    out.push_back(t);
  }
  return out;
}

DesignRecipe DesignRecipe::raw(const SpatialDataset& data) {
  DesignRecipe r = intercept();
  int group = 1;
  for (const auto& c : data.columns) {
    if (c.is_categorical) {
      auto dummies = category_dummies(data, c.name, group, true);
      r.terms.insert(r.terms.end(), dummies.begin(), dummies.end());
    } else {
      DesignTerm t;
      t.kind = TermKind::Raw;
      t.covariate = c.name;
      t.group = group;
      r.terms.push_back(t);
    }
    ++group;
  }
  return r;
}

double boxcox(double x, double lambda1, double lambda2) {
  const double shifted = x + lambda2;
  if (!(shifted > 0.0)) {
    throw InputError("Box-Cox domain violation: x = " + fmt_num(x) + " with shift " +
                     fmt_num(lambda2));
  }
  if (lambda1 == 0.0) return std::log(shifted);
  return (std::pow(shifted, lambda1) - 1.0) / lambda1;
}

Eigen::MatrixXd build_design(const DesignRecipe& recipe, const SpatialDataset& data) {
  const auto n = static_cast<Eigen::Index>(data.rows());
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(recipe.width()));
  int intercepts = 0;
  for (std::size_t k = 0; k < recipe.terms.size(); ++k) {
    const auto& t = recipe.terms[k];
    auto out = X.col(static_cast<Eigen::Index>(k));
    if (t.kind == TermKind::Intercept) {
      if (++intercepts > 1) throw InputError("design recipe has more than one intercept");
      out.setOnes();
      continue;
    }
    const auto j = data.column_index(t.covariate);
    if (!j) throw InputError("unknown covariate '" + t.covariate + "' in design recipe");
    const auto x = data.covariates.col(static_cast<Eigen::Index>(*j));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = x[i];
      switch (t.kind) {
        case TermKind::Raw:
          out[i] = v;
          break;
        case TermKind::IndicatorNonzero:
          out[i] = v != 0.0 ? 1.0 : 0.0;
          break;
        case TermKind::BoxCox:
        case TermKind::BoxCoxSquared: {
          if (t.nonzero_only && v == 0.0) {
            out[i] = 0.0;
            break;
          }
          if (!(v + t.lambda2 > 0.0)) {
            throw InputError("Box-Cox domain violation for covariate '" + t.covariate +
                             "': value " + fmt_num(v) + " with shift " + fmt_num(t.lambda2));
          }
          const double g = boxcox(v, t.lambda1, t.lambda2);
          out[i] = t.kind == TermKind::BoxCox ? g : g * g;
          break;
        }
        case TermKind::CategoryDummy:
          out[i] = v == t.level ? 1.0 : 0.0;
          break;
        case TermKind::Intercept:
          break;
      }
    }
  }
  return X;
}

}  // namespace slmrf
