#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace slmrf {

// Planar coordinates in km.
struct Location {
  double easting = 0.0;
  double northing = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
};

double distance(const Location& a, const Location& b);

struct ColumnMeta {
  std::string name;
  bool is_categorical = false;
  double zero_fraction = 0.0;
};

// Locations, response and covariates for n sites. The response may be empty
// for prediction sites; otherwise it has one entry per location.
struct SpatialDataset {
  std::vector<Location> locations;
  Eigen::VectorXd response;
  Eigen::MatrixXd covariates;
  std::vector<ColumnMeta> columns;

  std::size_t rows() const { return locations.size(); }
  std::size_t cols() const { return columns.size(); }
  bool has_response() const { return response.size() > 0; }

  // Column index by name, or nullopt.
  std::optional<std::size_t> column_index(const std::string& name) const;
  Eigen::VectorXd column(const std::string& name) const;

  SpatialDataset subset(const std::vector<std::size_t>& rows) const;

  // Recomputes zero fractions and checks the invariants: finite values,
  // consistent sizes and no duplicate locations (1e-9 km tolerance).
  void validate();
};

// Builds a dataset from in-memory arrays and validates it.
SpatialDataset make_dataset(std::vector<Location> locations, Eigen::VectorXd response,
                            Eigen::MatrixXd covariates, std::vector<std::string> names,
                            std::vector<bool> categorical = {});

// Role assignment for CSV columns. Unlisted columns become covariates unless
// `covariates` is non-empty, in which case only those are read.
struct Schema {
  std::string easting;
  std::string northing;
  std::string response;  // empty: prediction sites without a response
  std::vector<std::string> categorical;
  std::vector<std::string> ignored;
  std::vector<std::string> covariates;
  bool drop_constant = true;

  // Parses "easting:x,northing:y,response:mmi,categorical:eco,ignore:id".
  static Schema parse(const std::string& spec);
};

SpatialDataset load_csv(const std::string& path, const Schema& schema);

// One column constructor of a design matrix.
enum class TermKind {
  Intercept,
  Raw,
  IndicatorNonzero,
  BoxCox,
  BoxCoxSquared,
  CategoryDummy,
};

struct DesignTerm {
  TermKind kind = TermKind::Intercept;
  std::string covariate;
  double lambda1 = 1.0;
  double lambda2 = 0.0;
  // BoxCox/BoxCoxSquared: multiply by I(x != 0), so zeros map to 0 and are
  // exempt from the domain check.
  bool nonzero_only = false;
  double level = 0.0;  // CategoryDummy
  // Terms sharing a group are added or removed together during selection.
  int group = 0;

  std::string label() const;
  friend bool operator==(const DesignTerm&, const DesignTerm&) = default;
};

struct DesignRecipe {
  std::vector<DesignTerm> terms;

  std::size_t width() const { return terms.size(); }
  bool has_intercept() const;
  bool intercept_only() const;
  std::vector<std::string> labels() const;
  // Distinct group ids in first-appearance order, excluding the intercept.
  std::vector<int> groups() const;
  DesignRecipe without_group(int group) const;
  DesignRecipe without_term(std::size_t index) const;

  static DesignRecipe intercept();
  // Intercept + one raw term per numeric covariate + reference-coded dummies
  // for categorical covariates.
  static DesignRecipe raw(const SpatialDataset& data);

  friend bool operator==(const DesignRecipe&, const DesignRecipe&) = default;
};

// Dummy terms for one categorical covariate; the lowest level is the
// reference when `drop_reference` is set.
std::vector<DesignTerm> category_dummies(const SpatialDataset& data, const std::string& covariate,
                                         int group, bool drop_reference);

double boxcox(double x, double lambda1, double lambda2);

Eigen::MatrixXd build_design(const DesignRecipe& recipe, const SpatialDataset& data);

}  // namespace slmrf
