#include "slmrf/slmrf.h"

#include "common.hpp"
#include "eval.hpp"
#include "pipelines.hpp"
#include "serialize.hpp"
#include "sim.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

using namespace slmrf;

struct slmrf_dataset {
  SpatialDataset data;
};

struct slmrf_model {
  SavedModel saved;
  // Present only on freshly fitted models.
  std::optional<RecipeSelection> selection;
  std::optional<Eigen::VectorXd> importance;
  bool converged = true;
};

namespace {

class IoError : public Error {
 public:
  using Error::Error;
};

thread_local std::string g_last_error;

slmrf_status fail(slmrf_status s, const std::string& message) {
  g_last_error = message;
  return s;
}

template <typename F>
slmrf_status guard(F&& body) {
  g_last_error.clear();
  try {
    return body();
  } catch (const IoError& e) {
    return fail(SLMRF_ERR_IO, e.what());
  } catch (const InputError& e) {
    return fail(SLMRF_ERR_INPUT, e.what());
  } catch (const SingularityError& e) {
    return fail(SLMRF_ERR_SINGULAR, e.what());
  } catch (const FitError& e) {
    return fail(SLMRF_ERR_FIT, e.what());
  } catch (const VersionError& e) {
    return fail(SLMRF_ERR_VERSION, e.what());
  } catch (const std::exception& e) {
    return fail(SLMRF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SLMRF_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw InputError(what);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  return os;
}

std::ofstream open_in_dir(const std::string& dir, const std::string& name) {
  return open_out(dir + "/" + name);
}

PipelineOptions pipeline_options(const slmrf_fit_config& c) {
  PipelineOptions o;
  o.trees = c.trees;
  o.mtry = c.mtry;
  o.min_node_size = c.min_node_size;
  o.knots = c.knots;
  o.literal_tstat = c.literal_tstat != 0;
  o.oob_residuals = c.in_sample_residuals == 0;
  o.restarts = c.restarts;
  if (c.max_iterations > 0) o.max_iterations = c.max_iterations;
  o.threads = c.threads;
  return o;
}

ForestOptions forest_options(const slmrf_fit_config& c) {
  ForestOptions f;
  f.trees = c.trees;
  f.mtry = c.mtry;
  f.min_node_size = c.min_node_size;
  f.seed = c.seed;
  f.threads = c.threads;
  return f;
}

LikelihoodGeometry geometry_of(const FittedSLM& m) {
  return m.knots ? LikelihoodGeometry::reduced(m.training_locations, *m.knots)
                 : LikelihoodGeometry::full(m.training_locations);
}

struct KeyValues {
  std::ostringstream os;
  KeyValues() {
    os.precision(12);
    os << "key,value\n";
  }
  template <typename T>
  void add(const std::string& k, const T& v) {
    os << k << ',' << v << '\n';
  }
  void add_cov(const std::string& prefix, const CovarianceParams& c) {
    add(prefix + "nugget", c.nugget);
    add(prefix + "partial_sill", c.partial_sill);
    add(prefix + "range", c.range);
    add(prefix + "effective_range", effective_range(c));
    add(prefix + "nugget_to_sill", nugget_to_sill(c));
  }
};

void write_coefficients(const std::string& dir, const std::vector<std::string>& labels,
                        const Eigen::VectorXd& beta, const Eigen::MatrixXd& cov) {
  auto os = open_in_dir(dir, "coefficients.csv");
  os.precision(12);
  os << "term,estimate,std_error,t\n";
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double se = std::sqrt(cov(j, j));
    os << labels[static_cast<std::size_t>(j)] << ',' << beta[j] << ',' << se << ','
       << beta[j] / se << '\n';
  }
}

void write_reports(const slmrf_model& m, const std::string& dir) {
  KeyValues kv;
  kv.add("label", m.saved.label);
  kv.add("kind", model_kind_tag(m.saved.model));
  kv.add("converged", m.converged ? "true" : "false");
  if (const auto* slm = std::get_if<FittedSLM>(&m.saved.model)) {
    const auto d = diagnose(*slm, geometry_of(*slm));
    kv.add("n", slm->training_locations.size());
    kv.add("k", slm->beta.size());
    kv.add("method", to_string(slm->method));
    kv.add_cov("", slm->cov);
    kv.add("neg_log_lik", d.neg_log_lik);
    kv.add("aic", d.aic);
    write_coefficients(dir, slm->recipe.labels(), slm->beta, slm->beta_cov);
  } else if (const auto* lm = std::get_if<LinearModel>(&m.saved.model)) {
    kv.add("n", lm->n);
    kv.add("k", lm->beta.size());
    kv.add("sigma2", lm->sigma2);
    write_coefficients(dir, lm->recipe.labels(), lm->beta, lm->sigma2 * lm->xtx_inv);
  } else {
    const ForestModel* forest = std::get_if<ForestModel>(&m.saved.model);
    if (const auto* rk = std::get_if<RFRKModel>(&m.saved.model)) {
      forest = &rk->forest;
      kv.add("residuals", rk->oob_residuals ? "out_of_bag" : "in_sample");
      kv.add_cov("residual_", rk->residual_cov());
    }
    kv.add("n", forest->training_response.size());
    kv.add("trees", forest->trees.size());
    kv.add("mtry", forest->mtry);
    kv.add("min_node_size", forest->min_node_size);
    if (m.importance) {
      auto os = open_in_dir(dir, "importance.csv");
      write_importance_csv(os, *forest, *m.importance);
    }
  }
  {
    auto os = open_in_dir(dir, "diagnostics.csv");
    os << kv.os.str();
  }
  if (m.selection) {
    if (!m.selection->transforms.empty()) {
      auto os = open_in_dir(dir, "transforms.csv");
      write_transform_csv(os, m.selection->transforms);
    }
    if (!m.selection->stepwise.steps.empty()) {
      auto os = open_in_dir(dir, "stepwise_trace.csv");
      write_trace_csv(os, m.selection->stepwise);
    }
    if (!m.selection->pruning.steps.empty()) {
      auto os = open_in_dir(dir, "pruning_trace.csv");
      write_trace_csv(os, m.selection->pruning);
    }
  }
}

std::vector<ModelKind> parse_models(const char* models) {
  if (!models || !*models) return all_model_kinds();
  std::vector<ModelKind> out;
  std::stringstream ss(models);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(model_kind_from_string(item));
  }
  if (out.empty()) throw InputError("no models listed");
  return out;
}

slmrf_prediction gaussian_row(const PredictionResult& r) {
  const auto p = gaussian_intervals(r.mean, r.variance);
  return {p.mean, r.variance, p.i90.lo, p.i90.hi, p.i95.lo, p.i95.hi};
}

}  // namespace

extern "C" {

const char* slmrf_version(void) { return "0.1.0"; }

const char* slmrf_status_name(slmrf_status status) {
  switch (status) {
    case SLMRF_OK:
      return "ok";
    case SLMRF_ERR_INPUT:
      return "input error";
    case SLMRF_ERR_SINGULAR:
      return "singular matrix";
    case SLMRF_ERR_FIT:
      return "fit failure";
    case SLMRF_ERR_NONCONVERGENCE:
      return "non-convergence";
    case SLMRF_ERR_VERSION:
      return "model file error";
    case SLMRF_ERR_IO:
      return "i/o error";
    case SLMRF_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

const char* slmrf_last_error(void) { return g_last_error.c_str(); }

void slmrf_set_threads(int threads) { set_default_threads(threads); }

void slmrf_set_warning_handler(slmrf_warning_fn fn, void* user) {
  if (!fn) {
    set_warning_sink(nullptr);
    return;
  }
  set_warning_sink([fn, user](const std::string& m) { fn(m.c_str(), user); });
}

slmrf_status slmrf_dataset_load_csv(const char* path, const char* schema, slmrf_dataset** out) {
  return guard([&] {
    require(path && schema && out, "null argument");
    *out = nullptr;
    auto d = std::make_unique<slmrf_dataset>();
    d->data = load_csv(path, Schema::parse(schema));
    *out = d.release();
    return SLMRF_OK;
  });
}

size_t slmrf_dataset_rows(const slmrf_dataset* data) { return data ? data->data.rows() : 0; }
size_t slmrf_dataset_cols(const slmrf_dataset* data) { return data ? data->data.cols() : 0; }

slmrf_status slmrf_dataset_location(const slmrf_dataset* data, size_t row, double* easting,
                                    double* northing) {
  return guard([&] {
    require(data && easting && northing, "null argument");
    if (row >= data->data.rows()) throw InputError("row out of range");
    *easting = data->data.locations[row].easting;
    *northing = data->data.locations[row].northing;
    return SLMRF_OK;
  });
}

void slmrf_dataset_free(slmrf_dataset* data) { delete data; }

void slmrf_fit_config_init(slmrf_fit_config* c) {
  if (!c) return;
  c->model = "slm";
  c->seed = 1;
  c->threads = 0;
  c->knots = 0;
  c->trees = 1000;
  c->mtry = 0;
  c->min_node_size = 5;
  c->restarts = 3;
  c->max_iterations = 0;
  c->literal_tstat = 0;
  c->in_sample_residuals = 0;
}

slmrf_status slmrf_transform(const slmrf_dataset* data, int threads, const char* csv_path) {
  return guard([&] {
    require(data && csv_path, "null argument");
    const auto sel = select_all(data->data, {}, threads);
    auto os = open_out(csv_path);
    write_transform_csv(os, sel.specs);
    return SLMRF_OK;
  });
}

slmrf_status slmrf_model_fit(const slmrf_dataset* data, const slmrf_fit_config* config,
                             slmrf_model** out) {
  return guard([&] {
    require(data && config && out && config->model, "null argument");
    *out = nullptr;
    const ModelKind kind = model_kind_from_string(config->model);
    auto m = std::make_unique<slmrf_model>();
    m->saved.label = to_string(kind);
    const auto& d = data->data;
    switch (kind) {
      case ModelKind::RF: {
        auto f = fit_forest(d, forest_options(*config));
        m->importance = permutation_importance(f, f.features(d), d.response, config->seed);
        m->saved.model = std::move(f);
        break;
      }
      case ModelKind::RFRK: {
        RFRKOptions ro;
        ro.forest = forest_options(*config);
        ro.oob_residuals = config->in_sample_residuals == 0;
        ro.residual.restarts = config->restarts;
        if (config->max_iterations > 0) ro.residual.max_iterations = config->max_iterations;
        ro.residual.seed = config->seed;
        auto r = fit_rfrk(d, ro);
        m->importance =
            permutation_importance(r.forest, r.forest.features(d), d.response, config->seed);
        m->converged = r.converged();
        m->saved.model = std::move(r);
        break;
      }
      default: {
        auto sel = select_recipe(kind, d, pipeline_options(*config), config->seed);
        if (sel.slm_fit) {
          m->converged = sel.slm_fit->model.converged;
          m->saved.model = sel.slm_fit->model;
        } else {
          m->saved.model = fit_lm(d, sel.recipe);
        }
        m->selection = std::move(sel);
        break;
      }
    }
    const bool converged = m->converged;
    *out = m.release();
    if (!converged) {
      return fail(SLMRF_ERR_NONCONVERGENCE,
                  "covariance parameter optimizer did not converge; best parameters kept");
    }
    return SLMRF_OK;
  });
}

slmrf_status slmrf_model_save(const slmrf_model* model, const char* path) {
  return guard([&] {
    require(model && path, "null argument");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(std::string("cannot open '") + path + "' for writing");
    os << serialize_model(model->saved);
    if (!os) throw IoError(std::string("failed writing '") + path + "'");
    return SLMRF_OK;
  });
}

slmrf_status slmrf_model_load(const char* path, slmrf_model** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = nullptr;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(std::string("cannot open model file '") + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    auto m = std::make_unique<slmrf_model>();
    m->saved = deserialize_model(ss.str());
    if (const auto* slm = std::get_if<FittedSLM>(&m->saved.model)) m->converged = slm->converged;
    if (const auto* rk = std::get_if<RFRKModel>(&m->saved.model)) m->converged = rk->converged();
    *out = m.release();
    return SLMRF_OK;
  });
}

void slmrf_model_free(slmrf_model* model) { delete model; }

const char* slmrf_model_label(const slmrf_model* model) {
  return model ? model->saved.label.c_str() : "";
}

int slmrf_model_converged(const slmrf_model* model) { return model && model->converged ? 1 : 0; }

slmrf_status slmrf_model_write_reports(const slmrf_model* model, const char* dir) {
  return guard([&] {
    require(model && dir, "null argument");
    write_reports(*model, dir);
    return SLMRF_OK;
  });
}

slmrf_status slmrf_model_predict(const slmrf_model* model, const slmrf_dataset* sites,
                                 slmrf_prediction* out, size_t capacity) {
  return guard([&] {
    require(model && sites && out, "null argument");
    const auto& s = sites->data;
    if (capacity < s.rows()) throw InputError("prediction buffer is too small");
    const auto& v = model->saved.model;
    if (const auto* slm = std::get_if<FittedSLM>(&v)) {
      const auto r = batch_predict(*slm, s);
      for (std::size_t i = 0; i < r.size(); ++i) out[i] = gaussian_row(r[i]);
    } else if (const auto* lm = std::get_if<LinearModel>(&v)) {
      const auto r = lm->predict(s);
      for (std::size_t i = 0; i < r.size(); ++i) out[i] = gaussian_row(r[i]);
    } else if (const auto* rk = std::get_if<RFRKModel>(&v)) {
      const auto r = rfrk_predict(*rk, s);
      for (std::size_t i = 0; i < r.size(); ++i) out[i] = gaussian_row(r[i]);
    } else {
      const auto& f = std::get<ForestModel>(v);
      const Eigen::MatrixXd x = f.features(s);
      const Eigen::VectorXd mean = rf_predict(f, x);
      const Eigen::MatrixXd q = qrf_quantiles(f, x, {0.025, 0.05, 0.95, 0.975});
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out[i] = {mean[i], std::numeric_limits<double>::quiet_NaN(),
                  q(i, 1), q(i, 2), q(i, 0), q(i, 3)};
      }
    }
    return SLMRF_OK;
  });
}

slmrf_status slmrf_cross_validate(const slmrf_dataset* data, const slmrf_fit_config* config,
                                  const char* models, int folds, int fast, const char* table_csv,
                                  const char* lengths_csv) {
  return guard([&] {
    require(data && config && table_csv, "null argument");
    std::vector<CVReport> reports;
    for (ModelKind kind : parse_models(models)) {
      PipelineOptions po = pipeline_options(*config);
      if (fast && kind != ModelKind::RF && kind != ModelKind::RFRK) {
        po.fixed_recipe = select_recipe(kind, data->data, po, config->seed).recipe;
      }
      reports.push_back(kfold_cv(data->data, to_string(kind), make_pipeline(kind, po), folds,
                                 config->seed, config->threads));
    }
    {
      auto os = open_out(table_csv);
      write_cv_csv(os, reports);
    }
    if (lengths_csv) {
      auto os = open_out(lengths_csv);
      write_interval_summary_csv(os, reports);
    }
    return SLMRF_OK;
  });
}

void slmrf_sim_config_init(slmrf_sim_config* c) {
  if (!c) return;
  const SimOptions d;
  c->seed = 1;
  c->replicates = d.replicates;
  c->n_train = d.n_train;
  c->n_test = d.n_test;
  c->trees = d.trees;
  c->mtry = d.mtry;
  c->restarts = d.restarts;
  c->threads = 0;
  c->in_sample_residuals = 0;
}

slmrf_status slmrf_simulate(const slmrf_sim_config* config, const int* cases, size_t case_count,
                            const char* table_csv) {
  return guard([&] {
    require(config && cases && table_csv, "null argument");
    require(case_count > 0, "no simulation cases listed");
    SimOptions o;
    o.replicates = config->replicates;
    o.n_train = config->n_train;
    o.n_test = config->n_test;
    o.trees = config->trees;
    o.mtry = config->mtry;
    o.restarts = config->restarts;
    o.threads = config->threads;
    o.oob_residuals = config->in_sample_residuals == 0;
    std::vector<CaseReport> reports;
    for (size_t i = 0; i < case_count; ++i) {
      reports.push_back(run_case(SimCase::preset(cases[i]), config->seed, o));
    }
    auto os = open_out(table_csv);
    write_simulation_csv(os, reports);
    return SLMRF_OK;
  });
}

}  // extern "C"
