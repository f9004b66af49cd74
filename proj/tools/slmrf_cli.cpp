// Command-line front end over the slmrf C API.
#include <slmrf/slmrf.h>

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

enum ExitCode { kSuccess = 0, kInternal = 1, kInput = 2, kFit = 3, kNonConvergence = 4 };

int exit_code(slmrf_status s) {
  switch (s) {
    case SLMRF_OK:
      return kSuccess;
    case SLMRF_ERR_INPUT:
    case SLMRF_ERR_IO:
    case SLMRF_ERR_VERSION:
      return kInput;
    case SLMRF_ERR_SINGULAR:
    case SLMRF_ERR_FIT:
      return kFit;
    case SLMRF_ERR_NONCONVERGENCE:
      return kNonConvergence;
    default:
      return kInternal;
  }
}

struct CliError {
  int code;
  std::string message;
};

void check(slmrf_status s, const std::string& context) {
  if (s != SLMRF_OK) {
    throw CliError{exit_code(s), context + ": " + slmrf_status_name(s) + ": " + slmrf_last_error()};
  }
}

struct RunConfig {
  std::string input;
  std::string schema;
  std::string model = "slm";
  std::string model_file;
  std::uint64_t seed = 1;
  std::string out = ".";
  int threads = 1;
  std::size_t knots = 0;
  int trees = 1000;
  int mtry = 0;
  int min_node_size = 5;
  int restarts = 3;
  int max_iterations = 0;
  std::string truncate;
  bool literal_tstat = false;
  bool oob_residuals = false;
  bool in_sample_residuals = false;
  int folds = 10;
  std::string models;
  bool fast = false;
  std::vector<int> cases;
  bool all_cases = false;
  int replicates = 20;
  int n_train = 500;
  int n_test = 1000;
};

CLI::Option* with_env(CLI::Option* o, const std::string& name) {
  std::string env = "SLMRF_" + name;
  std::transform(env.begin(), env.end(), env.begin(), [](unsigned char c) {
    return c == '-' ? '_' : static_cast<char>(std::toupper(c));
  });
  return o->envname(env);
}

void require_input(const RunConfig& c) {
  if (c.input.empty()) throw CliError{kInput, "--input is required"};
  if (c.schema.empty()) throw CliError{kInput, "--schema is required"};
}

struct Dataset {
  slmrf_dataset* ptr = nullptr;
  ~Dataset() { slmrf_dataset_free(ptr); }
};

struct Model {
  slmrf_model* ptr = nullptr;
  ~Model() { slmrf_model_free(ptr); }
};

void load(const std::string& path, const std::string& schema, Dataset& d) {
  check(slmrf_dataset_load_csv(path.c_str(), schema.c_str(), &d.ptr), "loading " + path);
}

slmrf_fit_config fit_config(const RunConfig& c) {
  slmrf_fit_config f;
  slmrf_fit_config_init(&f);
  f.model = c.model.c_str();
  f.seed = c.seed;
  f.threads = c.threads;
  f.knots = c.knots;
  f.trees = c.trees;
  f.mtry = c.mtry;
  f.min_node_size = c.min_node_size;
  f.restarts = c.restarts;
  f.max_iterations = c.max_iterations;
  f.literal_tstat = c.literal_tstat ? 1 : 0;
  f.in_sample_residuals = c.in_sample_residuals ? 1 : 0;
  return f;
}

std::string out_path(const RunConfig& c, const std::string& name) {
  return (fs::path(c.out) / name).string();
}

std::optional<std::pair<double, double>> parse_truncate(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto comma = s.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument(s);
    const double lo = std::stod(s.substr(0, comma));
    const double hi = std::stod(s.substr(comma + 1));
    if (!(lo <= hi)) throw std::invalid_argument(s);
    return std::make_pair(lo, hi);
  } catch (const std::exception&) {
    throw CliError{kInput, "--truncate expects lo,hi with lo <= hi, got '" + s + "'"};
  }
}

void write_manifest(const RunConfig& c, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& extra) {
  std::ofstream os(out_path(c, "manifest.txt"));
  if (!os) throw CliError{kInput, "cannot write manifest in " + c.out};
  os << "command=" << command << '\n'
     << "version=" << slmrf_version() << '\n'
     << "input=" << c.input << '\n'
     << "schema=" << c.schema << '\n'
     << "model=" << c.model << '\n'
     << "model-file=" << c.model_file << '\n'
     << "seed=" << c.seed << '\n'
     << "out=" << c.out << '\n'
     << "threads=" << c.threads << '\n'
     << "knots=" << c.knots << '\n'
     << "trees=" << c.trees << '\n'
     << "mtry=" << c.mtry << '\n'
     << "min-node-size=" << c.min_node_size << '\n'
     << "restarts=" << c.restarts << '\n'
     << "max-iterations=" << c.max_iterations << '\n'
     << "truncate=" << c.truncate << '\n'
     << "literal-tstat=" << c.literal_tstat << '\n'
     << "residuals=" << (c.in_sample_residuals ? "in-sample" : "out-of-bag") << '\n'
     << "folds=" << c.folds << '\n'
     << "models=" << c.models << '\n'
     << "fast=" << c.fast << '\n'
     << "replicates=" << c.replicates << '\n'
     << "n-train=" << c.n_train << '\n'
     << "n-test=" << c.n_test << '\n';
  for (const auto& [k, v] : extra) os << k << '=' << v << '\n';
}

int cmd_transform(const RunConfig& c) {
  require_input(c);
  Dataset d;
  load(c.input, c.schema, d);
  check(slmrf_transform(d.ptr, c.threads, out_path(c, "transforms.csv").c_str()), "transform");
  write_manifest(c, "transform", {});
  return kSuccess;
}

int cmd_fit(const RunConfig& c) {
  require_input(c);
  Dataset d;
  load(c.input, c.schema, d);
  const auto cfg = fit_config(c);
  Model m;
  const slmrf_status s = slmrf_model_fit(d.ptr, &cfg, &m.ptr);
  const std::string fit_message = slmrf_last_error();
  if (s != SLMRF_OK && s != SLMRF_ERR_NONCONVERGENCE) check(s, "fit");
  const std::string path = c.model_file.empty() ? out_path(c, "model.json") : c.model_file;
  check(slmrf_model_save(m.ptr, path.c_str()), "saving model");
  check(slmrf_model_write_reports(m.ptr, c.out.c_str()), "writing reports");
  write_manifest(c, "fit", {{"converged", slmrf_model_converged(m.ptr) ? "true" : "false"}});
  if (s == SLMRF_ERR_NONCONVERGENCE) {
    std::cerr << "slmrf: " << fit_message << " (model written to " << path << ")\n";
    return kNonConvergence;
  }
  return kSuccess;
}

int cmd_predict(const RunConfig& c) {
  if (c.input.empty()) throw CliError{kInput, "--input (prediction sites) is required"};
  if (c.schema.empty()) throw CliError{kInput, "--schema is required"};
  const auto bounds = parse_truncate(c.truncate);
  const std::string path = c.model_file.empty() ? out_path(c, "model.json") : c.model_file;
  Model m;
  check(slmrf_model_load(path.c_str(), &m.ptr), "loading model " + path);
  Dataset d;
  load(c.input, c.schema, d);
  const std::size_t n = slmrf_dataset_rows(d.ptr);
  std::vector<slmrf_prediction> p(n);
  check(slmrf_model_predict(m.ptr, d.ptr, p.data(), p.size()), "predict");

  std::size_t truncated = 0;
  std::ofstream os(out_path(c, "predictions.csv"));
  if (!os) throw CliError{kInput, "cannot write predictions in " + c.out};
  os.precision(12);
  os << "row,easting,northing,mean,variance,lo90,hi90,lo95,hi95\n";
  for (std::size_t i = 0; i < n; ++i) {
    double e = 0.0, no = 0.0;
    check(slmrf_dataset_location(d.ptr, i, &e, &no), "predict");
    double mean = p[i].mean;
    if (bounds) {
      const double t = std::clamp(mean, bounds->first, bounds->second);
      truncated += t != mean;
      mean = t;
    }
    os << i + 1 << ',' << e << ',' << no << ',' << mean << ',';
    if (!std::isnan(p[i].variance)) os << p[i].variance;
    os << ',' << p[i].lo90 << ',' << p[i].hi90 << ',' << p[i].lo95 << ',' << p[i].hi95 << '\n';
  }
  if (bounds) std::cout << "truncated " << truncated << " of " << n << " predictions\n";
  write_manifest(c, "predict", {{"model-label", slmrf_model_label(m.ptr)},
                                {"rows", std::to_string(n)},
                                {"truncated", std::to_string(truncated)}});
  return kSuccess;
}

int cmd_cv(const RunConfig& c) {
  require_input(c);
  Dataset d;
  load(c.input, c.schema, d);
  const auto cfg = fit_config(c);
  check(slmrf_cross_validate(d.ptr, &cfg, c.models.empty() ? nullptr : c.models.c_str(), c.folds,
                             c.fast ? 1 : 0, out_path(c, "cv.csv").c_str(),
                             out_path(c, "interval_lengths.csv").c_str()),
        "cross-validation");
  write_manifest(c, "cv", {});
  return kSuccess;
}

int cmd_simulate(RunConfig c) {
  std::vector<int> cases = c.cases;
  if (c.all_cases) cases = {1, 2, 3, 4, 5, 6, 7, 8};
  if (cases.empty()) throw CliError{kInput, "simulate needs --case N or --all"};
  slmrf_sim_config s;
  slmrf_sim_config_init(&s);
  s.seed = c.seed;
  s.replicates = c.replicates;
  s.n_train = c.n_train;
  s.n_test = c.n_test;
  s.trees = c.trees;
  s.mtry = c.mtry;
  s.restarts = c.restarts;
  s.threads = c.threads;
  s.in_sample_residuals = c.in_sample_residuals ? 1 : 0;
  check(slmrf_simulate(&s, cases.data(), cases.size(), out_path(c, "simulation.csv").c_str()),
        "simulate");
  std::string list;
  for (int k : cases) list += (list.empty() ? "" : ",") + std::to_string(k);
  write_manifest(c, "simulate", {{"cases", list}});
  return kSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig c;
  CLI::App app{
      "Spatial linear models and random forests for spatial prediction.\n"
      "Every option can also be set through an environment variable SLMRF_<NAME>\n"
      "(upper case, dashes as underscores, e.g. SLMRF_SEED) or a key=value\n"
      "config file given with --config. Command-line flags take precedence over\n"
      "environment variables, which take precedence over the config file.\n"
      "Exit codes: 0 success, 2 input error, 3 fit failure, 4 non-convergence."};
  app.set_config("--config", "", "key=value configuration file");
  app.require_subcommand(1);
  app.fallthrough();

  auto opt = [&](const std::string& name, auto& target, const std::string& help) {
    return with_env(app.add_option("--" + name, target, help), name);
  };
  auto flag = [&](const std::string& name, bool& target, const std::string& help) {
    return with_env(app.add_flag("--" + name, target, help), name);
  };
  opt("input", c.input, "input CSV (training data, or prediction sites for predict)");
  opt("schema", c.schema, "column roles, e.g. easting:x,northing:y,response:mmi,categorical:eco");
  opt("model", c.model, "ok|lm|slm|lm-tf|slm-tf|rf|rfrk")->capture_default_str();
  opt("model-file", c.model_file, "serialized model path (default <out>/model.json)");
  opt("seed", c.seed, "random seed")->capture_default_str();
  opt("out", c.out, "output directory")->capture_default_str();
  opt("threads", c.threads, "worker cap")->capture_default_str();
  opt("knots", c.knots, "reduced-rank knots during pruning (0: default)")->capture_default_str();
  opt("trees", c.trees, "random forest trees")->capture_default_str();
  opt("mtry", c.mtry, "split candidates per node (0: floor(p/3))")->capture_default_str();
  opt("min-node-size", c.min_node_size, "minimum node size")->capture_default_str();
  opt("restarts", c.restarts, "optimizer starts per covariance fit")->capture_default_str();
  opt("max-iterations", c.max_iterations, "likelihood evaluations per optimizer start (0: 500)")
      ->capture_default_str();
  opt("truncate", c.truncate, "clamp predicted means to lo,hi (predict)");
  flag("literal-tstat", c.literal_tstat, "prune the largest |t| first");
  flag("oob-residuals", c.oob_residuals, "RFRK: krige out-of-bag residuals (default)");
  flag("in-sample-residuals", c.in_sample_residuals, "RFRK: krige in-sample residuals");
  opt("folds", c.folds, "cross-validation folds")->capture_default_str();
  opt("models", c.models, "cv: comma-separated models (default: all seven)");
  flag("fast", c.fast,
       "cv: reuse the full-data recipe in each fold; simulate: 200 training points, 10 replicates");
  opt("case", c.cases, "simulate: case 1..8 (repeatable)");
  flag("all", c.all_cases, "simulate: all eight cases");
  opt("replicates", c.replicates, "simulate: replicates per case")->capture_default_str();
  opt("n-train", c.n_train, "simulate: training points")->capture_default_str();
  opt("n-test", c.n_test, "simulate: test points")->capture_default_str();

  auto* transform = app.add_subcommand("transform", "choose a transformation per covariate");
  auto* fit = app.add_subcommand("fit", "fit a model and write it with diagnostics");
  auto* predict = app.add_subcommand("predict", "predict at new sites from a saved model");
  auto* cv = app.add_subcommand("cv", "k-fold cross-validation comparison");
  auto* simulate = app.add_subcommand("simulate", "run the simulation study");
  for (auto* s : {transform, fit, predict, cv, simulate}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kInput;
  }

  try {
    if (c.oob_residuals && c.in_sample_residuals) {
      throw CliError{kInput, "--oob-residuals and --in-sample-residuals conflict"};
    }
    if (*simulate && c.fast) {
      if (app.get_option("--n-train")->count() == 0) c.n_train = 200;
      if (app.get_option("--replicates")->count() == 0) c.replicates = 10;
    }
    slmrf_set_threads(c.threads);
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (ec) throw CliError{kInput, "cannot create output directory " + c.out};
    if (*transform) return cmd_transform(c);
    if (*fit) return cmd_fit(c);
    if (*predict) return cmd_predict(c);
    if (*cv) return cmd_cv(c);
    return cmd_simulate(c);
  } catch (const CliError& e) {
    std::cerr << "slmrf: " << e.message << '\n';
    return e.code;
  }
}
