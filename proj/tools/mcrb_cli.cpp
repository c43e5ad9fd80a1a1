// mcrb command-line front end.

#include "mcrb/acceptance.hpp"
#include "mcrb/bayes.hpp"
#include "mcrb/bounds.hpp"
#include "mcrb/config.hpp"
#include "mcrb/errors.hpp"
#include "mcrb/estimators.hpp"
#include "mcrb/harness.hpp"
#include "mcrb/random.hpp"
#include "mcrb/table.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace {

using namespace mcrb;

enum Exit : int { ok = 0, failed = 1, usage = 64, data_error = 65, software = 70, regularity = 71 };

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::parse: return usage;
    case ErrorKind::domain:
    case ErrorKind::capability: return data_error;
    case ErrorKind::regularity: return regularity;
    case ErrorKind::numeric: return software;
  }
  return software;
}

/// Flag values as text, keyed by their config-file equivalent.
struct FlagValues {
  std::map<std::string, std::string> values;
  std::optional<std::string> config_path;
  std::optional<std::string> data_path;
  std::string only;
};

void add_flag(CLI::App* app, FlagValues& f, const std::string& names, const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(names, [&f, key](const std::string& v) { f.values[key] = v; },
                                         help + " [" + key + "]");
}

void add_common(CLI::App* app, FlagValues& f) {
  app->add_option("--config", f.config_path, "INI configuration file; flags override its values");
  add_flag(app, f, "--model", "model.id", "gaussian-wrong-mean | ar1-power | complex-t-scatter");
  add_flag(app, f, "--mu-bar", "model.mu_bar", "true mean (gaussian-wrong-mean)");
  add_flag(app, f, "--sigma2-bar", "model.sigma2_bar", "true variance");
  add_flag(app, f, "--rho", "model.rho", "AR(1) correlation coefficient");
  add_flag(app, f, "-N,--dimension", "model.N", "observation dimension");
  add_flag(app, f, "--lambda", "model.lambda", "complex-t shape");
  add_flag(app, f, "--eta", "model.eta", "complex-t scale");
  add_flag(app, f, "--scatter", "model.scatter", "complex-t scatter: identity | ar1:<rho>");
  add_flag(app, f, "-M,--samples", "run.M", "samples per data set");
  add_flag(app, f, "--seed", "run.seed", "master seed (default: $MCRB_SEED, else 42)");
  add_flag(app, f, "--workers", "run.workers", "worker threads, 0 = all cores (results do not depend on it)");
  add_flag(app, f, "--method", "method.method", "closed | quadrature | mc");
  add_flag(app, f, "--draws", "method.draws", "Monte Carlo draws for expectations");
  add_flag(app, f, "--mc-seed", "method.seed", "seed for Monte Carlo expectations");
  add_flag(app, f, "--hermite-nodes", "method.hermite_nodes", "Gauss-Hermite nodes per axis (0 = automatic)");
  add_flag(app, f, "--truncation-sds", "method.truncation_sds", "quadrature window half-width in standard deviations");
  add_flag(app, f, "--tolerance", "method.tolerance", "quadrature tolerance");
  add_flag(app, f, "--out", "output.out", "output file (CSV); metadata goes to <stem>.meta.json");
}

void add_trials(CLI::App* app, FlagValues& f) {
  add_flag(app, f, "--trials", "run.trials", "Monte Carlo trials");
  add_flag(app, f, "--estimator", "run.estimator", "mml-closed | mml-numeric | mb-squared | cmml");
  add_flag(app, f, "--prior-shape", "bayes.prior_shape", "inverse-gamma prior shape (default 3)");
  add_flag(app, f, "--prior-scale", "bayes.prior_scale", "inverse-gamma prior scale (default 2)");
}

RunConfig merged_config(const std::string& command, const FlagValues& f) {
  RunConfig config = f.config_path ? load_config(*f.config_path) : RunConfig{};
  if (auto c = config.get("run.command"); c && *c != command) {
    throw ParseError(fmt::format("config file is for command '{}', not '{}'", *c, command));
  }
  config.set("run.command", command);
  for (const auto& [key, value] : f.values) config.set(key, value);
  if (!config.has("run.seed")) {
    if (const char* env = std::getenv("MCRB_SEED")) {
      parse_seed("MCRB_SEED", env);
      config.set("run.seed", env);
    }
  }
  return config;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write '" + path + "'");
  out << text;
}

/// CSV to --out (with a metadata sidecar) or to stdout.
void emit(const RunConfig& config, const std::string& csv, nlohmann::json metadata) {
  auto out = config.get("output.out");
  if (!out) {
    std::cout << csv;
    return;
  }
  // Worker count and output path do not change results, so they stay out of the record.
  nlohmann::json echo = config.to_json();
  if (echo.contains("run")) echo["run"].erase("workers");
  echo.erase("output");
  metadata["config"] = echo;
  write_text(*out, csv);
  std::filesystem::path meta(*out);
  meta.replace_extension(".meta.json");
  write_text(meta.string(), metadata.dump(2) + "\n");
}

Observations read_data(const std::string& path, Index obs_dim) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read data file '" + path + "'");
  std::vector<std::vector<Scalar>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<Scalar> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(parse_number("data", cell));
    if (static_cast<Index>(row.size()) != obs_dim) {
      throw DomainError(fmt::format("data rows need {} values, got {}", obs_dim, row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DomainError("data file is empty");
  Observations x(obs_dim, static_cast<Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (Index i = 0; i < obs_dim; ++i) x(i, static_cast<Index>(j)) = rows[j][static_cast<std::size_t>(i)];
  return x;
}

std::vector<Index> parse_sizes(const std::string& text) {
  std::vector<Index> out;
  for (Scalar v : parse_grid(text)) {
    if (v != std::floor(v) || v < 1) throw DomainError(fmt::format("sample sizes must be positive integers, got {}", v));
    out.push_back(static_cast<Index>(v));
  }
  return out;
}

int cmd_bound(const RunConfig& config) {
  const ModelPair pair = make_model_pair(model_spec(config));
  const Index m = config.integer("run.M", 1);
  if (m < 1) throw DomainError("M must be at least 1");
  const ExpectationOptions options =
      expectation_options(config, pair.closed ? Method::closed_form : Method::quadrature);
  const BoundReport report = compute_bounds(pair, m, options);
  std::cout << to_key_value(report);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  if (config.has("output.out")) {
    nlohmann::json meta;
    meta["tool"] = "mcrb";
    meta["version"] = kToolVersion;
    meta["command"] = "bound";
    meta["method"] = to_string(options.method);
    meta["provenance"] = to_string(report.sandwich.provenance);
    emit(config, bound_csv_header(report) + "\n" + bound_csv_row(report) + "\n", meta);
  }
  return ok;
}

int cmd_estimate(const RunConfig& config, const FlagValues& f) {
  const ModelSpec spec = model_spec(config);
  const ModelPair pair = make_model_pair(spec);
  const std::uint64_t seed = config.seed("run.seed", 42);
  Observations data;
  if (f.data_path) {
    data = read_data(*f.data_path, pair.truth.obs_dim);
  } else {
    const Index m = config.integer("run.M", 100);
    if (m < 1) throw DomainError("M must be at least 1");
    data = pair.truth.sample(seed, m);
  }
  const EstimatorKind kind = config.has("run.estimator") ? estimator_from_string(*config.get("run.estimator"))
                                                         : default_estimator(spec.id);
  nlohmann::json meta;
  meta["tool"] = "mcrb";
  meta["version"] = kToolVersion;
  meta["command"] = "estimate";
  meta["estimator"] = to_string(kind);
  meta["data"] = f.data_path ? *f.data_path : fmt::format("simulated, seed {}", seed);

  std::string csv;
  if (kind == EstimatorKind::cmml) {
    if (!pair.scatter) throw CapabilityError("cmml needs a scatter model");
    const auto est = cmml_scatter_interleaved(data);
    const Index n = est.sigma_hat.rows();
    std::vector<std::string> head = {"sigma2_hat"}, row = {table::number(est.sigma2_hat)};
    table::append(head, table::matrix_names("sigma_hat_re", n, n));
    table::append(head, table::matrix_names("sigma_hat_im", n, n));
    table::append(row, table::values(Matrix(est.sigma_hat.real())));
    table::append(row, table::values(Matrix(est.sigma_hat.imag())));
    table::append(head, {"M", "seed"});
    table::append(row, {std::to_string(data.cols()), f.data_path ? "" : std::to_string(seed)});
    csv = table::join(head) + "\n" + table::join(row) + "\n";
  } else {
    EstimateRecord rec;
    if (kind == EstimatorKind::mml_closed) {
      rec = mml_closed(spec.id, data);
    } else if (kind == EstimatorKind::mml_numeric) {
      rec = mml_fit(pair.family, data, Vector::Ones(pair.family.dim));
      if (rec.flat_warning) std::cerr << "warning: flat likelihood at the maximizer\n";
    } else {
      const Prior prior =
          inverse_gamma_prior(config.number("bayes.prior_shape", 3), config.number("bayes.prior_scale", 2));
      rec.theta_hat = mb_estimate(posterior_compute(pair.family, prior, data), squared_loss());
      rec.m = data.cols();
    }
    rec.seed = f.data_path ? 0 : seed;
    csv = estimate_csv_header(rec.theta_hat.size()) + "\n" + estimate_csv_row(rec) + "\n";
  }
  emit(config, csv, meta);
  return ok;
}

int cmd_sweep(const RunConfig& config) {
  Scenario s = scenario_from(config);
  const auto param = config.get("run.param");
  if (!param) throw ParseError("sweep needs --param");
  // Only the mu_bar sweep has a built-in default grid.
  if (!config.has("run.grid") && *param != "mu_bar") throw ParseError("sweep needs --grid");
  const std::vector<Scalar> grid = parse_grid(config.text("run.grid", "0:2:0.25"));
  if (!config.has("run.grid")) std::cerr << "note: using the default grid 0:2:0.25\n";
  if (make_model_pair(s.spec).scatter) {
    const ScatterTable t = scatter_sweep(s, *param, grid);
    nlohmann::json meta = t.metadata;
    if (!config.has("run.grid")) meta["sweep"]["grid_source"] = "harness default";
    emit(config, t.csv(), meta);
    return ok;
  }
  const SweepTable t = sweep(s, *param, grid);
  nlohmann::json meta = t.metadata;
  meta["sweep"]["grid_source"] = config.has("run.grid") ? "user" : "harness default";
  emit(config, t.csv(), meta);
  for (const auto& r : t.rows)
    if (!r.error.empty()) std::cerr << "sweep point " << r.value << " failed: " << r.error << "\n";
  return ok;
}

int cmd_consistency(const RunConfig& config) {
  Scenario s = scenario_from(config);
  if (!config.has("run.trials")) s.trials = 200;
  const bool scatter = make_model_pair(s.spec).scatter.has_value();
  const std::vector<Index> sizes = parse_sizes(config.text("run.m_grid", scatter ? "100,1000,10000" : "100,1000,10000,100000"));
  const ConsistencyTable t = consistency_curve(s, sizes);
  std::cerr << "log-log slope of the median error: " << table::number(t.slope) << "\n";
  emit(config, t.csv(), t.metadata);
  return ok;
}

int cmd_bayes(const RunConfig& config) {
  const ModelSpec spec = model_spec(config);
  const ModelPair pair = make_model_pair(spec);
  const std::uint64_t seed = config.seed("run.seed", 42);
  const Prior prior =
      inverse_gamma_prior(config.number("bayes.prior_shape", 3), config.number("bayes.prior_scale", 2));
  std::vector<Index> sizes = config.has("run.m_grid") ? parse_sizes(*config.get("run.m_grid"))
                             : config.has("run.M")    ? std::vector<Index>{config.integer("run.M", 100)}
                                                      : std::vector<Index>{100, 1000, 10000};
  const Index largest = *std::max_element(sizes.begin(), sizes.end());
  const Observations data = pair.truth.sample(seed, largest);
  std::vector<PosteriorGrid> posts;
  for (Index m : sizes) {
    if (m < 1) throw DomainError("sample sizes must be positive");
    posts.push_back(posterior_compute(pair.family, prior, data.leftCols(m)));
  }
  const ExpectationOptions options =
      expectation_options(config, pair.closed ? Method::closed_form : Method::quadrature);
  const Vector theta0 = scenario_theta0(pair, options);
  nlohmann::json meta;
  meta["tool"] = "mcrb";
  meta["version"] = kToolVersion;
  meta["command"] = "bayes";
  meta["prior"] = prior.name;
  meta["seed"] = seed;
  meta["theta0"] = theta0[0];
  meta["note"] = "posteriors use nested prefixes of one simulated data stream";
  emit(config, concentration_csv(concentration_stat(posts, sizes, theta0)), meta);
  return ok;
}

int cmd_acceptance(const RunConfig& config, const FlagValues& f) {
  AcceptanceOptions o;
  o.seed = config.seed("run.seed", o.seed);
  o.workers = static_cast<unsigned>(std::max<Index>(0, config.integer("run.workers", 0)));
  if (!f.only.empty()) {
    for (Scalar v : parse_grid(f.only)) o.only.push_back(static_cast<int>(v));
  }
  bool all = true;
  for (int id : o.only.empty() ? std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10} : o.only) {
    const CriterionResult r = run_criterion(id, o);
    std::cout << format_result(r) << std::endl;
    all = all && r.passed;
  }
  return all ? ok : failed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Misspecified Cramér-Rao bounds: bounds, estimators, Monte Carlo sweeps"};
  app.require_subcommand(1);
  FlagValues f;

  auto* bound = app.add_subcommand("bound", "pseudo-true parameter, sandwich, MCRB, LB and CRB");
  add_common(bound, f);
  auto* estimate = app.add_subcommand("estimate", "run an estimator on simulated or given data");
  add_common(estimate, f);
  add_trials(estimate, f);
  estimate->add_option("--data", f.data_path, "CSV file, one observation per line");
  auto* sweep_cmd = app.add_subcommand("sweep", "Monte Carlo sweep over one hyperparameter");
  add_common(sweep_cmd, f);
  add_trials(sweep_cmd, f);
  add_flag(sweep_cmd, f, "--param", "run.param", "hyperparameter to sweep");
  add_flag(sweep_cmd, f, "--grid", "run.grid", "start:stop:step or comma list");
  add_flag(sweep_cmd, f, "--calibration-M", "run.calibration_M", "sample size of the sample-MCRB calibration run");
  auto* consistency = app.add_subcommand("consistency", "estimation error versus M");
  add_common(consistency, f);
  add_trials(consistency, f);
  add_flag(consistency, f, "--m-grid", "run.m_grid", "sample sizes (comma list or start:stop:step)");
  auto* bayes = app.add_subcommand("bayes", "posterior concentration table");
  add_common(bayes, f);
  add_flag(bayes, f, "--prior-shape", "bayes.prior_shape", "inverse-gamma prior shape (default 3)");
  add_flag(bayes, f, "--prior-scale", "bayes.prior_scale", "inverse-gamma prior scale (default 2)");
  add_flag(bayes, f, "--m-grid", "run.m_grid", "sample sizes (comma list)");
  auto* acceptance = app.add_subcommand("acceptance", "run the acceptance criteria");
  add_flag(acceptance, f, "--seed", "run.seed", "master seed");
  add_flag(acceptance, f, "--workers", "run.workers", "worker threads, 0 = all cores");
  acceptance->add_option("--only", f.only, "criteria to run, e.g. 1,3,10");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    const RunConfig config = merged_config(command, f);
    if (command == "bound") return cmd_bound(config);
    if (command == "estimate") return cmd_estimate(config, f);
    if (command == "sweep") return cmd_sweep(config);
    if (command == "consistency") return cmd_consistency(config);
    if (command == "bayes") return cmd_bayes(config);
    return cmd_acceptance(config, f);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return software;
  }
}
