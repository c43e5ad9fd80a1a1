#include "mcrb/config.hpp"

#include "mcrb/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace mcrb {

namespace pt = boost::property_tree;

const std::vector<std::string>& RunConfig::schema() {
  static const std::vector<std::string> keys = {
      "run.command",      "run.seed",          "run.workers",          "run.M",
      "run.trials",       "run.estimator",     "run.param",            "run.grid",
      "run.m_grid",       "run.calibration_M", "model.id",             "model.mu_bar",
      "model.sigma2_bar", "model.rho",         "model.N",              "model.lambda",
      "model.eta",        "model.scatter",     "method.method",        "method.draws",
      "method.seed",      "method.hermite_nodes", "method.truncation_sds", "method.tolerance",
      "bayes.prior_shape", "bayes.prior_scale", "output.out",
  };
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& keys = schema();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ParseError("unknown configuration key '" + key + "'");
  values_[key] = value;
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string RunConfig::text(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

Scalar RunConfig::number(const std::string& key, Scalar fallback) const {
  auto v = get(key);
  return v ? parse_number(key, *v) : fallback;
}

Index RunConfig::integer(const std::string& key, Index fallback) const {
  auto v = get(key);
  return v ? parse_integer(key, *v) : fallback;
}

std::uint64_t RunConfig::seed(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  return v ? parse_seed(key, *v) : fallback;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    j[key.substr(0, dot)][key.substr(dot + 1)] = value;
  }
  return j;
}

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(fmt::format("config line {}: {}", e.line(), e.message()));
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ParseError("configuration key '" + section + "' must live in a section");
    for (const auto& [key, value] : body) config.set(section + "." + key, value.data());
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

Scalar parse_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const Scalar v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError(fmt::format("'{}': expected a number, got '{}'", key, text));
  }
}

Index parse_integer(const std::string& key, const std::string& text) {
  const Scalar v = parse_number(key, text);
  if (v != std::floor(v) || std::abs(v) > 9.0e15) {
    throw ParseError(fmt::format("'{}': expected an integer, got '{}'", key, text));
  }
  return static_cast<Index>(v);
}

std::uint64_t parse_seed(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    if (!text.empty() && text[0] == '-') throw std::invalid_argument("negative");
    const unsigned long long v = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ParseError(fmt::format("'{}': expected a non-negative integer seed, got '{}'", key, text));
  }
}

std::vector<Scalar> parse_grid(const std::string& text) {
  std::vector<Scalar> grid;
  if (text.find(':') != std::string::npos) {
    std::vector<Scalar> parts;
    std::size_t start = 0;
    while (true) {
      const auto colon = text.find(':', start);
      parts.push_back(parse_number("grid", text.substr(start, colon - start)));
      if (colon == std::string::npos) break;
      start = colon + 1;
    }
    if (parts.size() != 3) throw ParseError("grid '" + text + "': expected start:stop:step");
    const Scalar a = parts[0], b = parts[1], step = parts[2];
    if (!(step > 0) || b < a) throw DomainError("grid '" + text + "': need start <= stop and step > 0");
    const auto count = static_cast<Index>(std::floor((b - a) / step + 1e-9)) + 1;
    if (count > 100000) throw DomainError("grid '" + text + "' has too many points");
    for (Index i = 0; i < count; ++i) grid.push_back(a + static_cast<Scalar>(i) * step);
    return grid;
  }
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    grid.push_back(parse_number("grid", text.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return grid;
}

ModelSpec model_spec(const RunConfig& config) {
  ModelSpec spec;
  spec.id = config.text("model.id", "gaussian-wrong-mean");
  for (const auto& name : hyperparameter_names(spec.id)) {
    if (config.has("model." + name)) spec.hyper[name] = config.number("model." + name, 0);
  }
  // Hyperparameters that belong to another model are typos, not defaults.
  for (const auto& [key, value] : config.values()) {
    if (key.rfind("model.", 0) != 0 || key == "model.id" || key == "model.scatter") continue;
    const std::string name = key.substr(6);
    if (!spec.hyper.count(name)) {
      throw ParseError(fmt::format("model '{}' has no hyperparameter '{}'", spec.id, name));
    }
  }
  if (config.has("model.scatter")) {
    if (spec.id != "complex-t-scatter") throw ParseError("scatter applies to complex-t-scatter only");
    spec.scatter = *config.get("model.scatter");
  }
  return spec;
}

ExpectationOptions expectation_options(const RunConfig& config, Method fallback) {
  ExpectationOptions o;
  o.method = config.has("method.method") ? method_from_string(*config.get("method.method")) : fallback;
  const Index draws = config.integer("method.draws", static_cast<Index>(o.draws));
  if (draws < 2) throw DomainError("method.draws must be at least 2");
  o.draws = static_cast<std::size_t>(draws);
  o.seed = config.seed("method.seed", o.seed);
  const Index nodes = config.integer("method.hermite_nodes", 0);
  if (nodes < 0 || nodes > 200) throw DomainError("method.hermite_nodes must lie in [0, 200]");
  o.hermite_nodes = static_cast<int>(nodes);
  o.truncation_sds = config.number("method.truncation_sds", o.truncation_sds);
  if (!(o.truncation_sds > 0)) throw DomainError("method.truncation_sds must be positive");
  o.tolerance = config.number("method.tolerance", o.tolerance);
  if (!(o.tolerance > 0)) throw DomainError("method.tolerance must be positive");
  const Index workers = config.integer("run.workers", 0);
  if (workers < 0) throw DomainError("run.workers must be non-negative");
  o.workers = static_cast<unsigned>(workers);
  return o;
}

Scenario scenario_from(const RunConfig& config) {
  Scenario s;
  s.spec = model_spec(config);
  const ModelPair pair = make_model_pair(s.spec);
  s.estimator = config.has("run.estimator") ? estimator_from_string(*config.get("run.estimator"))
                                            : default_estimator(s.spec.id);
  // The AR(1) scenario is run at M = 3N unless told otherwise.
  s.m = config.integer("run.M", s.spec.id == "ar1-power" ? 3 * pair.truth.obs_dim : s.m);
  s.trials = config.integer("run.trials", s.trials);
  s.master_seed = config.seed("run.seed", s.master_seed);
  s.calibration_m = config.integer("run.calibration_M", s.calibration_m);
  s.expectation = expectation_options(config, pair.closed ? Method::closed_form : Method::quadrature);
  s.workers = s.expectation.workers;
  if (config.has("bayes.prior_shape") || config.has("bayes.prior_scale")) {
    s.prior = inverse_gamma_prior(config.number("bayes.prior_shape", 3), config.number("bayes.prior_scale", 2));
  }
  validate(s, pair);
  return s;
}

}  // namespace mcrb
