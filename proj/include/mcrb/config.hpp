#pragma once

#include "mcrb/harness.hpp"
#include "mcrb/models.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mcrb {

/// Effective run configuration as `section.key` → text. Every key must be in
/// the schema; config files load first and command-line flags override them.
class RunConfig {
 public:
  /// Accepted `section.key` names.
  static const std::vector<std::string>& schema();

  /// Throws ParseError for keys outside the schema.
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  Scalar number(const std::string& key, Scalar fallback) const;
  Index integer(const std::string& key, Index fallback) const;
  std::uint64_t seed(const std::string& key, std::uint64_t fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  nlohmann::json to_json() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Strict INI: sections and keys outside the schema raise ParseError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Strict numeric conversions (ParseError on trailing text or overflow).
Scalar parse_number(const std::string& key, const std::string& text);
Index parse_integer(const std::string& key, const std::string& text);
std::uint64_t parse_seed(const std::string& key, const std::string& text);

/// `a:b:step` (inclusive) or a comma-separated list.
std::vector<Scalar> parse_grid(const std::string& text);

ModelSpec model_spec(const RunConfig& config);
ExpectationOptions expectation_options(const RunConfig& config, Method fallback);
/// Scenario for the harness; validates numeric fields (DomainError).
Scenario scenario_from(const RunConfig& config);

}  // namespace mcrb
