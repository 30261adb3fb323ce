#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hierrate/glmc.hpp"
#include "hierrate/model_file.hpp"
#include "hierrate/simulator.hpp"

namespace hierrate {

/// Flat `key = value` file; `#` starts a comment line. Keys are unique.
class Config {
 public:
  static Config parse(std::istream& in, std::string_view source = "<stream>");
  static Config load(const std::filesystem::path& path);

  [[nodiscard]] bool has(std::string_view key) const;
  [[nodiscard]] std::optional<std::string> get(std::string_view key) const;
  [[nodiscard]] std::string get_string(std::string_view key, std::string_view fallback) const;
  [[nodiscard]] double get_double(std::string_view key, double fallback) const;
  [[nodiscard]] long long get_int(std::string_view key, long long fallback) const;
  [[nodiscard]] bool get_bool(std::string_view key, bool fallback) const;
  [[nodiscard]] std::vector<std::string> get_list(std::string_view key) const;
  [[nodiscard]] std::vector<double> get_double_list(std::string_view key) const;

  void set(std::string key, std::string value);
  [[nodiscard]] const std::map<std::string, std::string, std::less<>>& entries() const {
    return entries_;
  }

  /// Throws InvalidArgument naming every key that is neither listed in
  /// `known` nor starts with one of `known_prefixes`.
  void require_known(const std::vector<std::string>& known,
                     const std::vector<std::string>& known_prefixes = {}) const;

 private:
  std::string source_;
  std::map<std::string, std::string, std::less<>> entries_;
};

/// Documented keys of a model configuration (fit subcommand).
struct FitConfig {
  Estimator estimator = Estimator::kGlmc;
  FamilySpec family = FamilySpec::gaussian();
  std::vector<std::string> covariates;
  GlmcOptions glmc;
};

FitConfig parse_fit_config(const Config& config);
SimulationSpec parse_simulation_spec(const Config& config);

/// Key/description pairs shown by --help.
const std::vector<std::pair<std::string, std::string>>& fit_config_keys();
const std::vector<std::pair<std::string, std::string>>& simulation_config_keys();

}  // namespace hierrate
