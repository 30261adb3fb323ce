#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hierrate/credibility.hpp"
#include "hierrate/glmc.hpp"

namespace hierrate {

inline constexpr std::string_view kModelFormat = "hierrate-model/1";

enum class Estimator { kJewell, kGlmc };

std::string_view to_string(Estimator e) noexcept;
Estimator parse_estimator(std::string_view s);

/// A fitted pricing model: either a plain hierarchical credibility fit or a
/// combined GLM + credibility fit.
struct PricingModel {
  Estimator estimator = Estimator::kGlmc;
  CredibilityFit jewell;  // used when estimator == kJewell
  GlmcFit glmc;           // used when estimator == kGlmc
};

/// Per-record premiums in portfolio order.
std::vector<double> predict(const PricingModel& model, const Portfolio& portfolio);

/// Human-readable model file: `key = value` header lines followed by
/// `[section]` tables of comma-separated rows. Doubles are written in
/// shortest round-trip form, so read_model(write_model(m)) predicts
/// bit-identically to m.
void write_model(std::ostream& out, const PricingModel& model);
PricingModel read_model(std::istream& in, std::string_view source = "<stream>");
PricingModel load_model(const std::filesystem::path& path);

/// Generic reader for the key-value-plus-tables layout shared by model files,
/// reports and ground-truth sidecars.
struct StructuredText {
  struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
  };
  std::map<std::string, std::string, std::less<>> keys;
  std::map<std::string, Table, std::less<>> tables;

  [[nodiscard]] const std::string& key(std::string_view name) const;
  [[nodiscard]] const Table& table(std::string_view name) const;
};

StructuredText read_structured_text(std::istream& in, std::string_view source = "<stream>");

}  // namespace hierrate
