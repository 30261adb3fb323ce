#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hierrate/portfolio.hpp"
#include "hierrate/simulator.hpp"

namespace hierrate {

namespace csv {
/// Splits one CSV line; double-quoted fields may contain commas and "".
std::vector<std::string> parse_line(std::string_view line);
/// Quotes a field only when it contains a comma, quote or line break.
std::string format_field(std::string_view field);
std::string format_row(const std::vector<std::string>& fields);
}  // namespace csv

/// Column names every portfolio file starts with, in order, before covariates.
inline constexpr std::string_view kKeyColumns[] = {"unit_id", "industry_id", "branch_id",
                                                   "period", "exposure"};

struct CovariateDecl {
  std::string name;
  std::vector<std::string> levels;  // empty => observed levels, sorted, NA first
};

/// Declared covariates of a file. When `covariates` is unset every column
/// after the key and value columns is a covariate with inferred levels; when
/// set, only those columns are read and any other column is ignored with a
/// warning.
struct SchemaConfig {
  std::optional<std::vector<CovariateDecl>> covariates;
};

SchemaConfig schema_config_from(const CovariateSchema& schema);

struct LoadedPortfolio {
  Portfolio portfolio;
  std::vector<std::string> warnings;
};

/// Parses and validates a portfolio CSV. Parse errors and validation
/// failures raise DataError citing file line numbers.
LoadedPortfolio read_portfolio(std::istream& in, const SchemaConfig& schema = {},
                               std::optional<Family> family = std::nullopt,
                               std::string_view source = "<stream>");
LoadedPortfolio load_portfolio(const std::filesystem::path& path, const SchemaConfig& schema = {},
                               std::optional<Family> family = std::nullopt);

void write_portfolio(std::ostream& out, const Portfolio& portfolio);

/// Ground-truth sidecar of a simulation: industry and branch effects and the
/// true mean of every record.
void write_ground_truth(std::ostream& out, const Simulation& sim);

/// unit_id, industry_id, branch_id, period, prediction; portfolio order.
void write_predictions(std::ostream& out, const Portfolio& portfolio,
                       std::span<const double> predictions);
/// Reads a predictions file whose key columns must match `portfolio` row by row.
std::vector<double> read_predictions(const std::filesystem::path& path,
                                     const Portfolio& portfolio);

/// Writes through a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer);

}  // namespace hierrate
