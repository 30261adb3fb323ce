#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hierrate/portfolio.hpp"

namespace hierrate {

/// One claim (or a pre-aggregated claim total) of a unit in a period.
struct RawClaimRecord {
  std::string unit_id;
  std::string industry_id;
  std::string branch_id;
  int period = 0;
  double exposure = 1.0;
  double claim_amount = 0.0;
  std::vector<std::string> covariates;  // aligned with ClaimTable::covariate_names
};

struct ClaimTable {
  std::vector<std::string> covariate_names;
  std::vector<RawClaimRecord> records;
};

/// Large-claim cap τ_t = tau · c_t per period.
struct CapConfig {
  double tau = 0.0;
  std::map<int, double> correction_factors;
  bool redistribute = true;

  void validate() const;
};

enum class Grouping {
  kUnit,         // one record per (industry, branch, unit, period)
  kTariffClass,  // one record per (industry, branch, period, covariate profile)
};

/// Claim amounts after capping and, if requested, proportional
/// redistribution of the total excess over all claims by pre-cap share.
std::vector<double> cap_claims(std::span<const RawClaimRecord> records, const CapConfig& cap);

struct AggregationResult {
  Portfolio portfolio;
  std::size_t capped_claims = 0;
  double total_excess = 0.0;
};

/// Caps claims and aggregates them into damage rates Σ Z / Σ w. Output
/// records are ordered by grouping key.
AggregationResult cap_and_aggregate(const ClaimTable& claims, const CapConfig& cap,
                                    Grouping grouping);

/// Reads a claims CSV: key columns, claim_amount, then covariates.
ClaimTable read_claims(std::istream& in, std::string_view source = "<stream>");
ClaimTable load_claims(const std::filesystem::path& path);

}  // namespace hierrate
