#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hierrate/family.hpp"

namespace hierrate {

/// Literal used for an absent covariate value. When present in a level set it
/// is always the reference level.
inline constexpr std::string_view kMissingLevel = "NA";

/// One categorical covariate. levels.front() is the reference level.
struct CovariateSpec {
  std::string name;
  std::vector<std::string> levels;

  /// Builds a spec from declared levels, moving the missing marker (if
  /// declared) to the front. Rejects empty and duplicate levels.
  static CovariateSpec make(std::string name, std::vector<std::string> levels);

  [[nodiscard]] const std::string& reference() const { return levels.front(); }
  [[nodiscard]] std::optional<std::size_t> level_index(std::string_view level) const;
};

struct CovariateSchema {
  std::vector<CovariateSpec> covariates;

  [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const;
  [[nodiscard]] std::size_t size() const noexcept { return covariates.size(); }
};

/// A single exposure-weighted record: unit i in branch k of industry j,
/// period t. covariates are aligned with the portfolio schema.
struct Observation {
  std::string unit_id;
  std::string industry_id;
  std::string branch_id;
  int period = 0;
  double exposure = 1.0;
  double response = 0.0;
  std::vector<std::string> covariates;

  bool operator==(const Observation&) const = default;
};

struct BranchNode {
  std::size_t industry;  // index into HierarchyIndex::industries
  std::string industry_id;
  std::string branch_id;
};

/// Two-level nested index. Industries are sorted lexicographically, branches
/// by (industry, branch). Branch identity is the (industry, branch) pair.
struct HierarchyIndex {
  std::vector<std::string> industries;
  std::vector<BranchNode> branches;
  std::vector<std::vector<std::size_t>> industry_branches;
  std::vector<std::size_t> obs_branch;
  std::vector<std::size_t> obs_industry;

  [[nodiscard]] std::optional<std::size_t> find_industry(std::string_view id) const;
  [[nodiscard]] std::optional<std::size_t> find_branch(std::string_view industry_id,
                                                      std::string_view branch_id) const;
};

/// Immutable panel of observations plus covariate schema and hierarchy.
class Portfolio {
 public:
  Portfolio() = default;
  Portfolio(std::vector<Observation> observations, CovariateSchema schema);

  [[nodiscard]] const std::vector<Observation>& observations() const noexcept { return obs_; }
  [[nodiscard]] const CovariateSchema& schema() const noexcept { return schema_; }
  [[nodiscard]] const HierarchyIndex& hierarchy() const noexcept { return index_; }
  [[nodiscard]] std::size_t size() const noexcept { return obs_.size(); }

  [[nodiscard]] std::span<const double> exposures() const noexcept { return exposure_; }
  [[nodiscard]] std::span<const double> responses() const noexcept { return response_; }

  /// Copy restricted to the records for which keep(obs) is true.
  template <class Pred>
  [[nodiscard]] Portfolio filter(Pred keep) const {
    std::vector<Observation> out;
    for (const auto& o : obs_) {
      if (keep(o)) out.push_back(o);
    }
    return Portfolio(std::move(out), schema_);
  }

  /// Copy with covariate `name` recoded through `recode` (old level index ->
  /// new level label) and the schema entry replaced by `spec`.
  [[nodiscard]] Portfolio with_recoded_covariate(
      std::string_view name, const CovariateSpec& spec,
      const std::vector<std::string>& recode) const;

  bool operator==(const Portfolio& other) const;

 private:
  std::vector<Observation> obs_;
  CovariateSchema schema_;
  HierarchyIndex index_;
  std::vector<double> exposure_;
  std::vector<double> response_;
};

struct Violation {
  std::size_t record;  // observation index, or npos for hierarchy-level rules
  std::string rule;
  std::string message;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Lists every broken Portfolio/Observation invariant. When `family` is
/// Tweedie, negative responses are violations too.
std::vector<Violation> validate_portfolio(const Portfolio& portfolio,
                                          std::optional<Family> family = std::nullopt);

/// Splits by period: records with period < holdout_period go to .first.
std::pair<Portfolio, Portfolio> split_by_period(const Portfolio& portfolio, int holdout_period);

}  // namespace hierrate
