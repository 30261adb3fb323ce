#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hierrate/portfolio.hpp"

namespace hierrate {

/// Optional replacement of the portfolio's responses and/or exposures, e.g.
/// the transformed (Y/γ, w·γ^(2-p)) pairs of the combined GLM/credibility
/// loop. An empty span means "use the portfolio's own column".
struct CredibilityData {
  std::span<const double> response;
  std::span<const double> weight;
};

/// What to do when a moment estimator's denominator vanishes.
enum class DegeneratePolicy {
  kThrow,  // raise DegenerateHierarchyError naming the estimator
  kZero,   // set the component to 0 and flag it
};

struct VarianceComponents {
  double sigma2 = 0.0;           // within-branch, per unit exposure
  double sigma2_branch = 0.0;    // between branches within an industry
  double sigma2_industry = 0.0;  // between industries

  bool clipped_sigma2 = false;
  bool clipped_branch = false;
  bool clipped_industry = false;

  bool degenerate_sigma2 = false;
  bool degenerate_branch = false;
  bool degenerate_industry = false;
};

struct BranchMean {
  std::string industry_id;
  std::string branch_id;
  std::size_t industry = 0;  // index into the portfolio's industry list
  double mean = 0.0;         // exposure-weighted mean response
  double weight = 0.0;       // total exposure
  std::size_t count = 0;     // number of records (T_jk)
};

struct BranchCredibility {
  std::string industry_id;
  std::string branch_id;
  double mean = 0.0;
  double weight = 0.0;
  double z = 0.0;          // branch credibility factor
  double predictor = 0.0;  // V̂_jk
};

struct IndustryCredibility {
  std::string industry_id;
  double mean_z = 0.0;  // credibility-weighted mean of its branch means
  double z_sum = 0.0;   // Σ_k z_jk
  double q = 0.0;       // industry credibility factor
  double predictor = 0.0;  // V̂_j
};

struct CredibilityFit {
  double mu_hat = 0.0;
  VarianceComponents components;
  /// μ̂ fell back to the grand mean because every q_j is 0.
  bool mu_fallback = false;
  std::vector<IndustryCredibility> industries;  // sorted by id
  std::vector<BranchCredibility> branches;      // sorted by (industry, branch)

  [[nodiscard]] const IndustryCredibility* find_industry(std::string_view industry_id) const;
  [[nodiscard]] const BranchCredibility* find_branch(std::string_view industry_id,
                                                     std::string_view branch_id) const;
};

/// Per-branch exposure-weighted means in hierarchy order.
std::vector<BranchMean> weighted_branch_means(const Portfolio& portfolio,
                                              const CredibilityData& data = {});

/// Moment estimators of σ², σ_B² and σ_I², evaluated in that order.
/// Negative raw values are clipped to 0 and flagged.
VarianceComponents estimate_variance_components(const Portfolio& portfolio,
                                                const CredibilityData& data = {},
                                                DegeneratePolicy policy = DegeneratePolicy::kThrow);

/// Credibility factors and predictors for given (plugged-in) variance components.
CredibilityFit apply_credibility(const Portfolio& portfolio, const VarianceComponents& components,
                                 const CredibilityData& data = {});

/// Two-level hierarchical credibility fit: variance components, then factors
/// and predictors.
CredibilityFit fit_jewell(const Portfolio& portfolio, const CredibilityData& data = {},
                          DegeneratePolicy policy = DegeneratePolicy::kThrow);

/// V̂_jk for a known branch, V̂_j for an unseen branch of a known industry,
/// μ̂ otherwise.
double predict_jewell(const CredibilityFit& fit, std::string_view industry_id,
                      std::string_view branch_id);

}  // namespace hierrate
