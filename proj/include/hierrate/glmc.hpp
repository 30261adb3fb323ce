#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hierrate/credibility.hpp"
#include "hierrate/design.hpp"
#include "hierrate/glm.hpp"
#include "hierrate/portfolio.hpp"

namespace hierrate {

struct TransformedData {
  std::vector<double> response;  // Y / γ
  std::vector<double> weight;    // w γ^(2−p)
};

/// Rescales responses and exposures so that, given covariate effects γ, the
/// data satisfy the moment assumptions of the hierarchical credibility model.
TransformedData transform_for_credibility(const Portfolio& portfolio,
                                          std::span<const double> gamma, double power);

struct GlmcOptions {
  double tolerance = 1e-8;  // max relative change of the random effects
  int max_iterations = 100;
  /// New effects are (1 − damping)·update + damping·previous.
  double damping = 0.0;
  /// Re-profile the power once the frozen-power loop has converged and rerun
  /// the loop if the profiled power moved.
  bool reprofile_at_end = true;
  int max_reprofiles = 5;
  GlmOptions glm;
  unsigned threads = 1;
};

using BranchKey = std::pair<std::string, std::string>;

/// Joint GLM + hierarchical credibility state. For tweedie-log the effects
/// are multiplicative (Ũ_j = V̂_j/μ̂, Ũ_jk = V̂_jk/V̂_j); for
/// gaussian-identity they are additive (Û_j = V̂_j − μ̂, Û_jk = V̂_jk − V̂_j).
struct GlmcFit {
  Family family = Family::kGaussianIdentity;
  std::vector<std::string> covariates;
  DesignEncoding encoding;
  GlmFit glm;
  CredibilityFit credibility;
  std::map<std::string, double, std::less<>> u_industry;
  std::map<BranchKey, double> u_branch;
  std::vector<double> offsets;     // offsets of the final GLM, portfolio order
  std::vector<double> trajectory;  // per-iteration max relative change
  std::optional<PowerProfile> profile;
  int iterations = 0;
  bool converged = false;

  /// Effect for an industry, with the neutral value (1 or 0) when unseen.
  [[nodiscard]] double industry_effect(std::string_view industry_id) const;
  [[nodiscard]] double branch_effect(std::string_view industry_id,
                                     std::string_view branch_id) const;
  [[nodiscard]] double neutral_effect() const noexcept {
    return family == Family::kTweedieLog ? 1.0 : 0.0;
  }
};

GlmcFit fit_glmc(const Portfolio& portfolio, std::span<const std::string> covariate_selection,
                 const FamilySpec& family, const GlmcOptions& options = {});

/// Premium for one risk profile. Unknown covariate levels are an error;
/// unseen industries/branches fall back to the neutral effect.
double predict_glmc(const GlmcFit& fit, std::string_view industry_id, std::string_view branch_id,
                    const CovariateValues& covariates);

/// Premiums for every record of a portfolio, in portfolio order.
std::vector<double> predict_glmc(const GlmcFit& fit, const Portfolio& portfolio);

}  // namespace hierrate
