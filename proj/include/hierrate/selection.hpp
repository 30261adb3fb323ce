#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hierrate/cluster.hpp"
#include "hierrate/glmc.hpp"
#include "hierrate/portfolio.hpp"

namespace hierrate {

inline constexpr std::size_t kMaxSubsetCandidates = 20;

struct SubsetEntry {
  std::vector<std::string> chosen;      // candidates in the subset, sorted
  std::vector<std::string> covariates;  // forced ∪ chosen, sorted
  double aic = 0.0;                     // +inf when the fit failed
  bool ok = false;
  std::string error;
  std::size_t rank = 0;                 // GLM rank of the final fit
  double power = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Fits GLMC for every subset of `candidates` (always adding `forced`) and
/// returns all 2^n entries ranked by AIC, ties to the smaller subset, then
/// lexicographic on the sorted covariate names.
std::vector<SubsetEntry> best_subset(const Portfolio& portfolio,
                                     std::span<const std::string> candidates,
                                     std::span<const std::string> forced,
                                     const FamilySpec& family, const GlmcOptions& options = {},
                                     unsigned threads = 1);

struct ClusterEffect {
  std::string label;                // "C1", "C2", ...
  std::vector<std::string> levels;  // original levels in the cluster
  double coefficient = 0.0;         // β̂_C of the refit, 0 for the reference
  double rate = 0.0;                // g⁻¹(μ̂ + β̂_C)
};

struct ClusterCandidate {
  std::size_t k = 0;
  double aic = 0.0;  // +inf when the refit failed
  bool ok = false;
  std::string error;
  std::map<std::string, std::string> mapping;  // original level -> cluster label
  std::vector<ClusterEffect> effects;
};

struct ClusterSearch {
  std::string covariate;
  std::size_t best_k = 0;
  double unclustered_aic = 0.0;
  std::vector<std::string> levels;     // levels whose coefficients were clustered
  std::vector<double> coefficients;    // their unclustered estimates
  std::vector<ClusterCandidate> per_k;  // k_grid order
};

/// Spec of the recoded covariate and the old-level -> new-level map used by
/// Portfolio::with_recoded_covariate. Cluster labels follow center order;
/// the cluster holding the original reference level becomes the reference.
std::pair<CovariateSpec, std::vector<std::string>> cluster_recoding(
    const CovariateSpec& original, const std::vector<std::size_t>& level_cluster, std::size_t k);

/// Clusters the dummy coefficients of `covariate` (reference = 0, exposure
/// weighted) for each k, refits GLMC with the clustered encoding and picks
/// the k with minimal AIC (ties toward smaller k). k = 1 drops the covariate.
ClusterSearch cluster_grid_search(const Portfolio& portfolio, const std::string& covariate,
                                  std::span<const std::size_t> k_grid, const FamilySpec& family,
                                  std::span<const std::string> other_covariates = {},
                                  const GlmcOptions& options = {}, unsigned threads = 1);

}  // namespace hierrate
