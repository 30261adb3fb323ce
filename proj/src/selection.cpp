#include "hierrate/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "hierrate/errors.hpp"
#include "hierrate/numeric.hpp"

namespace hierrate {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

GlmcOptions single_threaded(GlmcOptions o) {
  o.threads = 1;
  return o;
}

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

double inverse_link(Family f, double eta) { return f == Family::kTweedieLog ? std::exp(eta) : eta; }

}  // namespace

std::vector<SubsetEntry> best_subset(const Portfolio& portfolio,
                                     std::span<const std::string> candidates,
                                     std::span<const std::string> forced,
                                     const FamilySpec& family, const GlmcOptions& options,
                                     unsigned threads) {
  family.validate();
  if (candidates.size() > kMaxSubsetCandidates) {
    throw InvalidArgument("best_subset: " + std::to_string(candidates.size()) +
                          " candidates exceed the cap of " + std::to_string(kMaxSubsetCandidates));
  }
  const std::set<std::string> forced_set(forced.begin(), forced.end());
  std::set<std::string> seen;
  for (const auto& c : candidates) {
    if (!portfolio.schema().find(c)) throw InvalidArgument("best_subset: unknown covariate '" + c + "'");
    if (forced_set.count(c)) {
      throw InvalidArgument("best_subset: '" + c + "' is both forced and a candidate");
    }
    if (!seen.insert(c).second) throw InvalidArgument("best_subset: duplicate candidate '" + c + "'");
  }
  for (const auto& f : forced_set) {
    if (!portfolio.schema().find(f)) throw InvalidArgument("best_subset: unknown covariate '" + f + "'");
  }

  const std::size_t n_subsets = std::size_t{1} << candidates.size();
  std::vector<SubsetEntry> entries(n_subsets);
  const GlmcOptions inner = single_threaded(options);
  parallel_for_index(n_subsets, threads, [&](std::size_t mask) {
    SubsetEntry e;
    for (std::size_t b = 0; b < candidates.size(); ++b) {
      if (mask & (std::size_t{1} << b)) e.chosen.push_back(candidates[b]);
    }
    e.chosen = sorted_unique(e.chosen);
    e.covariates = e.chosen;
    e.covariates.insert(e.covariates.end(), forced_set.begin(), forced_set.end());
    e.covariates = sorted_unique(e.covariates);
    try {
      const GlmcFit fit = fit_glmc(portfolio, e.covariates, family, inner);
      e.aic = glm_aic(fit.glm);
      e.ok = std::isfinite(e.aic);
      if (!e.ok) e.error = "non-finite AIC";
      e.rank = fit.glm.rank;
      e.power = fit.glm.power;
      e.iterations = fit.iterations;
      e.converged = fit.converged;
    } catch (const std::exception& ex) {
      e.ok = false;
      e.error = ex.what();
    }
    if (!e.ok) e.aic = kInf;
    entries[mask] = std::move(e);
  });

  std::stable_sort(entries.begin(), entries.end(), [](const SubsetEntry& a, const SubsetEntry& b) {
    if (a.aic != b.aic) return a.aic < b.aic;
    if (a.chosen.size() != b.chosen.size()) return a.chosen.size() < b.chosen.size();
    return a.covariates < b.covariates;
  });
  return entries;
}

std::pair<CovariateSpec, std::vector<std::string>> cluster_recoding(
    const CovariateSpec& original, const std::vector<std::size_t>& level_cluster, std::size_t k) {
  if (level_cluster.size() != original.levels.size()) {
    throw InvalidArgument("cluster_recoding: one cluster per level required");
  }
  auto label = [](std::size_t c) { return "C" + std::to_string(c + 1); };
  const std::size_t ref = level_cluster.front();
  CovariateSpec spec;
  spec.name = original.name;
  spec.levels.push_back(label(ref));
  for (std::size_t c = 0; c < k; ++c) {
    if (c != ref) spec.levels.push_back(label(c));
  }
  std::vector<std::string> recode;
  recode.reserve(level_cluster.size());
  for (std::size_t c : level_cluster) {
    if (c >= k) throw InvalidArgument("cluster_recoding: cluster index out of range");
    recode.push_back(label(c));
  }
  return {std::move(spec), std::move(recode)};
}

ClusterSearch cluster_grid_search(const Portfolio& portfolio, const std::string& covariate,
                                  std::span<const std::size_t> k_grid, const FamilySpec& family,
                                  std::span<const std::string> other_covariates,
                                  const GlmcOptions& options, unsigned threads) {
  family.validate();
  const auto ci = portfolio.schema().find(covariate);
  if (!ci) throw InvalidArgument("cluster_grid_search: unknown covariate '" + covariate + "'");
  if (k_grid.empty()) throw InvalidArgument("cluster_grid_search: empty k grid");
  std::vector<std::string> others;
  for (const auto& c : other_covariates) {
    if (c == covariate) {
      throw InvalidArgument("cluster_grid_search: '" + c + "' cannot be both clustered and kept");
    }
    others.push_back(c);
  }
  others = sorted_unique(others);
  const CovariateSpec& spec = portfolio.schema().covariates[*ci];

  std::vector<std::string> full = others;
  full.push_back(covariate);
  const GlmcOptions inner = single_threaded(options);
  const GlmcFit base = fit_glmc(portfolio, full, family, options);

  ClusterSearch out;
  out.covariate = covariate;
  out.unclustered_aic = glm_aic(base.glm);

  // Coefficients and exposures of the observed levels; the reference sits at 0.
  std::vector<double> level_exposure(spec.levels.size(), 0.0);
  for (const auto& o : portfolio.observations()) {
    level_exposure[*spec.level_index(o.covariates[*ci])] += o.exposure;
  }
  std::vector<std::size_t> observed_levels;
  std::vector<double> values, weights;
  for (std::size_t l = 0; l < spec.levels.size(); ++l) {
    if (!(level_exposure[l] > 0.0)) continue;
    double beta = 0.0;
    if (l > 0) {
      const std::string col = spec.name + ":" + spec.levels[l];
      const auto& names = base.glm.column_names;
      const auto it = std::find(names.begin(), names.end(), col);
      if (it != names.end()) beta = base.glm.coefficients(it - names.begin());
    }
    observed_levels.push_back(l);
    values.push_back(beta);
    weights.push_back(level_exposure[l]);
    out.levels.push_back(spec.levels[l]);
    out.coefficients.push_back(beta);
  }

  out.per_k.resize(k_grid.size());
  parallel_for_index(k_grid.size(), threads, [&](std::size_t g) {
    ClusterCandidate cand;
    cand.k = k_grid[g];
    try {
      const Clustering cl = cluster_1d(values, weights, cand.k);
      // Unobserved levels join the reference level's cluster; an unobserved
      // reference joins the cluster whose center is nearest to 0.
      std::size_t ref_cluster = 0;
      if (observed_levels.front() == 0) {
        ref_cluster = cl.labels.front();
      } else {
        for (std::size_t c = 1; c < cl.centers.size(); ++c) {
          if (std::abs(cl.centers[c]) < std::abs(cl.centers[ref_cluster])) ref_cluster = c;
        }
      }
      std::vector<std::size_t> level_cluster(spec.levels.size(), ref_cluster);
      for (std::size_t i = 0; i < observed_levels.size(); ++i) {
        level_cluster[observed_levels[i]] = cl.labels[i];
      }
      auto [new_spec, recode] = cluster_recoding(spec, level_cluster, cand.k);
      for (std::size_t l = 0; l < spec.levels.size(); ++l) cand.mapping[spec.levels[l]] = recode[l];

      const Portfolio recoded = portfolio.with_recoded_covariate(covariate, new_spec, recode);
      std::vector<std::string> selection = others;
      if (cand.k > 1) selection.push_back(covariate);
      const GlmcFit fit = fit_glmc(recoded, selection, family, inner);
      cand.aic = glm_aic(fit.glm);
      cand.ok = std::isfinite(cand.aic);
      if (!cand.ok) cand.error = "non-finite AIC";

      for (std::size_t c = 0; c < new_spec.levels.size(); ++c) {
        ClusterEffect eff;
        eff.label = new_spec.levels[c];
        for (std::size_t l = 0; l < spec.levels.size(); ++l) {
          if (recode[l] == eff.label) eff.levels.push_back(spec.levels[l]);
        }
        if (c > 0) eff.coefficient = fit.glm.coefficient(covariate + ":" + eff.label);
        eff.rate = inverse_link(family.family, fit.glm.intercept() + eff.coefficient);
        cand.effects.push_back(std::move(eff));
      }
    } catch (const std::exception& ex) {
      cand.ok = false;
      cand.error = ex.what();
    }
    if (!cand.ok) cand.aic = kInf;
    out.per_k[g] = std::move(cand);
  });

  const ClusterCandidate* best = nullptr;
  for (const auto& c : out.per_k) {
    if (!c.ok) continue;
    if (!best || c.aic < best->aic || (c.aic == best->aic && c.k < best->k)) best = &c;
  }
  if (!best) {
    std::string msg = "cluster_grid_search: every k failed";
    if (!out.per_k.empty()) msg += " (k = " + std::to_string(out.per_k.front().k) + ": " +
                                   out.per_k.front().error + ")";
    throw NumericalError(msg);
  }
  out.best_k = best->k;
  return out;
}

}  // namespace hierrate
