#include "hierrate/credibility.hpp"

#include <algorithm>
#include <cmath>

#include "hierrate/errors.hpp"
#include "hierrate/numeric.hpp"

namespace hierrate {
namespace {

struct Columns {
  std::span<const double> y;
  std::span<const double> w;
};

Columns resolve(const Portfolio& portfolio, const CredibilityData& data) {
  Columns c{data.response.empty() ? portfolio.responses() : data.response,
            data.weight.empty() ? portfolio.exposures() : data.weight};
  if (c.y.size() != portfolio.size() || c.w.size() != portfolio.size()) {
    throw InvalidArgument("credibility override length does not match the portfolio");
  }
  for (double w : c.w) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgument("credibility weights must be positive");
  }
  for (double y : c.y) {
    if (!std::isfinite(y)) throw InvalidArgument("credibility responses must be finite");
  }
  return c;
}

std::vector<BranchMean> branch_means(const Portfolio& portfolio, const Columns& cols) {
  const auto& idx = portfolio.hierarchy();
  std::vector<CompensatedSum> wy(idx.branches.size()), ws(idx.branches.size());
  std::vector<BranchMean> out(idx.branches.size());
  for (std::size_t i = 0; i < portfolio.size(); ++i) {
    const std::size_t b = idx.obs_branch[i];
    wy[b].add(cols.w[i] * cols.y[i]);
    ws[b].add(cols.w[i]);
    ++out[b].count;
  }
  for (std::size_t b = 0; b < out.size(); ++b) {
    const auto& node = idx.branches[b];
    out[b].industry_id = node.industry_id;
    out[b].branch_id = node.branch_id;
    out[b].industry = node.industry;
    out[b].weight = ws[b].value();
    out[b].mean = wy[b].value() / out[b].weight;
  }
  return out;
}

double clip(double raw, bool& flag) {
  if (raw < 0.0) {
    flag = true;
    return 0.0;
  }
  return raw;
}

// Weights used to average branch means within an industry: z_jk when the
// branch variance is positive, otherwise the exposures (the σ_B² → 0 limit of
// z_jk up to a common factor).
std::vector<double> branch_averaging_weights(const std::vector<BranchMean>& bm,
                                             const VarianceComponents& vc) {
  std::vector<double> out(bm.size());
  for (std::size_t b = 0; b < bm.size(); ++b) {
    if (vc.sigma2_branch > 0.0) {
      out[b] = bm[b].weight / (bm[b].weight + vc.sigma2 / vc.sigma2_branch);
    } else {
      out[b] = bm[b].weight;
    }
  }
  return out;
}

struct IndustryAverages {
  std::vector<double> mean;    // Ȳ^z_j (or its σ_B² = 0 limit)
  std::vector<double> weight;  // z_j· (or w_j·)
};

IndustryAverages industry_averages(const HierarchyIndex& idx, const std::vector<BranchMean>& bm,
                                   const std::vector<double>& omega) {
  IndustryAverages out;
  out.mean.resize(idx.industries.size());
  out.weight.resize(idx.industries.size());
  for (std::size_t j = 0; j < idx.industries.size(); ++j) {
    CompensatedSum num, den;
    for (std::size_t b : idx.industry_branches[j]) {
      num.add(omega[b] * bm[b].mean);
      den.add(omega[b]);
    }
    out.weight[j] = den.value();
    out.mean[j] = num.value() / out.weight[j];
  }
  return out;
}

}  // namespace

const IndustryCredibility* CredibilityFit::find_industry(std::string_view industry_id) const {
  auto it = std::lower_bound(industries.begin(), industries.end(), industry_id,
                             [](const IndustryCredibility& a, std::string_view id) {
                               return a.industry_id < id;
                             });
  if (it == industries.end() || it->industry_id != industry_id) return nullptr;
  return &*it;
}

const BranchCredibility* CredibilityFit::find_branch(std::string_view industry_id,
                                                     std::string_view branch_id) const {
  using Key = std::pair<std::string_view, std::string_view>;
  auto it = std::lower_bound(branches.begin(), branches.end(), Key{industry_id, branch_id},
                             [](const BranchCredibility& a, const Key& k) {
                               return Key{a.industry_id, a.branch_id} < k;
                             });
  if (it == branches.end() || it->industry_id != industry_id || it->branch_id != branch_id) {
    return nullptr;
  }
  return &*it;
}

std::vector<BranchMean> weighted_branch_means(const Portfolio& portfolio,
                                              const CredibilityData& data) {
  return branch_means(portfolio, resolve(portfolio, data));
}

VarianceComponents estimate_variance_components(const Portfolio& portfolio,
                                                const CredibilityData& data,
                                                DegeneratePolicy policy) {
  const Columns cols = resolve(portfolio, data);
  const auto& idx = portfolio.hierarchy();
  const auto bm = branch_means(portfolio, cols);
  VarianceComponents vc;

  auto degenerate = [&](const char* what, bool& flag) {
    if (policy == DegeneratePolicy::kThrow) {
      throw DegenerateHierarchyError(what);
    }
    flag = true;
  };

  // σ²: pooled within-branch variance.
  {
    CompensatedSum ss;
    std::size_t dof = 0;
    for (std::size_t i = 0; i < portfolio.size(); ++i) {
      const double d = cols.y[i] - bm[idx.obs_branch[i]].mean;
      ss.add(cols.w[i] * d * d);
    }
    for (const auto& b : bm) dof += b.count - 1;
    if (dof == 0) {
      degenerate("sigma2: no branch has two or more observations (sum of T_jk - 1 is zero)",
                 vc.degenerate_sigma2);
    } else {
      vc.sigma2 = clip(ss.value() / static_cast<double>(dof), vc.clipped_sigma2);
    }
  }

  // σ_B²: between branches within industries, consuming σ̂².
  {
    CompensatedSum num, den;
    std::size_t extra_branches = 0;
    for (std::size_t j = 0; j < idx.industries.size(); ++j) {
      const auto& members = idx.industry_branches[j];
      if (members.size() < 2) continue;  // contributes exactly zero
      CompensatedSum wj, wyj, w2;
      for (std::size_t b : members) {
        wj.add(bm[b].weight);
        wyj.add(bm[b].weight * bm[b].mean);
        w2.add(bm[b].weight * bm[b].weight);
      }
      const double ybar_j = wyj.value() / wj.value();
      for (std::size_t b : members) {
        const double d = bm[b].mean - ybar_j;
        num.add(bm[b].weight * d * d);
      }
      den.add(wj.value() - w2.value() / wj.value());
      extra_branches += members.size() - 1;
    }
    if (extra_branches == 0) {
      degenerate("sigma2_B: no industry has two or more branches", vc.degenerate_branch);
    } else {
      const double raw = (num.value() - vc.sigma2 * static_cast<double>(extra_branches)) / den.value();
      vc.sigma2_branch = clip(raw, vc.clipped_branch);
    }
  }

  // σ_I²: between industries, consuming σ̂_B². With σ̂_B² = 0 the z-weights
  // degenerate and the estimator is evaluated in its exposure-weighted limit.
  {
    const std::size_t J = idx.industries.size();
    if (J < 2) {
      degenerate("sigma2_I: fewer than two industries", vc.degenerate_industry);
    } else {
      const auto omega = branch_averaging_weights(bm, vc);
      const auto ind = industry_averages(idx, bm, omega);
      CompensatedSum tot, totm, sq;
      for (std::size_t j = 0; j < J; ++j) {
        tot.add(ind.weight[j]);
        totm.add(ind.weight[j] * ind.mean[j]);
        sq.add(ind.weight[j] * ind.weight[j]);
      }
      const double grand = totm.value() / tot.value();
      CompensatedSum num;
      for (std::size_t j = 0; j < J; ++j) {
        const double d = ind.mean[j] - grand;
        num.add(ind.weight[j] * d * d);
      }
      const double den = tot.value() - sq.value() / tot.value();
      const double penalty = vc.sigma2_branch > 0.0 ? vc.sigma2_branch : vc.sigma2;
      const double raw = (num.value() - penalty * static_cast<double>(J - 1)) / den;
      vc.sigma2_industry = clip(raw, vc.clipped_industry);
    }
  }
  return vc;
}

CredibilityFit apply_credibility(const Portfolio& portfolio, const VarianceComponents& vc,
                                 const CredibilityData& data) {
  if (vc.sigma2 < 0.0 || vc.sigma2_branch < 0.0 || vc.sigma2_industry < 0.0) {
    throw InvalidArgument("variance components must be non-negative");
  }
  const Columns cols = resolve(portfolio, data);
  const auto& idx = portfolio.hierarchy();
  const auto bm = branch_means(portfolio, cols);
  const auto omega = branch_averaging_weights(bm, vc);
  const auto ind = industry_averages(idx, bm, omega);
  const std::size_t J = idx.industries.size();

  CredibilityFit fit;
  fit.components = vc;

  std::vector<double> q(J, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    if (vc.sigma2_industry <= 0.0) {
      q[j] = 0.0;
    } else if (vc.sigma2_branch > 0.0) {
      q[j] = ind.weight[j] / (ind.weight[j] + vc.sigma2_branch / vc.sigma2_industry);
    } else {
      q[j] = ind.weight[j] / (ind.weight[j] + vc.sigma2 / vc.sigma2_industry);
    }
  }

  CompensatedSum qsum, qy;
  for (std::size_t j = 0; j < J; ++j) {
    qsum.add(q[j]);
    qy.add(q[j] * ind.mean[j]);
  }
  if (qsum.value() > 0.0) {
    fit.mu_hat = qy.value() / qsum.value();
  } else {
    CompensatedSum zs, zy;
    for (std::size_t j = 0; j < J; ++j) {
      zs.add(ind.weight[j]);
      zy.add(ind.weight[j] * ind.mean[j]);
    }
    fit.mu_hat = zy.value() / zs.value();
    fit.mu_fallback = true;
  }

  fit.industries.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    auto& ic = fit.industries[j];
    ic.industry_id = idx.industries[j];
    ic.mean_z = ind.mean[j];
    ic.z_sum = vc.sigma2_branch > 0.0 ? ind.weight[j] : 0.0;
    ic.q = q[j];
    ic.predictor = q[j] * ind.mean[j] + (1.0 - q[j]) * fit.mu_hat;
  }
  fit.branches.resize(bm.size());
  for (std::size_t b = 0; b < bm.size(); ++b) {
    auto& bc = fit.branches[b];
    bc.industry_id = bm[b].industry_id;
    bc.branch_id = bm[b].branch_id;
    bc.mean = bm[b].mean;
    bc.weight = bm[b].weight;
    bc.z = vc.sigma2_branch > 0.0 ? omega[b] : 0.0;
    bc.predictor = bc.z * bc.mean + (1.0 - bc.z) * fit.industries[bm[b].industry].predictor;
  }
  return fit;
}

CredibilityFit fit_jewell(const Portfolio& portfolio, const CredibilityData& data,
                          DegeneratePolicy policy) {
  return apply_credibility(portfolio, estimate_variance_components(portfolio, data, policy), data);
}

double predict_jewell(const CredibilityFit& fit, std::string_view industry_id,
                      std::string_view branch_id) {
  if (const auto* b = fit.find_branch(industry_id, branch_id)) return b->predictor;
  if (const auto* j = fit.find_industry(industry_id)) return j->predictor;
  return fit.mu_hat;
}

}  // namespace hierrate
