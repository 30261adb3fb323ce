#include "hierrate/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "hierrate/errors.hpp"

namespace hierrate {

// ---- family ---------------------------------------------------------------

std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::kGaussianIdentity:
      return "gaussian-identity";
    case Family::kTweedieLog:
      return "tweedie-log";
  }
  return "unknown";
}

Family parse_family(std::string_view s) {
  if (s == "gaussian-identity" || s == "gaussian") return Family::kGaussianIdentity;
  if (s == "tweedie-log" || s == "tweedie") return Family::kTweedieLog;
  throw InvalidArgument("unknown family '" + std::string(s) +
                        "' (expected gaussian-identity or tweedie-log)");
}

std::vector<double> default_power_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(1.0 + 0.05 * i);
  return grid;
}

double FamilySpec::power() const {
  if (family == Family::kGaussianIdentity) return 0.0;
  if (!power_fixed()) throw InvalidArgument("power is not fixed: profile it first");
  return power_grid.front();
}

void FamilySpec::validate() const {
  if (family == Family::kGaussianIdentity) return;
  if (power_grid.empty()) throw InvalidArgument("tweedie family needs at least one power value");
  for (double p : power_grid) {
    if (!(p > 1.0 && p < 2.0)) {
      throw InvalidArgument("tweedie power " + std::to_string(p) + " outside (1, 2)");
    }
  }
}

// ---- schema ---------------------------------------------------------------

CovariateSpec CovariateSpec::make(std::string name, std::vector<std::string> levels) {
  if (levels.empty()) throw InvalidArgument("covariate '" + name + "' has no levels");
  std::set<std::string> seen;
  for (const auto& l : levels) {
    if (!seen.insert(l).second) {
      throw InvalidArgument("covariate '" + name + "' declares level '" + l + "' twice");
    }
  }
  auto na = std::find(levels.begin(), levels.end(), kMissingLevel);
  if (na != levels.end()) std::rotate(levels.begin(), na, na + 1);
  return CovariateSpec{std::move(name), std::move(levels)};
}

std::optional<std::size_t> CovariateSpec::level_index(std::string_view level) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == level) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> CovariateSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < covariates.size(); ++i) {
    if (covariates[i].name == name) return i;
  }
  return std::nullopt;
}

// ---- hierarchy ------------------------------------------------------------

std::optional<std::size_t> HierarchyIndex::find_industry(std::string_view id) const {
  auto it = std::lower_bound(industries.begin(), industries.end(), id);
  if (it == industries.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - industries.begin());
}

std::optional<std::size_t> HierarchyIndex::find_branch(std::string_view industry_id,
                                                       std::string_view branch_id) const {
  auto it = std::lower_bound(branches.begin(), branches.end(), std::pair{industry_id, branch_id},
                             [](const BranchNode& b, const auto& key) {
                               return std::pair<std::string_view, std::string_view>{
                                          b.industry_id, b.branch_id} < key;
                             });
  if (it == branches.end() || it->industry_id != industry_id || it->branch_id != branch_id) {
    return std::nullopt;
  }
  return static_cast<std::size_t>(it - branches.begin());
}

namespace {

HierarchyIndex build_index(const std::vector<Observation>& obs) {
  HierarchyIndex idx;
  std::set<std::pair<std::string, std::string>> keys;
  std::set<std::string> inds;
  for (const auto& o : obs) {
    keys.emplace(o.industry_id, o.branch_id);
    inds.insert(o.industry_id);
  }
  idx.industries.assign(inds.begin(), inds.end());
  idx.industry_branches.resize(idx.industries.size());
  for (const auto& [ind, br] : keys) {
    const std::size_t j = *idx.find_industry(ind);
    idx.industry_branches[j].push_back(idx.branches.size());
    idx.branches.push_back(BranchNode{j, ind, br});
  }
  idx.obs_branch.reserve(obs.size());
  idx.obs_industry.reserve(obs.size());
  for (const auto& o : obs) {
    const std::size_t b = *idx.find_branch(o.industry_id, o.branch_id);
    idx.obs_branch.push_back(b);
    idx.obs_industry.push_back(idx.branches[b].industry);
  }
  return idx;
}

}  // namespace

// ---- portfolio ------------------------------------------------------------

Portfolio::Portfolio(std::vector<Observation> observations, CovariateSchema schema)
    : obs_(std::move(observations)), schema_(std::move(schema)), index_(build_index(obs_)) {
  exposure_.reserve(obs_.size());
  response_.reserve(obs_.size());
  for (const auto& o : obs_) {
    exposure_.push_back(o.exposure);
    response_.push_back(o.response);
  }
}

Portfolio Portfolio::with_recoded_covariate(std::string_view name, const CovariateSpec& spec,
                                            const std::vector<std::string>& recode) const {
  const auto c = schema_.find(name);
  if (!c) throw InvalidArgument("unknown covariate '" + std::string(name) + "'");
  const auto& old = schema_.covariates[*c];
  if (recode.size() != old.levels.size()) {
    throw InvalidArgument("recode table size does not match levels of '" + old.name + "'");
  }
  CovariateSchema schema = schema_;
  schema.covariates[*c] = spec;
  std::vector<Observation> out = obs_;
  for (auto& o : out) {
    const auto li = old.level_index(o.covariates.at(*c));
    if (!li) throw DataError("value '" + o.covariates[*c] + "' not in schema of '" + old.name + "'");
    o.covariates[*c] = recode[*li];
  }
  return Portfolio(std::move(out), std::move(schema));
}

bool Portfolio::operator==(const Portfolio& other) const {
  if (obs_ != other.obs_) return false;
  if (schema_.covariates.size() != other.schema_.covariates.size()) return false;
  for (std::size_t i = 0; i < schema_.covariates.size(); ++i) {
    if (schema_.covariates[i].name != other.schema_.covariates[i].name ||
        schema_.covariates[i].levels != other.schema_.covariates[i].levels) {
      return false;
    }
  }
  return true;
}

std::vector<Violation> validate_portfolio(const Portfolio& portfolio,
                                          std::optional<Family> family) {
  std::vector<Violation> out;
  const auto& obs = portfolio.observations();
  const auto& schema = portfolio.schema();
  std::map<std::string, std::set<std::string>> branch_industries;

  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& o = obs[i];
    const std::string where = "record " + std::to_string(i) + " (unit " + o.unit_id + ")";
    if (!(o.exposure > 0.0) || !std::isfinite(o.exposure)) {
      out.push_back({i, "exposure", where + ": exposure must be positive and finite, got " +
                                        std::to_string(o.exposure)});
    }
    if (!std::isfinite(o.response)) {
      out.push_back({i, "response", where + ": response is not finite"});
    } else if (family == Family::kTweedieLog && o.response < 0.0) {
      out.push_back({i, "response-sign",
                     where + ": tweedie-log requires a non-negative response, got " +
                         std::to_string(o.response)});
    }
    if (o.industry_id.empty() || o.branch_id.empty()) {
      out.push_back({i, "hierarchy-label", where + ": empty industry or branch label"});
    }
    if (o.covariates.size() != schema.size()) {
      out.push_back({i, "covariate-arity", where + ": expected " + std::to_string(schema.size()) +
                                               " covariate values, got " +
                                               std::to_string(o.covariates.size())});
    } else {
      for (std::size_t c = 0; c < schema.size(); ++c) {
        const auto& spec = schema.covariates[c];
        if (o.covariates[c] != kMissingLevel && !spec.level_index(o.covariates[c])) {
          out.push_back({i, "covariate-level", where + ": level '" + o.covariates[c] +
                                                   "' not declared for covariate '" +
                                                   spec.name + "'"});
        } else if (o.covariates[c] == kMissingLevel && !spec.level_index(kMissingLevel)) {
          out.push_back({i, "covariate-level", where + ": missing marker used for covariate '" +
                                                   spec.name +
                                                   "' whose schema does not declare it"});
        }
      }
    }
    branch_industries[o.branch_id].insert(o.industry_id);
  }
  for (const auto& [branch, inds] : branch_industries) {
    if (inds.size() > 1) {
      std::string list;
      for (const auto& j : inds) list += (list.empty() ? "" : ", ") + j;
      out.push_back({Violation::npos, "hierarchy-uniqueness",
                     "branch '" + branch + "' is listed under several industries: " + list});
    }
  }
  return out;
}

std::pair<Portfolio, Portfolio> split_by_period(const Portfolio& portfolio, int holdout_period) {
  return {portfolio.filter([&](const Observation& o) { return o.period < holdout_period; }),
          portfolio.filter([&](const Observation& o) { return o.period >= holdout_period; })};
}

}  // namespace hierrate
