#include "hierrate/glmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hierrate/errors.hpp"
#include "hierrate/numeric.hpp"

namespace hierrate {
namespace {

// Σ_{c ≥ 1} x_c β_c for a 0/1 design row: the covariate part of the linear
// predictor, excluding the intercept.
template <class Row>
double covariate_score(const Row& row, const Eigen::VectorXd& beta) {
  double s = 0.0;
  for (Eigen::Index c = 1; c < beta.size(); ++c) {
    if (row(c) != 0.0) s += row(c) * beta(c);
  }
  return s;
}

template <class Row>
double combine(const GlmcFit& fit, const Row& row, std::string_view industry_id,
               std::string_view branch_id) {
  const double score = covariate_score(row, fit.glm.coefficients);
  const double uj = fit.industry_effect(industry_id);
  const double ujk = fit.branch_effect(industry_id, branch_id);
  if (fit.family == Family::kTweedieLog) {
    return std::exp(fit.glm.intercept()) * std::exp(score) * uj * ujk;
  }
  return fit.glm.intercept() + score + uj + ujk;
}

struct EffectState {
  std::vector<double> industry;  // hierarchy industry order
  std::vector<double> branch;    // hierarchy branch order
};

double weighted_sd(std::span<const double> y, std::span<const double> w) {
  CompensatedSum sw, swy;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sw.add(w[i]);
    swy.add(w[i] * y[i]);
  }
  const double m = swy.value() / sw.value();
  CompensatedSum ss;
  for (std::size_t i = 0; i < y.size(); ++i) ss.add(w[i] * (y[i] - m) * (y[i] - m));
  return std::sqrt(ss.value() / sw.value());
}

}  // namespace

TransformedData transform_for_credibility(const Portfolio& portfolio,
                                          std::span<const double> gamma, double power) {
  if (gamma.size() != portfolio.size()) {
    throw InvalidArgument("transform_for_credibility: gamma length does not match the portfolio");
  }
  TransformedData out;
  out.response.resize(gamma.size());
  out.weight.resize(gamma.size());
  const auto y = portfolio.responses();
  const auto w = portfolio.exposures();
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    if (!(gamma[i] > 0.0) || !std::isfinite(gamma[i])) {
      throw InvalidArgument("transform_for_credibility: gamma must be strictly positive (record " +
                            std::to_string(i) + ")");
    }
    out.response[i] = y[i] / gamma[i];
    out.weight[i] = w[i] * std::pow(gamma[i], 2.0 - power);
  }
  return out;
}

double GlmcFit::industry_effect(std::string_view industry_id) const {
  auto it = u_industry.find(industry_id);
  return it == u_industry.end() ? neutral_effect() : it->second;
}

double GlmcFit::branch_effect(std::string_view industry_id, std::string_view branch_id) const {
  auto it = u_branch.find(BranchKey{std::string(industry_id), std::string(branch_id)});
  return it == u_branch.end() ? neutral_effect() : it->second;
}

GlmcFit fit_glmc(const Portfolio& portfolio, std::span<const std::string> covariate_selection,
                 const FamilySpec& family, const GlmcOptions& options) {
  family.validate();
  if (!(options.damping >= 0.0 && options.damping < 1.0)) {
    throw InvalidArgument("fit_glmc: damping must lie in [0, 1)");
  }
  const bool tweedie = family.is_tweedie();
  const auto& idx = portfolio.hierarchy();
  const auto y = portfolio.responses();
  const auto w = portfolio.exposures();
  const std::size_t n = portfolio.size();

  GlmcFit fit;
  fit.family = family.family;
  const DesignMatrix design = build_design(portfolio, covariate_selection);
  fit.encoding = design.encoding;
  for (const auto& c : design.encoding.covariates) fit.covariates.push_back(c.name);

  const double neutral = tweedie ? 1.0 : 0.0;
  EffectState state{std::vector<double>(idx.industries.size(), neutral),
                    std::vector<double>(idx.branches.size(), neutral)};
  const double additive_scale = tweedie ? 1.0 : std::max(weighted_sd(y, w), 1e-300);

  auto offsets_of = [&](const EffectState& s) {
    std::vector<double> off(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double uj = s.industry[idx.obs_industry[i]];
      const double ujk = s.branch[idx.obs_branch[i]];
      off[i] = tweedie ? std::log(uj) + std::log(ujk) : uj + ujk;
    }
    return off;
  };

  double power = tweedie && family.power_fixed() ? family.power() : 0.0;
  bool need_profile = tweedie && !family.power_fixed();
  int reprofiles = 0;
  int iter = 0;

  auto fit_glm = [&](const std::vector<double>& off) -> GlmFit {
    if (need_profile) {
      auto prof = profile_power(design, y, w, off, family.power_grid, options.glm, options.threads);
      power = prof.best_power;
      need_profile = false;
      GlmFit g = std::move(prof.best_fit);
      fit.profile = std::move(prof);
      return g;
    }
    return irls_fit(design, y, w, off, tweedie ? FamilySpec::tweedie(power) : FamilySpec::gaussian(),
                    options.glm);
  };

  while (true) {
    fit.converged = false;
    while (iter < options.max_iterations) {
      ++iter;
      const auto off = offsets_of(state);
      GlmFit glm;
      try {
        glm = fit_glm(off);
      } catch (const Error& e) {
        throw NumericalError("fit_glmc: GLM step failed at iteration " + std::to_string(iter) +
                             ": " + e.what());
      }

      // Step 2: credibility on the covariate-adjusted data.
      std::vector<double> cred_y(n);
      std::vector<double> cred_w;
      const Eigen::VectorXd& beta = glm.coefficients;
      std::vector<double> score(n);
      for (std::size_t i = 0; i < n; ++i) {
        score[i] = covariate_score(design.x.row(static_cast<Eigen::Index>(i)), beta);
      }
      CredibilityFit cred;
      if (tweedie) {
        std::vector<double> gamma(n);
        for (std::size_t i = 0; i < n; ++i) gamma[i] = std::exp(score[i]);
        auto t = transform_for_credibility(portfolio, gamma, power);
        cred = fit_jewell(portfolio, {t.response, t.weight}, DegeneratePolicy::kZero);
      } else {
        for (std::size_t i = 0; i < n; ++i) cred_y[i] = y[i] - score[i];
        cred = fit_jewell(portfolio, {cred_y, {}}, DegeneratePolicy::kZero);
      }

      // Step 3: update the random effects.
      EffectState next = state;
      if (tweedie && !(cred.mu_hat > 0.0)) {
        throw NumericalError("fit_glmc: credibility mean is not positive at iteration " +
                             std::to_string(iter));
      }
      for (std::size_t j = 0; j < idx.industries.size(); ++j) {
        const double vj = cred.industries[j].predictor;
        if (tweedie && !(vj > 0.0)) {
          throw NumericalError("fit_glmc: non-positive industry predictor for '" +
                               idx.industries[j] + "'");
        }
        next.industry[j] = tweedie ? vj / cred.mu_hat : vj - cred.mu_hat;
      }
      for (std::size_t b = 0; b < idx.branches.size(); ++b) {
        const double vjk = cred.branches[b].predictor;
        const double vj = cred.industries[idx.branches[b].industry].predictor;
        if (tweedie && !(vjk > 0.0)) {
          throw NumericalError("fit_glmc: non-positive branch predictor for '" +
                               idx.branches[b].branch_id + "'");
        }
        next.branch[b] = tweedie ? vjk / vj : vjk - vj;
      }
      if (options.damping > 0.0) {
        for (std::size_t j = 0; j < next.industry.size(); ++j) {
          next.industry[j] = (1.0 - options.damping) * next.industry[j] +
                             options.damping * state.industry[j];
        }
        for (std::size_t b = 0; b < next.branch.size(); ++b) {
          next.branch[b] =
              (1.0 - options.damping) * next.branch[b] + options.damping * state.branch[b];
        }
      }

      double change = 0.0;
      auto track = [&](double now, double before) {
        const double d = tweedie ? std::abs(now - before) / std::abs(before)
                                 : std::abs(now - before) / additive_scale;
        change = std::max(change, d);
      };
      for (std::size_t j = 0; j < next.industry.size(); ++j) track(next.industry[j], state.industry[j]);
      for (std::size_t b = 0; b < next.branch.size(); ++b) track(next.branch[b], state.branch[b]);
      fit.trajectory.push_back(change);
      fit.credibility = std::move(cred);
      state = std::move(next);
      if (change < options.tolerance) {
        fit.converged = true;
        break;
      }
    }
    if (!(tweedie && options.reprofile_at_end && !family.power_fixed() && fit.converged &&
          reprofiles < options.max_reprofiles)) {
      break;
    }
    const double before = power;
    auto prof = profile_power(design, y, w, offsets_of(state), family.power_grid, options.glm,
                              options.threads);
    ++reprofiles;
    power = prof.best_power;
    fit.profile = std::move(prof);
    if (power == before) break;
  }

  // Final GLM with offsets equal to the final effects.
  fit.offsets = offsets_of(state);
  try {
    fit.glm = irls_fit(design, y, w, fit.offsets,
                       tweedie ? FamilySpec::tweedie(power) : FamilySpec::gaussian(), options.glm);
  } catch (const Error& e) {
    throw NumericalError(std::string("fit_glmc: final GLM failed: ") + e.what());
  }
  fit.iterations = iter;
  for (std::size_t j = 0; j < idx.industries.size(); ++j) {
    fit.u_industry.emplace(idx.industries[j], state.industry[j]);
  }
  for (std::size_t b = 0; b < idx.branches.size(); ++b) {
    fit.u_branch.emplace(BranchKey{idx.branches[b].industry_id, idx.branches[b].branch_id},
                         state.branch[b]);
  }
  return fit;
}

double predict_glmc(const GlmcFit& fit, std::string_view industry_id, std::string_view branch_id,
                    const CovariateValues& covariates) {
  for (const auto& [name, level] : covariates) {
    (void)level;
    const bool known = std::any_of(fit.encoding.covariates.begin(), fit.encoding.covariates.end(),
                                   [&](const EncodedCovariate& c) { return c.name == name; });
    if (!known) throw InvalidArgument("covariate '" + name + "' is not part of the fitted model");
  }
  const Eigen::RowVectorXd row = fit.encoding.encode(covariates);
  return combine(fit, row, industry_id, branch_id);
}

std::vector<double> predict_glmc(const GlmcFit& fit, const Portfolio& portfolio) {
  const Eigen::MatrixXd x = encode_portfolio(fit.encoding, portfolio);
  std::vector<double> out(portfolio.size());
  for (std::size_t i = 0; i < portfolio.size(); ++i) {
    const auto& o = portfolio.observations()[i];
    out[i] = combine(fit, x.row(static_cast<Eigen::Index>(i)), o.industry_id, o.branch_id);
  }
  return out;
}

}  // namespace hierrate
