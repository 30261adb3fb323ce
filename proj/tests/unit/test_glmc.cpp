#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "hierrate/credibility.hpp"
#include "hierrate/errors.hpp"
#include "hierrate/glmc.hpp"
#include "hierrate/metrics.hpp"
#include "hierrate/simulator.hpp"

using namespace hierrate;

namespace {

SimulationSpec tweedie_spec(std::uint64_t seed, double p = 1.5) {
  SimulationSpec s;
  s.n_industries = 4;
  s.branches_per_industry = 3;
  s.units_per_branch = 6;
  s.periods = 4;
  s.exposure_low = 5.0;
  s.exposure_high = 50.0;
  s.sigma2_industry = 0.1;
  s.sigma2_branch = 0.05;
  s.family = Family::kTweedieLog;
  s.power = p;
  s.dispersion = 1.0;
  s.intercept = std::log(2.0);
  s.covariates = {{"size", {"S", "M", "L"}, {0.0, 0.3, 0.7}, {}},
                  {"zone", {"A", "B"}, {0.0, -0.4}, {}}};
  s.seed = seed;
  return s;
}

SimulationSpec gaussian_spec(std::uint64_t seed) {
  SimulationSpec s = tweedie_spec(seed);
  s.family = Family::kGaussianIdentity;
  s.intercept = 10.0;
  s.sigma2_industry = 4.0;
  s.sigma2_branch = 1.0;
  s.dispersion = 25.0;
  s.covariates = {{"size", {"S", "M", "L"}, {0.0, 1.0, 3.0}, {}}};
  return s;
}

const std::vector<std::string> kNone{};
const std::vector<std::string> kBoth{"size", "zone"};

}  // namespace

TEST(Transform, Identities) {
  std::mt19937_64 rng(1);
  const auto p = oracle::random_portfolio(rng, 3, 3, 3);
  const std::vector<double> ones(p.size(), 1.0);
  const auto t = transform_for_credibility(p, ones, 1.4);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(t.response[i], p.responses()[i]);
    EXPECT_EQ(t.weight[i], p.exposures()[i]);
  }
  std::vector<double> gamma(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) gamma[i] = 0.5 + 0.1 * static_cast<double>(i);
  const auto t2 = transform_for_credibility(p, gamma, 2.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(t2.weight[i], p.exposures()[i]);
    EXPECT_DOUBLE_EQ(t2.response[i] * gamma[i], p.responses()[i]);
  }
  gamma[0] = 0.0;
  EXPECT_THROW(transform_for_credibility(p, gamma, 1.5), InvalidArgument);
}

TEST(Glmc, GaussianInterceptOnlyEqualsJewell) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto p = oracle::random_portfolio(rng, 5, 4, 5);
    const auto jewell = fit_jewell(p);
    const auto glmc = fit_glmc(p, kNone, FamilySpec::gaussian());
    ASSERT_TRUE(glmc.converged);
    const auto pred = predict_glmc(glmc, p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto& o = p.observations()[i];
      EXPECT_NEAR(pred[i], predict_jewell(jewell, o.industry_id, o.branch_id), 1e-8);
    }
    for (const auto& ind : jewell.industries) {
      EXPECT_NEAR(glmc.industry_effect(ind.industry_id), ind.predictor - jewell.mu_hat, 1e-8);
    }
  }
}

TEST(Glmc, TweedieInterceptOnlyEffectsAreJewellRatios) {
  for (std::uint64_t seed : {3u, 4u, 5u}) {
    auto spec = tweedie_spec(seed);
    spec.covariates.clear();
    const auto sim = simulate_portfolio(spec);
    const auto& p = sim.portfolio;
    const auto jewell = fit_jewell(p);
    auto glmc = fit_glmc(p, kNone, FamilySpec::tweedie(1.5));
    ASSERT_TRUE(glmc.converged);
    for (const auto& ind : jewell.industries) {
      EXPECT_NEAR(glmc.industry_effect(ind.industry_id), ind.predictor / jewell.mu_hat, 1e-6);
    }
    for (const auto& br : jewell.branches) {
      const double vj = jewell.find_industry(br.industry_id)->predictor;
      EXPECT_NEAR(glmc.branch_effect(br.industry_id, br.branch_id), br.predictor / vj, 1e-6);
    }
    // Predictions coincide once the intercept is rebalanced.
    const double alpha = balance_alpha(p.responses(), predict_glmc(glmc, p), p.exposures());
    glmc = rebalance_intercept(std::move(glmc), alpha);
    const auto pred = predict_glmc(glmc, p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto& o = p.observations()[i];
      const double v = predict_jewell(jewell, o.industry_id, o.branch_id);
      EXPECT_NEAR(pred[i] / v, 1.0, 1e-6);
    }
  }
}

TEST(Glmc, SingleBranchHasNeutralEffects) {
  auto spec = tweedie_spec(9);
  spec.n_industries = 1;
  spec.branches_per_industry = 1;
  const auto sim = simulate_portfolio(spec);
  const auto fit = fit_glmc(sim.portfolio, kBoth, FamilySpec::tweedie(1.5));
  EXPECT_TRUE(fit.converged);
  for (const auto& [k, v] : fit.u_industry) EXPECT_EQ(v, 1.0);
  for (const auto& [k, v] : fit.u_branch) EXPECT_EQ(v, 1.0);
  EXPECT_TRUE(fit.credibility.components.degenerate_industry);
}

class GlmcTweedie : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    sim_ = new Simulation(simulate_portfolio(tweedie_spec(21)));
    fit_ = new GlmcFit(fit_glmc(sim_->portfolio, kBoth, FamilySpec::tweedie(1.5)));
  }
  static void TearDownTestSuite() {
    delete fit_;
    delete sim_;
  }
  static Simulation* sim_;
  static GlmcFit* fit_;
};
Simulation* GlmcTweedie::sim_ = nullptr;
GlmcFit* GlmcTweedie::fit_ = nullptr;

TEST_F(GlmcTweedie, OffsetsAreLogEffects) {
  const auto& p = sim_->portfolio;
  ASSERT_TRUE(fit_->converged);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& o = p.observations()[i];
    EXPECT_NEAR(fit_->offsets[i],
                std::log(fit_->industry_effect(o.industry_id)) +
                    std::log(fit_->branch_effect(o.industry_id, o.branch_id)),
                1e-14);
  }
}

TEST_F(GlmcTweedie, FinalStateIsFixedPoint) {
  const auto& p = sim_->portfolio;
  const auto design = build_design(p, kBoth);
  const auto glm = irls_fit(design, p.responses(), p.exposures(), fit_->offsets,
                            FamilySpec::tweedie(1.5));
  for (Eigen::Index c = 0; c < glm.coefficients.size(); ++c) {
    EXPECT_NEAR(glm.coefficients(c), fit_->glm.coefficients(c), 1e-12);
  }
  std::vector<double> gamma(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto row = design.x.row(static_cast<Eigen::Index>(i));
    gamma[i] = std::exp(row.dot(glm.coefficients) - glm.intercept());
  }
  const auto t = transform_for_credibility(p, gamma, 1.5);
  const auto cred = fit_jewell(p, {t.response, t.weight}, DegeneratePolicy::kZero);
  for (const auto& ind : cred.industries) {
    EXPECT_NEAR(ind.predictor / cred.mu_hat / fit_->industry_effect(ind.industry_id), 1.0, 1e-6);
  }
  for (const auto& br : cred.branches) {
    const double vj = cred.find_industry(br.industry_id)->predictor;
    EXPECT_NEAR(br.predictor / vj / fit_->branch_effect(br.industry_id, br.branch_id), 1.0, 1e-6);
  }
}

TEST_F(GlmcTweedie, InterceptScoreBalances) {
  const auto& p = sim_->portfolio;
  const auto pred = predict_glmc(*fit_, p);
  double s = 0, scale = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double t = p.exposures()[i] * std::pow(pred[i], -0.5);
    s += t * (p.responses()[i] - pred[i]);
    scale += t * (p.responses()[i] + pred[i]);
  }
  EXPECT_NEAR(s / scale, 0.0, 1e-7);
}

TEST_F(GlmcTweedie, PredictionRecomposes) {
  const auto& p = sim_->portfolio;
  const auto pred = predict_glmc(*fit_, p);
  const auto& beta = fit_->glm.coefficients;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& o = p.observations()[i];
    double eta = beta(0);
    if (o.covariates[0] != "S") eta += fit_->glm.coefficient("size:" + o.covariates[0]);
    if (o.covariates[1] != "A") eta += fit_->glm.coefficient("zone:" + o.covariates[1]);
    const double expected = std::exp(eta) * fit_->industry_effect(o.industry_id) *
                            fit_->branch_effect(o.industry_id, o.branch_id);
    EXPECT_NEAR(pred[i] / expected, 1.0, 1e-13);
    const CovariateValues cv{{"size", o.covariates[0]}, {"zone", o.covariates[1]}};
    EXPECT_EQ(predict_glmc(*fit_, o.industry_id, o.branch_id, cv), pred[i]);
  }
}

TEST_F(GlmcTweedie, BranchEffectScalesPrediction) {
  GlmcFit doubled = *fit_;
  const auto key = doubled.u_branch.begin()->first;
  doubled.u_branch[key] *= 2.0;
  const CovariateValues cv{{"size", "M"}};
  EXPECT_NEAR(predict_glmc(doubled, key.first, key.second, cv),
              2.0 * predict_glmc(*fit_, key.first, key.second, cv), 1e-12);
}

TEST_F(GlmcTweedie, UnseenIdsFallBackToNeutral) {
  const CovariateValues cv{{"zone", "B"}};
  const double base = std::exp(fit_->glm.intercept() + fit_->glm.coefficient("zone:B"));
  EXPECT_NEAR(predict_glmc(*fit_, "nowhere", "nothing", cv), base, 1e-12 * base);
  EXPECT_THROW(predict_glmc(*fit_, "nowhere", "nothing", {{"zone", "Q"}}), InvalidArgument);
  EXPECT_THROW(predict_glmc(*fit_, "nowhere", "nothing", {{"colour", "red"}}), InvalidArgument);
}

TEST_F(GlmcTweedie, CovariateEffectsNearTruth) {
  EXPECT_NEAR(fit_->glm.coefficient("size:L"), 0.7, 0.15);
  EXPECT_NEAR(fit_->glm.coefficient("zone:B"), -0.4, 0.15);
}

TEST(Glmc, GaussianWithCovariateBalances) {
  const auto sim = simulate_portfolio(gaussian_spec(2));
  const auto& p = sim.portfolio;
  const std::vector<std::string> sel{"size"};
  const auto fit = fit_glmc(p, sel, FamilySpec::gaussian());
  ASSERT_TRUE(fit.converged);
  const auto pred = predict_glmc(fit, p);
  double s = 0, scale = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    s += p.exposures()[i] * (p.responses()[i] - pred[i]);
    scale += p.exposures()[i] * std::abs(p.responses()[i]);
  }
  EXPECT_NEAR(s / scale, 0.0, 1e-10);
  EXPECT_NEAR(fit.glm.coefficient("size:L"), 3.0, 0.5);
}

TEST(Glmc, TrajectoryEndsBelowTolerance) {
  const auto sim = simulate_portfolio(tweedie_spec(8));
  GlmcOptions opt;
  opt.tolerance = 1e-9;
  const auto fit = fit_glmc(sim.portfolio, kBoth, FamilySpec::tweedie(1.5), opt);
  ASSERT_TRUE(fit.converged);
  EXPECT_EQ(static_cast<int>(fit.trajectory.size()), fit.iterations);
  EXPECT_LT(fit.trajectory.back(), 1e-9);

  opt.max_iterations = 1;
  const auto capped = fit_glmc(sim.portfolio, kBoth, FamilySpec::tweedie(1.5), opt);
  EXPECT_FALSE(capped.converged);
  EXPECT_EQ(capped.iterations, 1);
}

TEST(Glmc, ProfiledPowerComesFromGridAndIsThreadInvariant) {
  const auto sim = simulate_portfolio(tweedie_spec(13, 1.6));
  GlmcOptions opt;
  const auto a = fit_glmc(sim.portfolio, kBoth, FamilySpec::tweedie_profiled(), opt);
  opt.threads = 3;
  const auto b = fit_glmc(sim.portfolio, kBoth, FamilySpec::tweedie_profiled(), opt);
  ASSERT_TRUE(a.profile.has_value());
  const auto grid = default_power_grid();
  EXPECT_NE(std::find(grid.begin(), grid.end(), a.glm.power), grid.end());
  EXPECT_EQ(a.glm.power, a.profile->best_power);
  EXPECT_EQ(a.glm.power, b.glm.power);
  EXPECT_EQ(a.glm.coefficients, b.glm.coefficients);
  EXPECT_EQ(a.u_branch, b.u_branch);
}

TEST(Glmc, RejectsBadDamping) {
  std::mt19937_64 rng(2);
  const auto p = oracle::random_portfolio(rng, 3, 3, 3);
  GlmcOptions opt;
  opt.damping = 1.0;
  EXPECT_THROW(fit_glmc(p, kNone, FamilySpec::gaussian(), opt), InvalidArgument);
}

TEST(Glmc, DampingReachesSameFixedPoint) {
  const auto sim = simulate_portfolio(tweedie_spec(30));
  GlmcOptions opt;
  opt.tolerance = 1e-11;
  const auto plain = fit_glmc(sim.portfolio, kBoth, FamilySpec::tweedie(1.5), opt);
  opt.damping = 0.5;
  const auto damped = fit_glmc(sim.portfolio, kBoth, FamilySpec::tweedie(1.5), opt);
  ASSERT_TRUE(plain.converged && damped.converged);
  for (const auto& [k, v] : plain.u_branch) EXPECT_NEAR(damped.u_branch.at(k), v, 1e-7);
}
