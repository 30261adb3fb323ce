#include "hierrate/simulator.hpp"

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <cmath>
#include <numeric>

#include "hierrate/errors.hpp"
#include "hierrate/numeric.hpp"

namespace hierrate {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum Stream : std::uint64_t { kIndustry = 1, kBranch = 2, kUnit = 3, kRecord = 4 };

std::string padded(const char* prefix, std::size_t value, std::size_t count) {
  const std::size_t width = std::to_string(count).size();
  std::string digits = std::to_string(value);
  return prefix + std::string(width - digits.size(), '0') + digits;
}

double standard_normal(CounterEngine& rng) {
  boost::random::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

}  // namespace

CounterEngine::CounterEngine(std::uint64_t seed, std::uint64_t stream,
                             std::uint64_t index) noexcept
    : key_(mix64(mix64(mix64(seed) ^ (stream * kGolden)) ^ (index + 1) * 0xD1B54A32D192ED03ULL)) {}

CounterEngine::result_type CounterEngine::operator()() noexcept {
  return mix64(key_ + kGolden * ++counter_);
}

void SimulationSpec::validate() const {
  if (n_industries < 1 || branches_per_industry < 1 || units_per_branch < 1 || periods < 1) {
    throw InvalidArgument("simulation: all counts must be at least 1");
  }
  if (!(sigma2_industry >= 0.0) || !(sigma2_branch >= 0.0)) {
    throw InvalidArgument("simulation: variance components must be non-negative");
  }
  if (!(exposure_low > 0.0) || !std::isfinite(exposure_low)) {
    throw InvalidArgument("simulation: exposure_low must be positive");
  }
  if (exposure_law == ExposureLaw::kLogUniform &&
      (!(exposure_high >= exposure_low) || !std::isfinite(exposure_high))) {
    throw InvalidArgument("simulation: exposure_high must be at least exposure_low");
  }
  if (!(dispersion > 0.0) || !std::isfinite(dispersion)) {
    throw InvalidArgument("simulation: dispersion must be positive");
  }
  if (family == Family::kTweedieLog && !(power > 1.0 && power < 2.0)) {
    throw InvalidArgument("simulation: tweedie power must lie in (1, 2)");
  }
  if (!std::isfinite(intercept)) throw InvalidArgument("simulation: intercept must be finite");
  for (const auto& c : covariates) {
    if (c.levels.empty()) throw InvalidArgument("simulation: covariate '" + c.name + "' has no levels");
    if (c.effects.size() != c.levels.size()) {
      throw InvalidArgument("simulation: covariate '" + c.name + "' needs one effect per level");
    }
    if (!c.probabilities.empty()) {
      if (c.probabilities.size() != c.levels.size()) {
        throw InvalidArgument("simulation: covariate '" + c.name +
                              "' needs one probability per level");
      }
      double total = 0.0;
      for (double p : c.probabilities) {
        if (!(p >= 0.0)) throw InvalidArgument("simulation: probabilities must be non-negative");
        total += p;
      }
      if (!(total > 0.0)) throw InvalidArgument("simulation: probabilities sum to zero");
    }
  }
}

double draw_tweedie(CounterEngine& rng, double mean, double dispersion, double power,
                    double weight) {
  const double lambda = weight * std::pow(mean, 2.0 - power) / (dispersion * (2.0 - power));
  const double shape = (2.0 - power) / (power - 1.0);
  const double scale = dispersion * (power - 1.0) * std::pow(mean, power - 1.0);
  boost::random::poisson_distribution<long long, double> count(lambda);
  const long long n = count(rng);
  if (n == 0) return 0.0;
  boost::random::gamma_distribution<double> total(static_cast<double>(n) * shape, scale);
  return total(rng) / weight;
}

Simulation simulate_portfolio(const SimulationSpec& spec, unsigned threads) {
  spec.validate();
  const std::size_t J = spec.n_industries;
  const std::size_t K = spec.branches_per_industry;
  const std::size_t U = spec.units_per_branch;
  const std::size_t T = spec.periods;
  const bool tweedie = spec.family == Family::kTweedieLog;

  CovariateSchema schema;
  std::vector<std::vector<std::size_t>> declared_to_schema;
  for (const auto& c : spec.covariates) {
    schema.covariates.push_back(CovariateSpec::make(c.name, c.levels));
    std::vector<std::size_t> map(c.levels.size());
    for (std::size_t l = 0; l < c.levels.size(); ++l) {
      map[l] = *schema.covariates.back().level_index(c.levels[l]);
    }
    declared_to_schema.push_back(std::move(map));
  }

  Simulation sim;
  std::vector<std::string> industry_ids(J);
  std::vector<double> u_ind(J);
  for (std::size_t j = 0; j < J; ++j) {
    industry_ids[j] = padded("I", j + 1, J);
    CounterEngine rng(spec.seed, kIndustry, j);
    u_ind[j] = std::sqrt(spec.sigma2_industry) * standard_normal(rng);
    sim.truth.u_industry.emplace(industry_ids[j], u_ind[j]);
  }
  std::vector<std::string> branch_ids(J * K);
  std::vector<double> u_br(J * K);
  for (std::size_t b = 0; b < J * K; ++b) {
    branch_ids[b] = industry_ids[b / K] + "-" + padded("B", b % K + 1, K);
    CounterEngine rng(spec.seed, kBranch, b);
    u_br[b] = std::sqrt(spec.sigma2_branch) * standard_normal(rng);
    sim.truth.u_branch.emplace(BranchKey{industry_ids[b / K], branch_ids[b]}, u_br[b]);
  }

  const std::size_t n_units = J * K * U;
  std::vector<Observation> obs(n_units * T);
  std::vector<double> true_mean(n_units * T);
  parallel_for_index(n_units, threads, [&](std::size_t unit) {
    const std::size_t b = unit / U;
    const std::size_t j = b / K;
    const std::string unit_id = branch_ids[b] + "-" + padded("U", unit % U + 1, U);

    CounterEngine unit_rng(spec.seed, kUnit, unit);
    boost::random::uniform_01<double> uni;
    std::vector<std::string> levels;
    double score = 0.0;
    for (std::size_t c = 0; c < spec.covariates.size(); ++c) {
      const auto& cov = spec.covariates[c];
      std::vector<double> probs = cov.probabilities;
      if (probs.empty()) probs.assign(cov.levels.size(), 1.0);
      const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
      const double u = uni(unit_rng) * total;
      std::size_t pick = 0;
      double cum = probs[0];
      while (pick + 1 < probs.size() && u >= cum) cum += probs[++pick];
      levels.push_back(schema.covariates[c].levels[declared_to_schema[c][pick]]);
      score += cov.effects[pick];
    }

    const double eta = spec.intercept + score + u_ind[j] + u_br[b];
    const double mean = tweedie ? std::exp(eta) : eta;
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t r = unit * T + t;
      CounterEngine rng(spec.seed, kRecord, r);
      double w = spec.exposure_low;
      if (spec.exposure_law == ExposureLaw::kLogUniform) {
        const double lo = std::log(spec.exposure_low);
        const double hi = std::log(spec.exposure_high);
        w = std::exp(lo + (hi - lo) * uni(rng));
      }
      double y = 0.0;
      if (tweedie) {
        y = draw_tweedie(rng, mean, spec.dispersion, spec.power, w);
      } else {
        y = mean + std::sqrt(spec.dispersion / w) * standard_normal(rng);
      }
      Observation& o = obs[r];
      o.unit_id = unit_id;
      o.industry_id = industry_ids[j];
      o.branch_id = branch_ids[b];
      o.period = static_cast<int>(t + 1);
      o.exposure = w;
      o.response = y;
      o.covariates = levels;
      true_mean[r] = mean;
    }
  });

  sim.portfolio = Portfolio(std::move(obs), std::move(schema));
  sim.truth.true_mean = std::move(true_mean);
  return sim;
}

}  // namespace hierrate
