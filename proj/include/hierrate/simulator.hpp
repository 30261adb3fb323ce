#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "hierrate/family.hpp"
#include "hierrate/glmc.hpp"
#include "hierrate/portfolio.hpp"

namespace hierrate {

/// SplitMix64 evaluated at (key, counter): the n-th output depends only on
/// (seed, stream, index, n), so draws do not depend on scheduling.
class CounterEngine {
 public:
  using result_type = std::uint64_t;

  CounterEngine(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

enum class ExposureLaw { kConstant, kLogUniform };

struct SimCovariate {
  std::string name;
  std::vector<std::string> levels;
  std::vector<double> effects;        // link-scale effect per level
  std::vector<double> probabilities;  // empty => uniform
};

struct SimulationSpec {
  std::size_t n_industries = 5;
  std::size_t branches_per_industry = 4;
  std::size_t units_per_branch = 5;
  std::size_t periods = 5;
  ExposureLaw exposure_law = ExposureLaw::kLogUniform;
  double exposure_low = 1.0;  // also the constant exposure
  double exposure_high = 1000.0;
  double sigma2_industry = 0.0;
  double sigma2_branch = 0.0;
  Family family = Family::kGaussianIdentity;
  double power = 1.5;  // Tweedie only
  double dispersion = 1.0;
  double intercept = 0.0;  // μ on the link scale
  std::vector<SimCovariate> covariates;  // constant per unit across periods
  std::uint64_t seed = 1;

  /// Throws InvalidArgument on any violated invariant.
  void validate() const;
};

struct GroundTruth {
  std::map<std::string, double, std::less<>> u_industry;  // link scale
  std::map<BranchKey, double> u_branch;                   // link scale
  std::vector<double> true_mean;                          // portfolio order
};

struct Simulation {
  Portfolio portfolio;
  GroundTruth truth;
};

/// Records are emitted industry, branch, unit, period in order; every draw
/// comes from a CounterEngine keyed by the seed and the record, so output is
/// identical for any thread count.
Simulation simulate_portfolio(const SimulationSpec& spec, unsigned threads = 1);

/// One compound Poisson–gamma draw of a weighted Tweedie response.
double draw_tweedie(CounterEngine& rng, double mean, double dispersion, double power,
                    double weight);

}  // namespace hierrate
