#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hierrate/design.hpp"
#include "hierrate/family.hpp"

namespace hierrate {

struct GlmOptions {
  double tolerance = 1e-9;  // relative deviance change
  int max_iterations = 200;
  double rank_tolerance = 1e-10;
  int max_step_halvings = 30;
};

struct GlmFit {
  Family family = Family::kGaussianIdentity;
  double power = 0.0;
  std::vector<std::string> column_names;
  Eigen::VectorXd coefficients;  // one per column; aliased columns hold 0
  std::vector<std::string> dropped_columns;
  std::size_t rank = 0;
  std::size_t n_obs = 0;
  double dispersion = 0.0;
  double deviance = 0.0;
  double log_likelihood = 0.0;
  std::vector<double> fitted_means;
  std::vector<double> deviance_trace;  // deviance after each iteration
  int iterations = 0;
  bool converged = false;

  [[nodiscard]] double intercept() const { return coefficients(0); }
  /// Coefficient by column name; throws InvalidArgument if absent.
  [[nodiscard]] double coefficient(std::string_view name) const;
};

/// Weighted GLM by iteratively reweighted least squares with an offset.
/// `family` must carry a fixed power. Linearly dependent columns are
/// dropped (later columns first) and listed in dropped_columns.
GlmFit irls_fit(const DesignMatrix& design, std::span<const double> response,
                std::span<const double> weight, std::span<const double> offset,
                const FamilySpec& family, const GlmOptions& options = {});

/// Log-likelihood of fitted means: summed Tweedie series density at
/// (μ, φ, p), or the Gaussian likelihood at the ML variance estimate.
double glm_log_likelihood(Family family, std::span<const double> response,
                          std::span<const double> mean, std::span<const double> weight,
                          double dispersion, double power);

struct ProfilePoint {
  double power = 0.0;
  double log_likelihood = 0.0;
  bool ok = false;
  std::string error;
};

struct PowerProfile {
  double best_power = 0.0;
  std::vector<ProfilePoint> points;  // grid order
  GlmFit best_fit;
};

/// Fits the Tweedie GLM at each grid power and returns the likelihood
/// maximiser (ties toward the smaller power). Failed grid points are skipped.
PowerProfile profile_power(const DesignMatrix& design, std::span<const double> response,
                           std::span<const double> weight, std::span<const double> offset,
                           std::span<const double> grid, const GlmOptions& options = {},
                           unsigned threads = 1);

/// −2 log L + 2k with k = rank + 1 (Gaussian: φ) or rank + 2 (Tweedie: φ, p).
double glm_aic(const GlmFit& fit);

}  // namespace hierrate
