#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "hierrate/glm.hpp"
#include "hierrate/glmc.hpp"

namespace hierrate {

/// Horizontal axis of the Lorenz curve. Records are always ordered by
/// predicted rate, highest first; the vertical axis is the cumulative share
/// of observed damage Σ w·y.
enum class LorenzAbscissa {
  kExposure,         // cumulative share of exposure Σ w
  kPredictedDamage,  // cumulative share of predicted damage Σ w·ŷ
};

struct LorenzPoint {
  double x = 0.0;
  double y = 0.0;
};

struct LorenzResult {
  std::vector<LorenzPoint> points;  // (0,0) ... (1,1)
  double gini = 0.0;                // 2 × signed area between curve and diagonal
};

LorenzResult lorenz_gini(std::span<const double> observed, std::span<const double> predicted,
                         std::span<const double> weight,
                         LorenzAbscissa abscissa = LorenzAbscissa::kExposure);

/// Σ w·y / Σ w·ŷ
double loss_ratio(std::span<const double> observed, std::span<const double> predicted,
                  std::span<const double> weight);

/// Balance factor; numerically the same ratio as loss_ratio, used on
/// training data to correct the intercept.
double balance_alpha(std::span<const double> observed, std::span<const double> predicted,
                     std::span<const double> weight);

/// Shifts a log-link intercept by log(α): every prediction scales by α.
GlmFit rebalance_intercept(GlmFit fit, double alpha);
GlmcFit rebalance_intercept(GlmcFit fit, double alpha);

struct PremiumDiffs {
  std::vector<std::optional<double>> r;  // nullopt where the benchmark is <= 0
  std::size_t excluded = 0;
};

/// R = (ŷ_candidate − ŷ_benchmark) / ŷ_benchmark per record.
PremiumDiffs relative_premium_diff(std::span<const double> candidate,
                                   std::span<const double> benchmark);

struct EvaluationReport {
  std::size_t records = 0;
  LorenzAbscissa abscissa = LorenzAbscissa::kExposure;
  LorenzResult lorenz;
  double loss_ratio = 0.0;
  double alpha = 0.0;
  std::optional<LorenzResult> benchmark_lorenz;
  std::optional<double> benchmark_loss_ratio;
  std::optional<PremiumDiffs> premium_diffs;
};

EvaluationReport evaluate(std::span<const double> observed, std::span<const double> predicted,
                          std::span<const double> weight,
                          std::optional<std::span<const double>> benchmark = std::nullopt,
                          LorenzAbscissa abscissa = LorenzAbscissa::kExposure);

/// Key-value header followed by delimited tables ([lorenz], [premium_diffs]).
void write_report(std::ostream& os, const EvaluationReport& report);

}  // namespace hierrate
