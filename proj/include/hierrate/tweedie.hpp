#pragma once

namespace hierrate {

/// Truncation control for the compound Poisson–gamma series.
struct TweedieSeriesOptions {
  /// Terms are added while log(term / largest term) stays above this.
  double log_cutoff = -39.14394658089878;  // log(1e-17)
  /// Extra terms appended on each side beyond the cutoff point.
  int extra_terms = 0;
  /// When the terms form a wide bell (standard deviation σ in j), sum every
  /// h-th term with h <= σ/4 and scale by h. The difference from the full
  /// sum is of order exp(−2π²σ²/h²), far below double precision.
  bool stride = true;
};

struct TweedieSeriesEval {
  double log_density = 0.0;
  long first_term = 0;  // smallest Poisson count included
  long last_term = 0;   // largest Poisson count included
  long step = 1;        // spacing of the evaluated terms
};

/// Log-density of a Tweedie(μ, φ/weight, p) variable, 1 < p < 2.
/// y = 0 gives the exact atom −μ^(2−p)/(φ′(2−p)); y > 0 sums the
/// compound Poisson–gamma series around its dominant term.
double tweedie_log_density(double y, double mu, double phi, double p, double weight = 1.0);

TweedieSeriesEval tweedie_log_density_series(double y, double mu, double phi, double p,
                                             double weight, const TweedieSeriesOptions& options);

/// Weighted unit deviance 2w[y^(2−p)/((1−p)(2−p)) − yμ^(1−p)/(1−p) + μ^(2−p)/(2−p)].
double tweedie_unit_deviance(double y, double mu, double p) noexcept;

}  // namespace hierrate
