#include "hierrate/tweedie.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hierrate/errors.hpp"
#include "hierrate/numeric.hpp"

namespace hierrate {
namespace {

void check_domain(double y, double mu, double phi, double p, double weight) {
  if (!(y >= 0.0) || !std::isfinite(y)) throw InvalidArgument("tweedie density: y must be >= 0");
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidArgument("tweedie density: mu must be > 0");
  if (!(phi > 0.0) || !std::isfinite(phi)) throw InvalidArgument("tweedie density: phi must be > 0");
  if (!(p > 1.0 && p < 2.0)) throw InvalidArgument("tweedie density: p must lie in (1, 2)");
  if (!(weight > 0.0) || !std::isfinite(weight)) {
    throw InvalidArgument("tweedie density: weight must be > 0");
  }
}

}  // namespace

TweedieSeriesEval tweedie_log_density_series(double y, double mu, double phi, double p,
                                             double weight, const TweedieSeriesOptions& options) {
  check_domain(y, mu, phi, p, weight);
  const double phi_eff = phi / weight;
  const double lambda = std::pow(mu, 2.0 - p) / (phi_eff * (2.0 - p));
  if (y == 0.0) return {-lambda, 0, 0, 1};

  // N ~ Poisson(lambda), severities ~ Gamma(shape, scale).
  const double shape = (2.0 - p) / (p - 1.0);
  const double scale = phi_eff * (p - 1.0) * std::pow(mu, p - 1.0);
  const double log_y = std::log(y);
  const double slope = std::log(lambda) + shape * (log_y - std::log(scale));
  auto term = [&](long j) {
    const double jd = static_cast<double>(j);
    return jd * slope - std::lgamma(jd + 1.0) - std::lgamma(jd * shape);
  };

  // The summand is log-concave in j; start at the usual approximation of the
  // mode and climb to the exact maximiser.
  const double approx = std::pow(y, 2.0 - p) / (phi_eff * (2.0 - p));
  long j_max = std::max(1L, std::lround(std::min(approx, 1e15)));
  double t_max = term(j_max);
  while (true) {
    const double up = term(j_max + 1);
    if (up > t_max) {
      ++j_max;
      t_max = up;
      continue;
    }
    if (j_max > 1) {
      const double down = term(j_max - 1);
      if (down > t_max) {
        --j_max;
        t_max = down;
        continue;
      }
    }
    break;
  }

  // Standard deviation of the bell from its curvature at the mode.
  long step = 1;
  if (options.stride && j_max > 1) {
    const double curvature = term(j_max + 1) - 2.0 * t_max + term(j_max - 1);
    if (curvature < 0.0) {
      const double sd = std::sqrt(-1.0 / curvature);
      // The subsampled sum needs the bell to vanish well before j = 1.
      if (static_cast<double>(j_max) - 12.0 * sd > 1.0) {
        step = std::max(1L, static_cast<long>(std::floor(sd / 4.0)));
      }
    }
  }

  CompensatedSum acc;
  acc.add(1.0);
  long lo = j_max;
  while (lo - step >= 1) {
    const double rel = term(lo - step) - t_max;
    if (rel < options.log_cutoff) break;
    lo -= step;
    acc.add(std::exp(rel));
  }
  long hi = j_max;
  while (true) {
    const double rel = term(hi + step) - t_max;
    if (rel < options.log_cutoff) break;
    hi += step;
    acc.add(std::exp(rel));
  }
  for (int e = 0; e < options.extra_terms; ++e) {
    if (lo - step >= 1) {
      lo -= step;
      acc.add(std::exp(term(lo) - t_max));
    }
    hi += step;
    acc.add(std::exp(term(hi) - t_max));
  }

  const double log_series = t_max + std::log(static_cast<double>(step) * acc.value());
  const double log_density = -lambda - log_y - y / scale + log_series;
  return {log_density, lo, hi, step};
}

double tweedie_log_density(double y, double mu, double phi, double p, double weight) {
  return tweedie_log_density_series(y, mu, phi, p, weight, TweedieSeriesOptions{}).log_density;
}

double tweedie_unit_deviance(double y, double mu, double p) noexcept {
  const double mu2 = std::pow(mu, 2.0 - p) / (2.0 - p);
  if (y == 0.0) return 2.0 * mu2;
  const double a = std::pow(y, 2.0 - p) / ((1.0 - p) * (2.0 - p));
  const double b = y * std::pow(mu, 1.0 - p) / (1.0 - p);
  return std::max(0.0, 2.0 * (a - b + mu2));
}

}  // namespace hierrate
