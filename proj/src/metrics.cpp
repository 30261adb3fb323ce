#include "hierrate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hierrate/errors.hpp"
#include "hierrate/numeric.hpp"
#include "hierrate/text.hpp"

namespace hierrate {
namespace {

void check_lengths(std::span<const double> a, std::span<const double> b,
                   std::span<const double> w, const char* op) {
  if (a.size() != b.size() || a.size() != w.size()) {
    throw InvalidArgument(std::string(op) + ": input lengths differ");
  }
  for (double x : w) {
    if (!(x > 0.0)) throw InvalidArgument(std::string(op) + ": weights must be positive");
  }
}

double weighted_total(std::span<const double> v, std::span<const double> w) {
  return compensated_dot(v, w);
}

}  // namespace

LorenzResult lorenz_gini(std::span<const double> observed, std::span<const double> predicted,
                         std::span<const double> weight, LorenzAbscissa abscissa) {
  check_lengths(observed, predicted, weight, "lorenz_gini");
  const double obs_total = weighted_total(observed, weight);
  if (!(obs_total > 0.0)) throw InvalidArgument("lorenz_gini: total observed damage must be positive");
  const double x_total = abscissa == LorenzAbscissa::kExposure ? compensated_sum(weight)
                                                               : weighted_total(predicted, weight);
  if (!(x_total > 0.0)) throw InvalidArgument("lorenz_gini: abscissa total must be positive");

  std::vector<std::size_t> order(observed.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return predicted[a] > predicted[b]; });

  LorenzResult out;
  out.points.push_back({0.0, 0.0});
  CompensatedSum cx, cy;
  for (std::size_t k = 0; k < order.size();) {
    const double level = predicted[order[k]];
    // Equal predictions form one segment so the curve ignores their order.
    while (k < order.size() && predicted[order[k]] == level) {
      const std::size_t i = order[k];
      cx.add(abscissa == LorenzAbscissa::kExposure ? weight[i] : weight[i] * predicted[i]);
      cy.add(weight[i] * observed[i]);
      ++k;
    }
    out.points.push_back({cx.value() / x_total, cy.value() / obs_total});
  }
  out.points.back() = {1.0, 1.0};

  CompensatedSum area;
  for (std::size_t k = 1; k < out.points.size(); ++k) {
    const auto& a = out.points[k - 1];
    const auto& b = out.points[k];
    area.add(0.5 * (b.x - a.x) * (a.y + b.y));
  }
  out.gini = (area.value() - 0.5) / 0.5;
  return out;
}

double loss_ratio(std::span<const double> observed, std::span<const double> predicted,
                  std::span<const double> weight) {
  check_lengths(observed, predicted, weight, "loss_ratio");
  const double pred = weighted_total(predicted, weight);
  if (pred == 0.0) throw InvalidArgument("loss_ratio: total predicted damage is zero");
  return weighted_total(observed, weight) / pred;
}

double balance_alpha(std::span<const double> observed, std::span<const double> predicted,
                     std::span<const double> weight) {
  check_lengths(observed, predicted, weight, "balance_alpha");
  const double pred = weighted_total(predicted, weight);
  if (!(pred > 0.0)) throw InvalidArgument("balance_alpha: total predicted damage must be positive");
  return weighted_total(observed, weight) / pred;
}

GlmFit rebalance_intercept(GlmFit fit, double alpha) {
  if (fit.family != Family::kTweedieLog) {
    throw InvalidArgument("rebalance_intercept: only defined for log-link fits");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw InvalidArgument("rebalance_intercept: alpha must be positive");
  }
  if (alpha == 1.0) return fit;
  fit.coefficients(0) += std::log(alpha);
  for (double& m : fit.fitted_means) m *= alpha;
  return fit;
}

GlmcFit rebalance_intercept(GlmcFit fit, double alpha) {
  fit.glm = rebalance_intercept(std::move(fit.glm), alpha);
  return fit;
}

PremiumDiffs relative_premium_diff(std::span<const double> candidate,
                                   std::span<const double> benchmark) {
  if (candidate.size() != benchmark.size()) {
    throw InvalidArgument("relative_premium_diff: input lengths differ");
  }
  PremiumDiffs out;
  out.r.resize(candidate.size());
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (benchmark[i] > 0.0) {
      out.r[i] = (candidate[i] - benchmark[i]) / benchmark[i];
    } else {
      ++out.excluded;
    }
  }
  return out;
}

EvaluationReport evaluate(std::span<const double> observed, std::span<const double> predicted,
                          std::span<const double> weight,
                          std::optional<std::span<const double>> benchmark,
                          LorenzAbscissa abscissa) {
  EvaluationReport rep;
  rep.records = observed.size();
  rep.abscissa = abscissa;
  rep.lorenz = lorenz_gini(observed, predicted, weight, abscissa);
  rep.loss_ratio = loss_ratio(observed, predicted, weight);
  rep.alpha = balance_alpha(observed, predicted, weight);
  if (benchmark) {
    rep.benchmark_lorenz = lorenz_gini(observed, *benchmark, weight, abscissa);
    rep.benchmark_loss_ratio = loss_ratio(observed, *benchmark, weight);
    rep.premium_diffs = relative_premium_diff(predicted, *benchmark);
  }
  return rep;
}

void write_report(std::ostream& os, const EvaluationReport& r) {
  using text::format_double;
  os << "format = hierrate-report/1\n";
  os << "records = " << r.records << "\n";
  os << "lorenz_abscissa = "
     << (r.abscissa == LorenzAbscissa::kExposure ? "exposure" : "predicted-damage") << "\n";
  os << "gini = " << format_double(r.lorenz.gini) << "\n";
  os << "loss_ratio = " << format_double(r.loss_ratio) << "\n";
  os << "alpha = " << format_double(r.alpha) << "\n";
  if (r.benchmark_lorenz) {
    os << "benchmark_gini = " << format_double(r.benchmark_lorenz->gini) << "\n";
    os << "benchmark_loss_ratio = " << format_double(*r.benchmark_loss_ratio) << "\n";
  }
  if (r.premium_diffs) {
    os << "premium_diff_excluded = " << r.premium_diffs->excluded << "\n";
  }
  os << "\n[lorenz]\nx,y\n";
  for (const auto& p : r.lorenz.points) {
    os << format_double(p.x) << "," << format_double(p.y) << "\n";
  }
  if (r.benchmark_lorenz) {
    os << "\n[benchmark_lorenz]\nx,y\n";
    for (const auto& p : r.benchmark_lorenz->points) {
      os << format_double(p.x) << "," << format_double(p.y) << "\n";
    }
  }
  if (r.premium_diffs) {
    os << "\n[premium_diffs]\nrecord,r\n";
    for (std::size_t i = 0; i < r.premium_diffs->r.size(); ++i) {
      os << i << "," << (r.premium_diffs->r[i] ? format_double(*r.premium_diffs->r[i]) : "NA")
         << "\n";
    }
  }
}

}  // namespace hierrate
