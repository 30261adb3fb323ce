#include "hierrate/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hierrate/errors.hpp"
#include "hierrate/numeric.hpp"
#include "hierrate/tweedie.hpp"

namespace hierrate {
namespace {

struct Link {
  Family family;
  double power;

  [[nodiscard]] double inverse(double eta) const {
    return family == Family::kTweedieLog ? std::exp(eta) : eta;
  }
  [[nodiscard]] double link(double mu) const {
    return family == Family::kTweedieLog ? std::log(mu) : mu;
  }
  // Working weight w / (V(μ) g'(μ)²).
  [[nodiscard]] double working_weight(double w, double mu) const {
    return family == Family::kTweedieLog ? w * std::pow(mu, 2.0 - power) : w;
  }
  // (y − μ) g'(μ)
  [[nodiscard]] double working_residual(double y, double mu) const {
    return family == Family::kTweedieLog ? (y - mu) / mu : y - mu;
  }
  [[nodiscard]] double variance(double mu) const {
    return family == Family::kTweedieLog ? std::pow(mu, power) : 1.0;
  }
  [[nodiscard]] double unit_deviance(double y, double mu) const {
    return family == Family::kTweedieLog ? tweedie_unit_deviance(y, mu, power)
                                         : (y - mu) * (y - mu);
  }
};

double total_deviance(const Link& link, std::span<const double> y, const Eigen::VectorXd& mu,
                      std::span<const double> w) {
  CompensatedSum d;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double mi = mu(static_cast<Eigen::Index>(i));
    if (!std::isfinite(mi) || (link.family == Family::kTweedieLog && !(mi > 0.0))) {
      return std::numeric_limits<double>::infinity();
    }
    d.add(w[i] * link.unit_deviance(y[i], mi));
  }
  return d.value();
}

// Greedy left-to-right column selection: a column is kept when it is not in
// the span of the columns kept before it (pivoted-QR rank test on the
// weighted design).
std::vector<Eigen::Index> independent_columns(const Eigen::MatrixXd& xw, double tol) {
  std::vector<Eigen::Index> kept;
  for (Eigen::Index c = 0; c < xw.cols(); ++c) {
    if (xw.col(c).norm() == 0.0) continue;
    Eigen::MatrixXd trial(xw.rows(), static_cast<Eigen::Index>(kept.size()) + 1);
    for (std::size_t k = 0; k < kept.size(); ++k) {
      trial.col(static_cast<Eigen::Index>(k)) = xw.col(kept[k]).normalized();
    }
    trial.col(trial.cols() - 1) = xw.col(c).normalized();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
    qr.setThreshold(tol);
    if (qr.rank() == trial.cols()) kept.push_back(c);
  }
  return kept;
}

}  // namespace

double GlmFit::coefficient(std::string_view name) const {
  for (std::size_t i = 0; i < column_names.size(); ++i) {
    if (column_names[i] == name) return coefficients(static_cast<Eigen::Index>(i));
  }
  throw InvalidArgument("no coefficient named '" + std::string(name) + "'");
}

double glm_log_likelihood(Family family, std::span<const double> y, std::span<const double> mu,
                          std::span<const double> w, double dispersion, double power) {
  const std::size_t n = y.size();
  if (family == Family::kTweedieLog) {
    CompensatedSum ll;
    for (std::size_t i = 0; i < n; ++i) {
      ll.add(tweedie_log_density(y[i], mu[i], dispersion, power, w[i]));
    }
    return ll.value();
  }
  // Gaussian with variance φ/w, evaluated at the ML estimate φ = RSS/n.
  CompensatedSum rss, logw;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - mu[i];
    rss.add(w[i] * r * r);
    logw.add(std::log(w[i]));
  }
  const double nd = static_cast<double>(n);
  const double phi_ml = rss.value() / nd;
  return -0.5 * nd * (std::log(2.0 * std::numbers::pi * phi_ml) + 1.0) + 0.5 * logw.value();
}

GlmFit irls_fit(const DesignMatrix& design, std::span<const double> y,
                std::span<const double> w, std::span<const double> offset,
                const FamilySpec& family, const GlmOptions& options) {
  family.validate();
  const std::size_t n = design.rows();
  if (y.size() != n || w.size() != n || (!offset.empty() && offset.size() != n)) {
    throw InvalidArgument("irls_fit: response/weight/offset length does not match the design");
  }
  if (n == 0) throw InvalidArgument("irls_fit: empty design");
  const Link link{family.family, family.power()};
  for (std::size_t i = 0; i < n; ++i) {
    if (!(w[i] > 0.0) || !std::isfinite(w[i])) throw InvalidArgument("irls_fit: weights must be positive");
    if (!std::isfinite(y[i])) throw InvalidArgument("irls_fit: non-finite response");
    if (link.family == Family::kTweedieLog && y[i] < 0.0) {
      throw InvalidArgument("irls_fit: tweedie-log requires non-negative responses (record " +
                            std::to_string(i) + ")");
    }
    if (!offset.empty() && !std::isfinite(offset[i])) throw InvalidArgument("irls_fit: non-finite offset");
  }
  auto off = [&](std::size_t i) { return offset.empty() ? 0.0 : offset[i]; };

  const auto N = static_cast<Eigen::Index>(n);
  Eigen::VectorXd sqrt_w(N);
  for (Eigen::Index i = 0; i < N; ++i) sqrt_w(i) = std::sqrt(w[static_cast<std::size_t>(i)]);
  const auto kept = independent_columns(sqrt_w.asDiagonal() * design.x, options.rank_tolerance);
  const auto r = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd xr(N, r);
  for (Eigen::Index k = 0; k < r; ++k) xr.col(k) = design.x.col(kept[static_cast<std::size_t>(k)]);

  GlmFit fit;
  fit.family = link.family;
  fit.power = link.power;
  fit.column_names = design.column_names();
  fit.rank = kept.size();
  fit.n_obs = n;
  for (Eigen::Index c = 0, k = 0; c < design.x.cols(); ++c) {
    if (k < r && kept[static_cast<std::size_t>(k)] == c) {
      ++k;
    } else {
      fit.dropped_columns.push_back(design.column_names()[static_cast<std::size_t>(c)]);
    }
  }
  if (n <= fit.rank) throw NumericalError("irls_fit: no residual degrees of freedom");

  // Starting values.
  double ybar = 0.0;
  {
    CompensatedSum sy, sw;
    for (std::size_t i = 0; i < n; ++i) {
      sy.add(w[i] * y[i]);
      sw.add(w[i]);
    }
    ybar = sy.value() / sw.value();
  }
  if (link.family == Family::kTweedieLog && !(ybar > 0.0)) {
    throw NumericalError("irls_fit: tweedie-log needs a positive weighted mean response");
  }
  Eigen::VectorXd mu(N), eta(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    mu(i) = link.family == Family::kTweedieLog ? std::max(0.5 * (y[ui] + ybar), 1e-10 * ybar) : y[ui];
    eta(i) = link.link(mu(i));
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(r);
  Eigen::VectorXd offs(N);
  for (Eigen::Index i = 0; i < N; ++i) offs(i) = off(static_cast<std::size_t>(i));
  double dev_old = total_deviance(link, y, mu, w);
  bool have_beta = false;

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    Eigen::VectorXd ww(N), z(N);
    for (Eigen::Index i = 0; i < N; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      ww(i) = std::sqrt(link.working_weight(w[ui], mu(i)));
      z(i) = eta(i) - offs(i) + link.working_residual(y[ui], mu(i));
    }
    const Eigen::MatrixXd a = ww.asDiagonal() * xr;
    const Eigen::VectorXd rhs = ww.cwiseProduct(z);
    Eigen::VectorXd beta_new = a.colPivHouseholderQr().solve(rhs);

    Eigen::VectorXd eta_new = xr * beta_new + offs;
    Eigen::VectorXd mu_new = eta_new.unaryExpr([&](double e) { return link.inverse(e); });
    double dev = total_deviance(link, y, mu_new, w);

    // Step halving toward the previous coefficients on divergence.
    int halvings = 0;
    while (have_beta && (!std::isfinite(dev) || dev > dev_old * (1.0 + 1e-12)) &&
           halvings < options.max_step_halvings) {
      beta_new = 0.5 * (beta_new + beta);
      eta_new = xr * beta_new + offs;
      mu_new = eta_new.unaryExpr([&](double e) { return link.inverse(e); });
      dev = total_deviance(link, y, mu_new, w);
      ++halvings;
    }
    if (!std::isfinite(dev)) throw NumericalError("irls_fit: deviance is not finite");

    beta = beta_new;
    eta = eta_new;
    mu = mu_new;
    have_beta = true;
    fit.iterations = iter;
    fit.deviance_trace.push_back(dev);
    const bool done = std::abs(dev - dev_old) / (std::abs(dev) + 0.1) < options.tolerance;
    dev_old = dev;
    if (done) {
      fit.converged = true;
      break;
    }
  }

  fit.coefficients = Eigen::VectorXd::Zero(design.x.cols());
  for (Eigen::Index k = 0; k < r; ++k) fit.coefficients(kept[static_cast<std::size_t>(k)]) = beta(k);
  fit.deviance = dev_old;
  fit.fitted_means.assign(mu.data(), mu.data() + N);

  CompensatedSum pearson;
  for (std::size_t i = 0; i < n; ++i) {
    const double res = y[i] - fit.fitted_means[i];
    pearson.add(w[i] * res * res / link.variance(fit.fitted_means[i]));
  }
  fit.dispersion = pearson.value() / static_cast<double>(n - fit.rank);
  if (!(fit.dispersion > 0.0)) {
    throw NumericalError("irls_fit: estimated dispersion is not positive (perfect fit?)");
  }
  fit.log_likelihood =
      glm_log_likelihood(link.family, y, fit.fitted_means, w, fit.dispersion, link.power);
  return fit;
}

PowerProfile profile_power(const DesignMatrix& design, std::span<const double> response,
                           std::span<const double> weight, std::span<const double> offset,
                           std::span<const double> grid, const GlmOptions& options,
                           unsigned threads) {
  if (grid.empty()) throw InvalidArgument("profile_power: empty power grid");
  for (double p : grid) {
    if (!(p > 1.0 && p < 2.0)) throw InvalidArgument("profile_power: grid values must lie in (1, 2)");
  }
  PowerProfile prof;
  prof.points.resize(grid.size());
  std::vector<GlmFit> fits(grid.size());
  parallel_for_index(grid.size(), threads, [&](std::size_t g) {
    auto& pt = prof.points[g];
    pt.power = grid[g];
    try {
      fits[g] = irls_fit(design, response, weight, offset, FamilySpec::tweedie(grid[g]), options);
      pt.log_likelihood = fits[g].log_likelihood;
      pt.ok = std::isfinite(pt.log_likelihood);
      if (!pt.ok) pt.error = "non-finite log-likelihood";
    } catch (const Error& e) {
      pt.ok = false;
      pt.error = e.what();
    }
  });
  std::size_t best = grid.size();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (!prof.points[g].ok) continue;
    if (best == grid.size()) {
      best = g;
      continue;
    }
    const auto& a = prof.points[g];
    const auto& b = prof.points[best];
    if (a.log_likelihood > b.log_likelihood ||
        (a.log_likelihood == b.log_likelihood && a.power < b.power)) {
      best = g;
    }
  }
  if (best == grid.size()) {
    throw NumericalError("profile_power: every grid point failed (first error: " +
                         prof.points.front().error + ")");
  }
  prof.best_power = grid[best];
  prof.best_fit = std::move(fits[best]);
  return prof;
}

double glm_aic(const GlmFit& fit) {
  if (!fit.converged) throw NumericalError("glm_aic: fit did not converge");
  const double k = static_cast<double>(fit.rank) + (fit.family == Family::kTweedieLog ? 2.0 : 1.0);
  return -2.0 * fit.log_likelihood + 2.0 * k;
}

}  // namespace hierrate
