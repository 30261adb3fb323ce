// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "../oracles.hpp"
#include "hierrate/cluster.hpp"
#include "hierrate/credibility.hpp"
#include "hierrate/glmc.hpp"
#include "hierrate/metrics.hpp"
#include "hierrate/selection.hpp"
#include "hierrate/simulator.hpp"
#include "hierrate/tweedie.hpp"

using namespace hierrate;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double weighted_sum(std::span<const double> v, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * w[i];
  return s;
}

Outcome blup_oracle() {
  std::mt19937_64 rng(20240101);
  double worst = 0.0;
  for (int rep = 0; rep < 25; ++rep) {
    const auto p = oracle::random_portfolio(rng, 3, 3, 4);
    const auto fit = fit_jewell(p, {}, DegeneratePolicy::kZero);
    const auto& c = fit.components;
    const auto ref = oracle::blup(p, c.sigma2, c.sigma2_branch, c.sigma2_industry);
    for (const auto& ind : fit.industries) {
      worst = std::max(worst, std::abs(ind.predictor - ref.industry.at(ind.industry_id)));
    }
    for (const auto& br : fit.branches) {
      worst = std::max(worst,
                       std::abs(br.predictor - ref.branch.at({br.industry_id, br.branch_id})));
    }
  }
  return {worst < 1e-8, "max abs diff " + fmt(worst)};
}

Outcome variance_recovery() {
  const double truth[3] = {1.0, 0.25, 0.5};
  std::vector<double> err[3];
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    SimulationSpec s;
    s.n_industries = 50;
    s.branches_per_industry = 10;
    s.units_per_branch = 1;
    s.periods = 5;
    s.exposure_law = ExposureLaw::kConstant;
    s.exposure_low = 1.0;
    s.family = Family::kGaussianIdentity;
    s.dispersion = truth[0];
    s.sigma2_branch = truth[1];
    s.sigma2_industry = truth[2];
    s.seed = 1000 + rep;
    const auto sim = simulate_portfolio(s);
    const auto vc = estimate_variance_components(sim.portfolio);
    const double est[3] = {vc.sigma2, vc.sigma2_branch, vc.sigma2_industry};
    for (int k = 0; k < 3; ++k) err[k].push_back(std::abs(est[k] - truth[k]) / truth[k]);
  }
  const double m[3] = {median(err[0]), median(err[1]), median(err[2])};
  const bool ok = m[0] < 0.15 && m[1] < 0.15 && m[2] < 0.15;
  return {ok, "median |rel err| sigma2 " + fmt(m[0]) + ", sigma2_branch " + fmt(m[1]) +
                  ", sigma2_industry " + fmt(m[2])};
}

SimulationSpec tweedie_spec(std::uint64_t seed, double p, std::size_t units) {
  SimulationSpec s;
  s.n_industries = 10;
  s.branches_per_industry = 5;
  s.units_per_branch = units;
  s.periods = 5;
  s.sigma2_industry = 0.1;
  s.sigma2_branch = 0.05;
  s.family = Family::kTweedieLog;
  s.power = p;
  s.dispersion = 1.0;
  s.covariates = {{"size", {"S", "M", "L"}, {0.0, 0.3, 0.6}, {}}};
  s.seed = seed;
  return s;
}

Outcome balance() {
  std::mt19937_64 rng(77);
  double worst_gauss = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const auto p = oracle::random_portfolio(rng, 6, 5, 6);
    const auto w = p.exposures();
    const double obs = weighted_sum(p.responses(), w);
    const auto jewell = fit_jewell(p);
    std::vector<double> pj;
    for (const auto& o : p.observations()) pj.push_back(predict_jewell(jewell, o.industry_id, o.branch_id));
    const auto glmc = fit_glmc(p, std::vector<std::string>{}, FamilySpec::gaussian());
    const auto pg = predict_glmc(glmc, p);
    worst_gauss = std::max({worst_gauss, std::abs(weighted_sum(pj, w) - obs) / std::abs(obs),
                            std::abs(weighted_sum(pg, w) - obs) / std::abs(obs)});
  }
  double worst_tweedie = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto sim = simulate_portfolio(tweedie_spec(seed, 1.5, 4));
    const auto& p = sim.portfolio;
    const std::vector<std::string> sel{"size"};
    auto fit = fit_glmc(p, sel, FamilySpec::tweedie(1.5));
    const double alpha = balance_alpha(p.responses(), predict_glmc(fit, p), p.exposures());
    fit = rebalance_intercept(std::move(fit), alpha);
    const double obs = weighted_sum(p.responses(), p.exposures());
    worst_tweedie = std::max(
        worst_tweedie, std::abs(weighted_sum(predict_glmc(fit, p), p.exposures()) - obs) / obs);
  }
  return {worst_gauss < 1e-8 && worst_tweedie < 1e-10,
          "gaussian rel " + fmt(worst_gauss) + ", tweedie rebalanced rel " + fmt(worst_tweedie)};
}

Outcome tweedie_density() {
  double worst_atom = 0.0;
  int triples = 0;
  for (double mu : {0.3, 1.0, 2.5, 7.0, 40.0}) {
    for (double phi : {0.4, 1.7}) {
      for (double p : {1.15, 1.6}) {
        const double got = tweedie_log_density(0.0, mu, phi, p);
        const double exact = -std::pow(mu, 2.0 - p) / (phi * (2.0 - p));
        worst_atom = std::max(worst_atom, std::abs(got - exact) / std::max(1.0, std::abs(exact)));
        ++triples;
      }
    }
  }
  struct Triple {
    double mu, phi, p;
  };
  double worst_mass = 0.0;
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (const Triple t : {Triple{1, 1, 1.5}, Triple{2, 0.5, 1.3}, Triple{0.5, 2, 1.8}}) {
    // Integrate up to the mean plus 60 standard deviations; the remaining
    // tail is far below the tolerance.
    const double sd = std::sqrt(t.phi * std::pow(t.mu, t.p));
    const double upper = t.mu + 60.0 * sd;
    const auto f = [&](double y) { return std::exp(tweedie_log_density(y, t.mu, t.phi, t.p)); };
    const double mass =
        integrator.integrate(f, 0.0, upper) + std::exp(tweedie_log_density(0.0, t.mu, t.phi, t.p));
    worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
  }
  return {triples == 20 && worst_atom <= 1e-12 && worst_mass < 1e-6,
          "atom rel err " + fmt(worst_atom) + " over " + std::to_string(triples) +
              " triples, mass err " + fmt(worst_mass)};
}

Outcome power_recovery() {
  std::string detail;
  bool ok = true;
  for (double p : {1.3, 1.5, 1.77}) {
    int hits = 0;
    std::vector<double> estimates;
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
      const auto sim = simulate_portfolio(tweedie_spec(5000 + rep, p, 40));
      const std::vector<std::string> sel{"size"};
      const auto fit = fit_glmc(sim.portfolio, sel, FamilySpec::tweedie_profiled());
      estimates.push_back(fit.glm.power);
      if (std::abs(fit.glm.power - p) <= 0.1 + 1e-12) ++hits;
    }
    ok = ok && hits >= 18;
    detail += (detail.empty() ? "" : "; ") + std::string("p=") + fmt(p) + ": " +
              std::to_string(hits) + "/20 (median p " + fmt(median(estimates)) + ")";
  }
  return {ok, detail};
}

Outcome reductions() {
  std::mt19937_64 rng(606);
  double worst_add = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto p = oracle::random_portfolio(rng, 5, 4, 5);
    const auto jewell = fit_jewell(p);
    const auto glmc = fit_glmc(p, std::vector<std::string>{}, FamilySpec::gaussian());
    const auto pred = predict_glmc(glmc, p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto& o = p.observations()[i];
      worst_add = std::max(worst_add,
                           std::abs(pred[i] - predict_jewell(jewell, o.industry_id, o.branch_id)));
    }
  }
  double worst_mult = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto spec = tweedie_spec(seed, 1.5, 4);
    spec.covariates.clear();
    const auto sim = simulate_portfolio(spec);
    const auto jewell = fit_jewell(sim.portfolio);
    const auto glmc = fit_glmc(sim.portfolio, std::vector<std::string>{}, FamilySpec::tweedie(1.5));
    for (const auto& ind : jewell.industries) {
      const double u = ind.predictor / jewell.mu_hat;
      worst_mult = std::max(worst_mult, std::abs(glmc.industry_effect(ind.industry_id) / u - 1.0));
    }
    for (const auto& br : jewell.branches) {
      const double u = br.predictor / jewell.find_industry(br.industry_id)->predictor;
      worst_mult = std::max(
          worst_mult, std::abs(glmc.branch_effect(br.industry_id, br.branch_id) / u - 1.0));
    }
  }
  return {worst_add < 1e-8 && worst_mult < 1e-6,
          "additive max abs " + fmt(worst_add) + ", multiplicative max rel " + fmt(worst_mult)};
}

Outcome metrics() {
  const std::vector<double> y{1, 0}, w{1, 1};
  double err = 0.0;
  err = std::max(err, std::abs(lorenz_gini(y, std::vector<double>{1, 1}, w).gini - 0.0));
  err = std::max(err, std::abs(lorenz_gini(y, std::vector<double>{2, 1}, w).gini - 0.5));
  err = std::max(err, std::abs(lorenz_gini(y, std::vector<double>{1, 2}, w).gini + 0.5));

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double invariance = 0.0;
  int broken = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 5 + rep;
    std::vector<double> obs(n), pred(n), wt(n), expd(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = rep % 3 == 0 ? std::floor(4 * u(rng)) : 3 * u(rng) - 1;
      expd[i] = std::exp(pred[i]);
      wt[i] = 0.1 + u(rng);
      obs[i] = u(rng) < 0.3 ? 0.0 : u(rng) * 5;
    }
    obs[0] = 1.0;
    const auto a = lorenz_gini(obs, pred, wt);
    invariance = std::max(invariance, std::abs(a.gini - lorenz_gini(obs, expd, wt).gini));
    for (auto ab : {LorenzAbscissa::kExposure, LorenzAbscissa::kPredictedDamage}) {
      const auto r = lorenz_gini(obs, expd, wt, ab);
      bool ok = r.points.front().x == 0 && r.points.front().y == 0 && r.points.back().x == 1 &&
                r.points.back().y == 1;
      for (std::size_t k = 1; k < r.points.size(); ++k) {
        ok = ok && r.points[k].x >= r.points[k - 1].x && r.points[k].y >= r.points[k - 1].y;
      }
      if (!ok) ++broken;
    }
  }
  return {err <= 1e-12 && invariance <= 1e-12 && broken == 0,
          "hand-case err " + fmt(err) + ", exp invariance " + fmt(invariance) + ", " +
              std::to_string(broken) + " broken curves"};
}

Outcome cluster_optimality() {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> dn(1, 12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0;
  double worst = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = dn(rng);
    std::vector<double> x(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rep % 4 == 0 ? std::round(6 * u(rng)) + 0.001 * static_cast<double>(i) : 4 * u(rng) - 2;
      w[i] = 0.1 + 3 * u(rng);
    }
    const std::size_t k = std::min<std::size_t>(n, 1 + rep % 4);
    const double got = cluster_1d(x, w, k).wcss;
    const double brute = oracle::brute_force_contiguous(x, w, k);
    const double diff = std::abs(got - brute);
    worst = std::max(worst, diff);
    if (diff > 1e-10 * (1.0 + brute)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + "/200 mismatches, max abs diff " + fmt(worst)};
}

Outcome selection() {
  int hits = 0;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    SimulationSpec s = tweedie_spec(9000 + rep, 1.5, 40);
    s.covariates = {{"real", {"a", "b", "c"}, {0.0, 0.25, 0.5}, {}},
                    {"noise1", {"x", "y"}, {0.0, 0.0}, {}},
                    {"noise2", {"p", "q", "r"}, {0.0, 0.0, 0.0}, {}}};
    const auto sim = simulate_portfolio(s);
    const std::vector<std::string> cand{"real", "noise1", "noise2"}, forced;
    const auto ranked = best_subset(sim.portfolio, cand, forced, FamilySpec::tweedie(1.5));
    const auto& top = ranked.front().covariates;
    if (std::find(top.begin(), top.end(), "real") != top.end()) ++hits;
  }
  return {hits >= 18, std::to_string(hits) + "/20 replicates rank a set with the real effect first"};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("hierrate_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream sim(dir / "sim.cfg");
    sim << "seed = 31\nn_industries = 6\nbranches_per_industry = 4\nunits_per_branch = 10\n"
           "periods = 5\nsigma2_industry = 0.1\nsigma2_branch = 0.05\nfamily = tweedie-log\n"
           "power = 1.6\ncovariates = size\ncovariate.size.levels = S, M, L\n"
           "covariate.size.effects = 0, 0.3, 0.6\n";
    std::ofstream model(dir / "model.cfg");
    model << "estimator = glmc\nfamily = tweedie-log\ncovariates = size\n";
  }
  const std::string cli = HIERRATE_CLI_PATH;
  auto run = [&](const std::string& tag, unsigned threads) -> std::string {
    const fs::path d = dir / tag;
    fs::create_directories(d);
    const std::string t = " --threads " + std::to_string(threads);
    const std::string q = "\"";
    const std::vector<std::string> steps = {
        q + cli + q + " simulate --config " + q + (dir / "sim.cfg").string() + q + " --out " + q +
            (d / "data.csv").string() + q + t,
        q + cli + q + " fit --config " + q + (dir / "model.cfg").string() + q + " --data " + q +
            (d / "data.csv").string() + q + " --out " + q + (d / "model.txt").string() + q +
            " --holdout-period 5" + t,
        q + cli + q + " predict --model " + q + (d / "model.txt").string() + q + " --data " + q +
            (d / "data.csv").string() + q + " --out " + q + (d / "pred.csv").string() + q,
        q + cli + q + " evaluate --data " + q + (d / "data.csv").string() + q + " --predictions " +
            q + (d / "pred.csv").string() + q + " --holdout-period 5 --out " + q +
            (d / "report.txt").string() + q,
    };
    for (const auto& cmd : steps) {
      if (std::system((cmd + " > " + q + (d / "log.txt").string() + q + " 2>&1").c_str()) != 0) {
        return "FAILED: " + cmd + "\n" + slurp(d / "log.txt");
      }
    }
    return slurp(d / "data.csv") + slurp(d / "model.txt") + slurp(d / "report.txt");
  };
  const std::string a = run("a", 1);
  const std::string b = run("b", 1);
  const std::string c = run("c", 4);
  const bool report_ok = slurp(dir / "a" / "report.txt").size() > 0;
  const bool ok = report_ok && a.rfind("FAILED", 0) != 0 && a == b && a == c;
  std::string detail = ok ? "reports, models and data identical across runs and thread counts"
                          : (a.rfind("FAILED", 0) == 0 ? a.substr(0, 400) : "outputs differ");
  fs::remove_all(dir);
  return {ok, detail};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "BLUP oracle equivalence", 5, blup_oracle},
      {2, "variance-component recovery", 60, variance_recovery},
      {3, "balance property", 10, balance},
      {4, "Tweedie density correctness", 10, tweedie_density},
      {5, "power recovery", 300, power_recovery},
      {6, "reduction identities", 30, reductions},
      {7, "metric correctness", 5, metrics},
      {8, "cluster_1d optimality", 30, cluster_optimality},
      {9, "selection sanity", 300, selection},
      {10, "end-to-end determinism", 30, cli_determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = out.pass && in_time;
    if (!pass) ++failures;
    std::printf("criterion %2d %s  %s: %s [%.2f s, limit %.0f s%s]\n", c.id, pass ? "PASS" : "FAIL",
                c.name, out.detail.c_str(), secs, c.limit_seconds, in_time ? "" : ", too slow");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
