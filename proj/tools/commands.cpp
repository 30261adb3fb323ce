#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "hierrate/claims.hpp"
#include "hierrate/config.hpp"
#include "hierrate/csv_io.hpp"
#include "hierrate/errors.hpp"
#include "hierrate/metrics.hpp"
#include "hierrate/model_file.hpp"
#include "hierrate/selection.hpp"
#include "hierrate/simulator.hpp"
#include "hierrate/text.hpp"

namespace hierrate::cli {
namespace {

using text::format_double;

/// Model options given on the command line; each maps onto a config key and
/// overrides the config file.
struct ModelFlags {
  std::string config_path;
  std::string estimator;
  std::string family;
  std::string power;
  std::string power_grid;
  std::string covariates;

  void add_to(CLI::App* cmd, bool with_estimator, bool with_covariates) {
    cmd->add_option("--config", config_path, "Model config file (key = value)")
        ->check(CLI::ExistingFile);
    if (with_estimator) cmd->add_option("--estimator", estimator, "jewell | glmc");
    cmd->add_option("--family", family, "gaussian-identity | tweedie-log");
    cmd->add_option("--power", power, "Fixed Tweedie power in (1, 2)");
    cmd->add_option("--power-grid", power_grid, "Comma-separated Tweedie powers to profile");
    if (with_covariates) {
      cmd->add_option("--covariates", covariates, "Comma-separated covariate columns");
    }
  }

  FitConfig resolve() const {
    const Config file = config_path.empty() ? Config{} : Config::load(config_path);
    Config merged;
    for (const auto& [k, v] : file.entries()) {
      // A power flag replaces whichever power setting the file made.
      if ((!power.empty() || !power_grid.empty()) && (k == "power" || k == "power_grid")) continue;
      merged.set(k, v);
    }
    auto put = [&](const char* key, const std::string& v) {
      if (!v.empty()) merged.set(key, v);
    };
    put("estimator", estimator);
    put("family", family);
    put("power", power);
    put("power_grid", power_grid);
    put("covariates", covariates);
    return parse_fit_config(merged);
  }
};

void print_warnings(const LoadedPortfolio& loaded) {
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
}

Portfolio load(const std::string& path, std::optional<Family> family = std::nullopt) {
  auto loaded = load_portfolio(path, {}, family);
  print_warnings(loaded);
  return std::move(loaded.portfolio);
}

std::vector<std::size_t> parse_k_grid(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& part : text::split_list(s)) {
    long long k = 0;
    try {
      k = text::parse_int(part, "--k");
    } catch (const DataError& e) {
      throw InvalidArgument(e.what());
    }
    if (k < 1) throw InvalidArgument("--k values must be at least 1");
    out.push_back(static_cast<std::size_t>(k));
  }
  if (out.empty()) throw InvalidArgument("--k needs at least one value");
  return out;
}

// ---- fit --------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string out;
  ModelFlags model;
  int holdout_period = 0;
  bool holdout_set = false;
  unsigned threads = 1;
  bool allow_unconverged = false;
};

int run_fit(const FitArgs& a) {
  const FitConfig fc = a.model.resolve();
  Portfolio portfolio = load(a.data, fc.family.family);
  if (a.holdout_set) portfolio = split_by_period(portfolio, a.holdout_period).first;
  if (portfolio.size() == 0) throw DataError("no training records");

  PricingModel model;
  model.estimator = fc.estimator;
  bool converged = true;
  if (fc.estimator == Estimator::kJewell) {
    model.jewell = fit_jewell(portfolio);
    std::cout << "estimator = jewell\nmu_hat = " << format_double(model.jewell.mu_hat) << "\n";
  } else {
    GlmcOptions opts = fc.glmc;
    opts.threads = a.threads;
    model.glmc = fit_glmc(portfolio, fc.covariates, fc.family, opts);
    converged = model.glmc.converged && model.glmc.glm.converged;
    std::cout << "estimator = glmc\nfamily = " << to_string(model.glmc.family)
              << "\npower = " << format_double(model.glmc.glm.power)
              << "\niterations = " << model.glmc.iterations
              << "\nconverged = " << (converged ? "true" : "false") << "\n";
  }
  if (!converged && !a.allow_unconverged) {
    std::cerr << "error: fit did not converge; rerun with --allow-unconverged to keep it\n";
    return kNumerical;
  }
  write_file_atomic(a.out, [&](std::ostream& os) { write_model(os, model); });
  return kOk;
}

// ---- predict ------------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string data;
  std::string out;
  std::string rebalance;
};

int run_predict(const PredictArgs& a) {
  PricingModel model = load_model(a.model);
  if (!a.rebalance.empty()) {
    if (model.estimator != Estimator::kGlmc || model.glmc.family != Family::kTweedieLog) {
      throw InvalidArgument("--rebalance needs a tweedie-log glmc model");
    }
    const Portfolio ref = load(a.rebalance);
    const auto ref_pred = predict(model, ref);
    const double alpha = balance_alpha(ref.responses(), ref_pred, ref.exposures());
    model.glmc = rebalance_intercept(std::move(model.glmc), alpha);
    std::cerr << "rebalance alpha = " << format_double(alpha) << "\n";
  }
  const Portfolio portfolio = load(a.data);
  const auto pred = predict(model, portfolio);
  write_file_atomic(a.out, [&](std::ostream& os) { write_predictions(os, portfolio, pred); });
  return kOk;
}

// ---- evaluate -----------------------------------------------------------------

struct EvaluateArgs {
  std::string data;
  std::string predictions;
  std::string benchmark;
  std::string out;
  std::string abscissa = "exposure";
  int holdout_period = 0;
  bool holdout_set = false;
};

int run_evaluate(const EvaluateArgs& a) {
  const Portfolio portfolio = load(a.data);
  std::vector<double> pred = read_predictions(a.predictions, portfolio);
  std::optional<std::vector<double>> bench;
  if (!a.benchmark.empty()) bench = read_predictions(a.benchmark, portfolio);

  std::vector<double> y, w;
  std::vector<double> p, b;
  for (std::size_t i = 0; i < portfolio.size(); ++i) {
    const auto& o = portfolio.observations()[i];
    if (a.holdout_set && o.period < a.holdout_period) continue;
    y.push_back(o.response);
    w.push_back(o.exposure);
    p.push_back(pred[i]);
    if (bench) b.push_back((*bench)[i]);
  }
  if (y.empty()) throw DataError("no records to evaluate");
  LorenzAbscissa abscissa = LorenzAbscissa::kExposure;
  if (a.abscissa == "predicted-damage") {
    abscissa = LorenzAbscissa::kPredictedDamage;
  } else if (a.abscissa != "exposure") {
    throw InvalidArgument("--abscissa must be exposure or predicted-damage");
  }
  std::optional<std::span<const double>> bspan;
  if (bench) bspan = std::span<const double>(b);
  const EvaluationReport rep = evaluate(y, p, w, bspan, abscissa);
  auto emit = [&](std::ostream& os) { write_report(os, rep); };
  if (a.out.empty() || a.out == "-") {
    emit(std::cout);
  } else {
    write_file_atomic(a.out, emit);
  }
  return kOk;
}

// ---- simulate -----------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out;
  std::string truth;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 1;
};

int run_simulate(const SimulateArgs& a) {
  SimulationSpec spec = parse_simulation_spec(Config::load(a.config));
  if (a.seed_set) spec.seed = a.seed;
  const Simulation sim = simulate_portfolio(spec, a.threads);
  write_file_atomic(a.out, [&](std::ostream& os) { write_portfolio(os, sim.portfolio); });
  const std::string truth = a.truth.empty() ? a.out + ".truth" : a.truth;
  write_file_atomic(truth, [&](std::ostream& os) { write_ground_truth(os, sim); });
  std::cout << "records = " << sim.portfolio.size() << "\n";
  return kOk;
}

// ---- subset-select ------------------------------------------------------------

struct SubsetArgs {
  std::string data;
  std::string candidates;
  std::string forced;
  std::string out;
  ModelFlags model;
  unsigned threads = 1;
};

int run_subset(const SubsetArgs& a) {
  const FitConfig fc = a.model.resolve();
  const Portfolio portfolio = load(a.data, fc.family.family);
  const auto cand = text::split_list(a.candidates);
  const auto forced = text::split_list(a.forced);
  const auto entries = best_subset(portfolio, cand, forced, fc.family, fc.glmc, a.threads);
  auto emit = [&](std::ostream& os) {
    os << "format = hierrate-subsets/1\n";
    os << "subsets = " << entries.size() << "\n";
    os << "best = " << text::join(entries.front().covariates, ";") << "\n";
    os << "\n[subsets]\n" << "rank,covariates,aic,ok,converged,power,error\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      os << csv::format_row({std::to_string(i + 1), text::join(e.covariates, ";"),
                             format_double(e.aic), e.ok ? "1" : "0", e.converged ? "1" : "0",
                             format_double(e.power), e.error})
         << "\n";
    }
  };
  if (a.out.empty() || a.out == "-") {
    emit(std::cout);
  } else {
    write_file_atomic(a.out, emit);
  }
  return kOk;
}

// ---- bin ----------------------------------------------------------------------

struct BinArgs {
  std::string data;
  std::string covariate;
  std::string k_grid;
  std::string others;
  std::string out;
  ModelFlags model;
  unsigned threads = 1;
};

int run_bin(const BinArgs& a) {
  const FitConfig fc = a.model.resolve();
  const Portfolio portfolio = load(a.data, fc.family.family);
  const auto ks = parse_k_grid(a.k_grid);
  const auto others = text::split_list(a.others);
  const ClusterSearch res =
      cluster_grid_search(portfolio, a.covariate, ks, fc.family, others, fc.glmc, a.threads);
  const auto& best = *std::find_if(res.per_k.begin(), res.per_k.end(),
                                   [&](const ClusterCandidate& c) { return c.k == res.best_k; });
  auto emit = [&](std::ostream& os) {
    os << "format = hierrate-bins/1\n";
    os << "covariate = " << res.covariate << "\n";
    os << "best_k = " << res.best_k << "\n";
    os << "unclustered_aic = " << format_double(res.unclustered_aic) << "\n";
    os << "\n[coefficients]\nlevel,estimate\n";
    for (std::size_t i = 0; i < res.levels.size(); ++i) {
      os << csv::format_row({res.levels[i], format_double(res.coefficients[i])}) << "\n";
    }
    os << "\n[aic]\nk,aic,ok,error\n";
    for (const auto& c : res.per_k) {
      os << csv::format_row({std::to_string(c.k), format_double(c.aic), c.ok ? "1" : "0", c.error})
         << "\n";
    }
    os << "\n[cluster_map]\nlevel,cluster\n";
    for (const auto& [level, cluster] : best.mapping) {
      os << csv::format_row({level, cluster}) << "\n";
    }
    os << "\n[cluster_effects]\ncluster,levels,coefficient,rate\n";
    for (const auto& e : best.effects) {
      os << csv::format_row({e.label, text::join(e.levels, ";"), format_double(e.coefficient),
                             format_double(e.rate)})
         << "\n";
    }
  };
  if (a.out.empty() || a.out == "-") {
    emit(std::cout);
  } else {
    write_file_atomic(a.out, emit);
  }
  return kOk;
}

// ---- aggregate ----------------------------------------------------------------

struct AggregateArgs {
  std::string claims;
  std::string out;
  double tau = 0.0;
  std::string factors;
  std::string grouping = "unit";
  bool no_redistribute = false;
};

int run_aggregate(const AggregateArgs& a) {
  CapConfig cap;
  cap.tau = a.tau;
  cap.redistribute = !a.no_redistribute;
  const ClaimTable table = load_claims(a.claims);
  if (a.factors.empty()) {
    for (const auto& r : table.records) cap.correction_factors.emplace(r.period, 1.0);
  } else {
    for (const auto& item : text::split_list(a.factors)) {
      const auto parts = text::split(item, ':');
      if (parts.size() != 2) throw InvalidArgument("--factors entries look like period:factor");
      try {
        cap.correction_factors[static_cast<int>(text::parse_int(parts[0], "period"))] =
            text::parse_double(parts[1], "factor");
      } catch (const DataError& e) {
        throw InvalidArgument(std::string("--factors: ") + e.what());
      }
    }
  }
  Grouping g = Grouping::kUnit;
  if (a.grouping == "tariff-class") {
    g = Grouping::kTariffClass;
  } else if (a.grouping != "unit") {
    throw InvalidArgument("--grouping must be unit or tariff-class");
  }
  const AggregationResult res = cap_and_aggregate(table, cap, g);
  write_file_atomic(a.out, [&](std::ostream& os) { write_portfolio(os, res.portfolio); });
  std::cout << "records = " << res.portfolio.size() << "\ncapped_claims = " << res.capped_claims
            << "\ntotal_excess = " << format_double(res.total_excess) << "\n";
  return kOk;
}

std::string config_help(const std::vector<std::pair<std::string, std::string>>& keys) {
  std::ostringstream os;
  os << "Config keys:\n";
  for (const auto& [k, d] : keys) os << "  " << k << "\n      " << d << "\n";
  return os.str();
}

}  // namespace

std::function<int()> register_commands(CLI::App& app) {
  app.require_subcommand(1);

  auto fit = std::make_shared<FitArgs>();
  auto* fit_cmd = app.add_subcommand("fit", "Fit a jewell or glmc model and write a model file");
  fit_cmd->add_option("--data", fit->data, "Portfolio CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--out", fit->out, "Model file to write")->required();
  fit->model.add_to(fit_cmd, true, true);
  fit_cmd->add_option("--holdout-period", fit->holdout_period,
                      "Fit only on records with period below this value");
  fit_cmd->add_option("--threads", fit->threads, "Worker threads for power profiling")
      ->check(CLI::Range(1u, 1024u));
  fit_cmd->add_flag("--allow-unconverged", fit->allow_unconverged,
                    "Write the model even if the fit did not converge");
  fit_cmd->footer(config_help(fit_config_keys()));

  auto pred = std::make_shared<PredictArgs>();
  auto* pred_cmd = app.add_subcommand("predict", "Write per-record predictions of a model");
  pred_cmd->add_option("--model", pred->model, "Model file")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--data", pred->data, "Portfolio CSV")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--out", pred->out, "Predictions CSV to write")->required();
  pred_cmd->add_option("--rebalance", pred->rebalance,
                       "Portfolio CSV whose balance factor shifts the intercept")
      ->check(CLI::ExistingFile);

  auto eval = std::make_shared<EvaluateArgs>();
  auto* eval_cmd = app.add_subcommand("evaluate", "Gini, Lorenz curve, loss ratio and balance");
  eval_cmd->add_option("--data", eval->data, "Observed portfolio CSV")->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--predictions", eval->predictions, "Predictions CSV")->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--benchmark", eval->benchmark, "Benchmark predictions CSV")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval->out, "Report file (default stdout)");
  eval_cmd->add_option("--abscissa", eval->abscissa, "exposure | predicted-damage");
  eval_cmd->add_option("--holdout-period", eval->holdout_period,
                       "Evaluate only records with period at or above this value");

  auto sim = std::make_shared<SimulateArgs>();
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a portfolio with known ground truth");
  sim_cmd->add_option("--config", sim->config, "Simulation config")->required()
      ->check(CLI::ExistingFile);
  sim_cmd->add_option("--out", sim->out, "Portfolio CSV to write")->required();
  sim_cmd->add_option("--truth", sim->truth, "Ground-truth file (default <out>.truth)");
  sim_cmd->add_option("--seed", sim->seed, "Seed overriding the config");
  sim_cmd->add_option("--threads", sim->threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  sim_cmd->footer(config_help(simulation_config_keys()));

  auto sub = std::make_shared<SubsetArgs>();
  auto* sub_cmd = app.add_subcommand("subset-select", "Rank covariate subsets by AIC");
  sub_cmd->add_option("--data", sub->data, "Portfolio CSV")->required()->check(CLI::ExistingFile);
  sub_cmd->add_option("--candidates", sub->candidates, "Comma-separated candidate covariates");
  sub_cmd->add_option("--forced", sub->forced, "Comma-separated covariates always included");
  sub_cmd->add_option("--out", sub->out, "Table file (default stdout)");
  sub->model.add_to(sub_cmd, false, false);
  sub_cmd->add_option("--threads", sub->threads, "Worker threads")->check(CLI::Range(1u, 1024u));

  auto bin = std::make_shared<BinArgs>();
  auto* bin_cmd = app.add_subcommand("bin", "Cluster the levels of a covariate, choosing k by AIC");
  bin_cmd->add_option("--data", bin->data, "Portfolio CSV")->required()->check(CLI::ExistingFile);
  bin_cmd->add_option("--covariate", bin->covariate, "Covariate to cluster")->required();
  bin_cmd->add_option("--k", bin->k_grid, "Comma-separated cluster counts")->required();
  bin_cmd->add_option("--others", bin->others, "Other covariates kept in every fit");
  bin_cmd->add_option("--out", bin->out, "Table file (default stdout)");
  bin->model.add_to(bin_cmd, false, false);
  bin_cmd->add_option("--threads", bin->threads, "Worker threads")->check(CLI::Range(1u, 1024u));

  auto agg = std::make_shared<AggregateArgs>();
  auto* agg_cmd = app.add_subcommand("aggregate", "Cap claims and aggregate them to damage rates");
  agg_cmd->add_option("--claims", agg->claims, "Claims CSV")->required()->check(CLI::ExistingFile);
  agg_cmd->add_option("--out", agg->out, "Portfolio CSV to write")->required();
  agg_cmd->add_option("--tau", agg->tau, "Base capping threshold")->required();
  agg_cmd->add_option("--factors", agg->factors,
                      "Per-period correction factors, e.g. 1:1.0,2:1.03 (default 1 for all)");
  agg_cmd->add_option("--grouping", agg->grouping, "unit | tariff-class");
  agg_cmd->add_flag("--no-redistribute", agg->no_redistribute,
                    "Drop the capped excess instead of redistributing it");

  return [=]() -> int {
    if (fit_cmd->parsed()) {
      fit->holdout_set = fit_cmd->count("--holdout-period") > 0;
      return run_fit(*fit);
    }
    if (pred_cmd->parsed()) return run_predict(*pred);
    if (eval_cmd->parsed()) {
      eval->holdout_set = eval_cmd->count("--holdout-period") > 0;
      return run_evaluate(*eval);
    }
    if (sim_cmd->parsed()) {
      sim->seed_set = sim_cmd->count("--seed") > 0;
      return run_simulate(*sim);
    }
    if (sub_cmd->parsed()) return run_subset(*sub);
    if (bin_cmd->parsed()) return run_bin(*bin);
    if (agg_cmd->parsed()) return run_aggregate(*agg);
    return kUsage;
  };
}

}  // namespace hierrate::cli
