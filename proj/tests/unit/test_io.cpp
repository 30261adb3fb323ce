#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hierrate/claims.hpp"
#include "hierrate/config.hpp"
#include "hierrate/csv_io.hpp"
#include "hierrate/errors.hpp"
#include "hierrate/model_file.hpp"
#include "hierrate/simulator.hpp"
#include "hierrate/text.hpp"

using namespace hierrate;

namespace {

Simulation sample_simulation() {
  SimulationSpec s;
  s.n_industries = 3;
  s.branches_per_industry = 3;
  s.units_per_branch = 5;
  s.periods = 3;
  s.sigma2_industry = 0.1;
  s.sigma2_branch = 0.05;
  s.family = Family::kTweedieLog;
  s.power = 1.5;
  s.exposure_low = 5.0;
  s.exposure_high = 40.0;
  s.covariates = {{"size", {"S", "M", "L"}, {0.0, 0.3, 0.6}, {}}};
  s.seed = 5;
  return simulate_portfolio(s);
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("hierrate_test_" + name);
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Text, ShortestDoubleRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5}) {
    EXPECT_EQ(text::parse_double(text::format_double(v), "v"), v);
  }
  EXPECT_EQ(text::format_double(0.1), "0.1");
  EXPECT_THROW(text::parse_double("1.5x", "v"), DataError);
  EXPECT_THROW(text::parse_int("2.0", "v"), DataError);
}

TEST(Csv, QuotedFields) {
  EXPECT_EQ(csv::parse_line(R"(a,"b,c","d""e",)"),
            (std::vector<std::string>{"a", "b,c", "d\"e", ""}));
  EXPECT_EQ(csv::format_row({"a", "b,c", "d\"e"}), R"(a,"b,c","d""e")");
  EXPECT_THROW(csv::parse_line(R"(a,"b)"), DataError);
}

TEST(Csv, PortfolioRoundTrip) {
  const auto sim = sample_simulation();
  std::stringstream ss;
  write_portfolio(ss, sim.portfolio);
  const auto loaded =
      read_portfolio(ss, schema_config_from(sim.portfolio.schema()), Family::kTweedieLog);
  EXPECT_TRUE(loaded.warnings.empty());
  EXPECT_TRUE(loaded.portfolio == sim.portfolio);
}

TEST(Csv, InferredLevelsAndMissingValues) {
  std::istringstream in(
      "unit_id,industry_id,branch_id,period,exposure,response,zone\n"
      "u1,I,B,1,1,2.5,b\n"
      "u2,I,B,1,2,0,\n"
      "u3,I,B,1,3,1,a\n");
  const auto loaded = read_portfolio(in);
  const auto& spec = loaded.portfolio.schema().covariates.at(0);
  EXPECT_EQ(spec.levels, (std::vector<std::string>{"NA", "a", "b"}));
  EXPECT_EQ(loaded.portfolio.observations()[1].covariates[0], "NA");
}

TEST(Csv, NegativeExposureCitesLine) {
  std::istringstream in(
      "unit_id,industry_id,branch_id,period,exposure,response\n"
      "u1,I,B,1,1,2.5\n"
      "u2,I,B,1,-3,1\n");
  const auto msg = message_of([&] { read_portfolio(in, {}, std::nullopt, "p.csv"); });
  EXPECT_NE(msg.find("p.csv"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Csv, ParseErrorCitesLine) {
  std::istringstream in(
      "unit_id,industry_id,branch_id,period,exposure,response\n"
      "u1,I,B,1,1,abc\n");
  const auto msg = message_of([&] { read_portfolio(in, {}, std::nullopt, "p.csv"); });
  EXPECT_NE(msg.find("p.csv:2"), std::string::npos) << msg;
  std::istringstream missing("unit_id,industry_id,branch_id,period,response\n");
  EXPECT_THROW(read_portfolio(missing), DataError);
}

TEST(Csv, UndeclaredColumnWarns) {
  std::istringstream in(
      "unit_id,industry_id,branch_id,period,exposure,response,zone,extra\n"
      "u1,I,B,1,1,2.5,a,x\n"
      "u2,I,B,1,1,2.5,b,y\n");
  SchemaConfig schema;
  schema.covariates = std::vector<CovariateDecl>{{"zone", {"a", "b"}}};
  const auto loaded = read_portfolio(in, schema);
  ASSERT_EQ(loaded.warnings.size(), 1u);
  EXPECT_NE(loaded.warnings[0].find("extra"), std::string::npos);
  EXPECT_EQ(loaded.portfolio.schema().covariates.size(), 1u);
}

TEST(Csv, PredictionsMustMatchPortfolio) {
  const auto sim = sample_simulation();
  const auto path = temp_path("pred.csv");
  std::vector<double> pred(sim.portfolio.size());
  for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = 0.1 * static_cast<double>(i) + 1.0 / 3.0;
  write_file_atomic(path, [&](std::ostream& os) { write_predictions(os, sim.portfolio, pred); });
  EXPECT_EQ(read_predictions(path, sim.portfolio), pred);

  auto obs = sim.portfolio.observations();
  obs[4].period = 99;
  const Portfolio other(obs, sim.portfolio.schema());
  EXPECT_THROW(read_predictions(path, other), DataError);
  std::filesystem::remove(path);
}

TEST(Claims, HandCaseCapAndRedistribute) {
  ClaimTable t;
  for (double amount : {100.0, 50.0, 10.0}) {
    t.records.push_back({"u" + std::to_string(t.records.size()), "I", "B", 1, 2.0, amount, {}});
  }
  CapConfig cap{60.0, {{1, 1.0}}, true};
  const auto out = cap_claims(t.records, cap);
  EXPECT_DOUBLE_EQ(out[0], 85.0);
  EXPECT_DOUBLE_EQ(out[1], 62.5);
  EXPECT_DOUBLE_EQ(out[2], 12.5);
  cap.redistribute = false;
  EXPECT_EQ(cap_claims(t.records, cap), (std::vector<double>{60, 50, 10}));
  cap.correction_factors = {{2, 1.0}};
  EXPECT_THROW(cap_claims(t.records, cap), DataError);
}

TEST(Claims, AggregationConservesTotalCost) {
  ClaimTable t;
  t.covariate_names = {"size"};
  std::mt19937_64 rng(4);
  std::lognormal_distribution<double> amount(3.0, 1.5);
  for (int i = 0; i < 200; ++i) {
    const int unit = i % 17;
    const int period = 1 + (i / 17) % 3;
    t.records.push_back({"u" + std::to_string(unit), "I" + std::to_string(unit % 2),
                         "B" + std::to_string(unit % 4), period, 1.0 + unit,
                         amount(rng), {unit % 3 == 0 ? "S" : "L"}});
  }
  const CapConfig cap{100.0, {{1, 1.0}, {2, 1.03}, {3, 1.05}}, true};
  double raw = 0;
  for (const auto& r : t.records) raw += r.claim_amount;
  for (auto g : {Grouping::kUnit, Grouping::kTariffClass}) {
    const auto agg = cap_and_aggregate(t, cap, g);
    double total = 0;
    for (const auto& o : agg.portfolio.observations()) total += o.response * o.exposure;
    EXPECT_NEAR(total, raw, 1e-9 * raw);
    EXPECT_GT(agg.capped_claims, 0u);
    EXPECT_TRUE(validate_portfolio(agg.portfolio).empty());
  }
  // A cap above every claim leaves amounts untouched.
  const CapConfig loose{1e12, cap.correction_factors, true};
  const auto agg = cap_and_aggregate(t, loose, Grouping::kUnit);
  EXPECT_EQ(agg.capped_claims, 0u);
  EXPECT_EQ(agg.total_excess, 0.0);
}

TEST(Claims, ReadCsv) {
  std::istringstream in(
      "unit_id,industry_id,branch_id,period,exposure,claim_amount,size\n"
      "u1,I,B,1,2,10,S\n"
      "u1,I,B,1,2,30,S\n");
  const auto t = read_claims(in);
  ASSERT_EQ(t.records.size(), 2u);
  EXPECT_EQ(t.covariate_names, std::vector<std::string>{"size"});
  const auto agg = cap_and_aggregate(t, {1e9, {{1, 1.0}}, true}, Grouping::kUnit);
  ASSERT_EQ(agg.portfolio.size(), 1u);
  EXPECT_DOUBLE_EQ(agg.portfolio.responses()[0], 20.0);
}

TEST(ModelFile, GlmcRoundTripIsBitExact) {
  const auto sim = sample_simulation();
  const std::vector<std::string> sel{"size"};
  PricingModel m;
  m.estimator = Estimator::kGlmc;
  m.glmc = fit_glmc(sim.portfolio, sel, FamilySpec::tweedie_profiled());
  std::stringstream ss;
  write_model(ss, m);
  const std::string first = ss.str();
  const auto back = read_model(ss);
  EXPECT_EQ(predict(back, sim.portfolio), predict(m, sim.portfolio));
  std::stringstream again;
  write_model(again, back);
  EXPECT_EQ(again.str(), first);
  EXPECT_EQ(back.glmc.glm.power, m.glmc.glm.power);
  EXPECT_TRUE(back.glmc.profile.has_value());
}

TEST(ModelFile, JewellRoundTripIsBitExact) {
  const auto sim = sample_simulation();
  PricingModel m;
  m.estimator = Estimator::kJewell;
  m.jewell = fit_jewell(sim.portfolio);
  std::stringstream ss;
  write_model(ss, m);
  const auto back = read_model(ss);
  EXPECT_EQ(back.estimator, Estimator::kJewell);
  EXPECT_EQ(predict(back, sim.portfolio), predict(m, sim.portfolio));
  EXPECT_EQ(back.jewell.mu_hat, m.jewell.mu_hat);
}

TEST(ModelFile, RejectsForeignFormat) {
  std::istringstream in("format = something-else\n");
  EXPECT_THROW(read_model(in), DataError);
}

TEST(Config, ParsesKeysAndRejectsUnknown) {
  std::istringstream in(
      "# model\n"
      "estimator = glmc\n"
      "family = tweedie-log\n"
      "power_grid = 1.2, 1.5, 1.8\n"
      "covariates = size, zone\n"
      "tolerance = 1e-7\n");
  const auto cfg = Config::parse(in);
  const auto fit = parse_fit_config(cfg);
  EXPECT_EQ(fit.estimator, Estimator::kGlmc);
  EXPECT_TRUE(fit.family.is_tweedie());
  EXPECT_EQ(fit.family.power_grid, (std::vector<double>{1.2, 1.5, 1.8}));
  EXPECT_EQ(fit.covariates, (std::vector<std::string>{"size", "zone"}));
  EXPECT_EQ(fit.glmc.tolerance, 1e-7);

  std::istringstream bad("estimator = glmc\ncolour = red\n");
  const auto msg = message_of([&] { parse_fit_config(Config::parse(bad)); });
  EXPECT_NE(msg.find("colour"), std::string::npos) << msg;
  std::istringstream dup("a = 1\na = 2\n");
  EXPECT_THROW(Config::parse(dup), Error);
}

TEST(Config, SimulationSpec) {
  std::istringstream in(
      "seed = 9\n"
      "n_industries = 2\n"
      "family = tweedie\n"
      "power = 1.4\n"
      "covariates = size\n"
      "covariate.size.levels = S, L\n"
      "covariate.size.effects = 0, 0.5\n");
  const auto spec = parse_simulation_spec(Config::parse(in));
  EXPECT_EQ(spec.seed, 9u);
  EXPECT_EQ(spec.n_industries, 2u);
  EXPECT_EQ(spec.family, Family::kTweedieLog);
  EXPECT_EQ(spec.power, 1.4);
  ASSERT_EQ(spec.covariates.size(), 1u);
  EXPECT_EQ(spec.covariates[0].effects, (std::vector<double>{0.0, 0.5}));
}

TEST(AtomicWrite, FailureLeavesTargetUntouched) {
  const auto path = temp_path("atomic.txt");
  write_file_atomic(path, [](std::ostream& os) { os << "old"; });
  EXPECT_THROW(write_file_atomic(path, [](std::ostream& os) {
                 os << "new";
                 throw DataError("boom");
               }),
               DataError);
  std::ifstream in(path);
  std::string content;
  std::getline(in, content);
  EXPECT_EQ(content, "old");
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  std::filesystem::remove(path);
}
