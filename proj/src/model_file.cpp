#include "hierrate/model_file.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hierrate/csv_io.hpp"
#include "hierrate/errors.hpp"
#include "hierrate/text.hpp"

namespace hierrate {
namespace {

using text::format_double;

std::string flag(bool b) { return b ? "true" : "false"; }

bool parse_flag(std::string_view s, std::string_view what) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw DataError(std::string(what) + ": expected true or false, got '" + std::string(s) + "'");
}

void write_table(std::ostream& out, std::string_view name,
                 const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  out << "\n[" << name << "]\n" << csv::format_row(header) << "\n";
  for (const auto& r : rows) out << csv::format_row(r) << "\n";
}

void write_components(std::ostream& out, const CredibilityFit& c) {
  out << "mu_hat = " << format_double(c.mu_hat) << "\n";
  out << "mu_fallback = " << flag(c.mu_fallback) << "\n";
  out << "sigma2 = " << format_double(c.components.sigma2) << "\n";
  out << "sigma2_branch = " << format_double(c.components.sigma2_branch) << "\n";
  out << "sigma2_industry = " << format_double(c.components.sigma2_industry) << "\n";
  out << "clipped = " << flag(c.components.clipped_sigma2) << ","
      << flag(c.components.clipped_branch) << "," << flag(c.components.clipped_industry) << "\n";
  out << "degenerate = " << flag(c.components.degenerate_sigma2) << ","
      << flag(c.components.degenerate_branch) << "," << flag(c.components.degenerate_industry)
      << "\n";
}

void read_components(const StructuredText& s, CredibilityFit& c) {
  c.mu_hat = text::parse_double(s.key("mu_hat"), "mu_hat");
  c.mu_fallback = parse_flag(s.key("mu_fallback"), "mu_fallback");
  c.components.sigma2 = text::parse_double(s.key("sigma2"), "sigma2");
  c.components.sigma2_branch = text::parse_double(s.key("sigma2_branch"), "sigma2_branch");
  c.components.sigma2_industry = text::parse_double(s.key("sigma2_industry"), "sigma2_industry");
  const auto clipped = text::split_list(s.key("clipped"));
  const auto degenerate = text::split_list(s.key("degenerate"));
  if (clipped.size() != 3 || degenerate.size() != 3) {
    throw DataError("model file: clipped/degenerate need three flags");
  }
  c.components.clipped_sigma2 = parse_flag(clipped[0], "clipped");
  c.components.clipped_branch = parse_flag(clipped[1], "clipped");
  c.components.clipped_industry = parse_flag(clipped[2], "clipped");
  c.components.degenerate_sigma2 = parse_flag(degenerate[0], "degenerate");
  c.components.degenerate_branch = parse_flag(degenerate[1], "degenerate");
  c.components.degenerate_industry = parse_flag(degenerate[2], "degenerate");
}

void require_columns(const StructuredText::Table& t, std::string_view name, std::size_t n) {
  for (const auto& r : t.rows) {
    if (r.size() != n) {
      throw DataError("model file: table [" + std::string(name) + "] rows need " +
                      std::to_string(n) + " fields");
    }
  }
}

double num(const std::string& s, std::string_view what) { return text::parse_double(s, what); }

}  // namespace

std::string_view to_string(Estimator e) noexcept {
  return e == Estimator::kJewell ? "jewell" : "glmc";
}

Estimator parse_estimator(std::string_view s) {
  if (s == "jewell") return Estimator::kJewell;
  if (s == "glmc") return Estimator::kGlmc;
  throw InvalidArgument("unknown estimator '" + std::string(s) + "' (expected jewell or glmc)");
}

std::vector<double> predict(const PricingModel& model, const Portfolio& portfolio) {
  if (model.estimator == Estimator::kGlmc) return predict_glmc(model.glmc, portfolio);
  std::vector<double> out;
  out.reserve(portfolio.size());
  for (const auto& o : portfolio.observations()) {
    out.push_back(predict_jewell(model.jewell, o.industry_id, o.branch_id));
  }
  return out;
}

void write_model(std::ostream& out, const PricingModel& model) {
  out << "format = " << kModelFormat << "\n";
  out << "estimator = " << to_string(model.estimator) << "\n";
  if (model.estimator == Estimator::kJewell) {
    const auto& c = model.jewell;
    write_components(out, c);
    std::vector<std::vector<std::string>> rows;
    for (const auto& j : c.industries) {
      rows.push_back({j.industry_id, format_double(j.mean_z), format_double(j.z_sum),
                      format_double(j.q), format_double(j.predictor)});
    }
    write_table(out, "industries", {"industry_id", "mean_z", "z_sum", "q", "predictor"}, rows);
    rows.clear();
    for (const auto& b : c.branches) {
      rows.push_back({b.industry_id, b.branch_id, format_double(b.mean), format_double(b.weight),
                      format_double(b.z), format_double(b.predictor)});
    }
    write_table(out, "branches", {"industry_id", "branch_id", "mean", "weight", "z", "predictor"},
                rows);
    return;
  }

  const GlmcFit& f = model.glmc;
  const GlmFit& g = f.glm;
  out << "family = " << to_string(f.family) << "\n";
  out << "power = " << format_double(g.power) << "\n";
  out << "dispersion = " << format_double(g.dispersion) << "\n";
  out << "deviance = " << format_double(g.deviance) << "\n";
  out << "log_likelihood = " << format_double(g.log_likelihood) << "\n";
  out << "aic = " << (g.converged ? format_double(glm_aic(g)) : std::string("nan")) << "\n";
  out << "rank = " << g.rank << "\n";
  out << "n_obs = " << g.n_obs << "\n";
  out << "glm_iterations = " << g.iterations << "\n";
  out << "glm_converged = " << flag(g.converged) << "\n";
  out << "iterations = " << f.iterations << "\n";
  out << "converged = " << flag(f.converged) << "\n";
  out << "covariates = " << text::join(f.covariates, ",") << "\n";
  write_components(out, f.credibility);

  std::vector<std::vector<std::string>> rows;
  for (const auto& cov : f.encoding.covariates) {
    for (const auto& level : cov.levels) rows.push_back({cov.name, level});
  }
  write_table(out, "encoding", {"covariate", "level"}, rows);
  rows.clear();
  for (std::size_t i = 0; i < g.column_names.size(); ++i) {
    const bool aliased = std::find(g.dropped_columns.begin(), g.dropped_columns.end(),
                                   g.column_names[i]) != g.dropped_columns.end();
    rows.push_back({g.column_names[i], format_double(g.coefficients(static_cast<Eigen::Index>(i))),
                    aliased ? "1" : "0"});
  }
  write_table(out, "coefficients", {"column", "estimate", "aliased"}, rows);
  rows.clear();
  for (const auto& [id, u] : f.u_industry) rows.push_back({id, format_double(u)});
  write_table(out, "industry_effects", {"industry_id", "u"}, rows);
  rows.clear();
  for (const auto& [key, u] : f.u_branch) rows.push_back({key.first, key.second, format_double(u)});
  write_table(out, "branch_effects", {"industry_id", "branch_id", "u"}, rows);
  rows.clear();
  for (std::size_t i = 0; i < f.trajectory.size(); ++i) {
    rows.push_back({std::to_string(i + 1), format_double(f.trajectory[i])});
  }
  write_table(out, "trajectory", {"iteration", "max_rel_change"}, rows);
  if (f.profile) {
    rows.clear();
    for (const auto& p : f.profile->points) {
      rows.push_back({format_double(p.power),
                      p.ok ? format_double(p.log_likelihood) : std::string("nan"),
                      p.ok ? "1" : "0"});
    }
    write_table(out, "power_profile", {"power", "log_likelihood", "ok"}, rows);
  }
}

PricingModel read_model(std::istream& in, std::string_view source) {
  const StructuredText s = read_structured_text(in, source);
  if (s.key("format") != kModelFormat) {
    throw DataError(std::string(source) + ": unsupported model format '" + s.key("format") + "'");
  }
  PricingModel m;
  m.estimator = parse_estimator(s.key("estimator"));
  if (m.estimator == Estimator::kJewell) {
    auto& c = m.jewell;
    read_components(s, c);
    const auto& ind = s.table("industries");
    require_columns(ind, "industries", 5);
    for (const auto& r : ind.rows) {
      c.industries.push_back({r[0], num(r[1], "mean_z"), num(r[2], "z_sum"), num(r[3], "q"),
                              num(r[4], "predictor")});
    }
    const auto& br = s.table("branches");
    require_columns(br, "branches", 6);
    for (const auto& r : br.rows) {
      c.branches.push_back({r[0], r[1], num(r[2], "mean"), num(r[3], "weight"), num(r[4], "z"),
                            num(r[5], "predictor")});
    }
    return m;
  }

  GlmcFit& f = m.glmc;
  GlmFit& g = f.glm;
  f.family = parse_family(s.key("family"));
  g.family = f.family;
  g.power = num(s.key("power"), "power");
  g.dispersion = num(s.key("dispersion"), "dispersion");
  g.deviance = num(s.key("deviance"), "deviance");
  g.log_likelihood = num(s.key("log_likelihood"), "log_likelihood");
  g.rank = static_cast<std::size_t>(text::parse_int(s.key("rank"), "rank"));
  g.n_obs = static_cast<std::size_t>(text::parse_int(s.key("n_obs"), "n_obs"));
  g.iterations = static_cast<int>(text::parse_int(s.key("glm_iterations"), "glm_iterations"));
  g.converged = parse_flag(s.key("glm_converged"), "glm_converged");
  f.iterations = static_cast<int>(text::parse_int(s.key("iterations"), "iterations"));
  f.converged = parse_flag(s.key("converged"), "converged");
  f.covariates = text::split_list(s.key("covariates"));
  read_components(s, f.credibility);

  const auto& enc = s.table("encoding");
  require_columns(enc, "encoding", 2);
  f.encoding.column_names.emplace_back(kInterceptName);
  for (const auto& r : enc.rows) {
    if (f.encoding.covariates.empty() || f.encoding.covariates.back().name != r[0]) {
      f.encoding.covariates.push_back({r[0], {}, f.encoding.column_names.size()});
    } else {
      f.encoding.column_names.push_back(r[0] + ":" + r[1]);
    }
    f.encoding.covariates.back().levels.push_back(r[1]);
  }
  const auto& coef = s.table("coefficients");
  require_columns(coef, "coefficients", 3);
  if (coef.rows.size() != f.encoding.column_names.size()) {
    throw DataError(std::string(source) + ": coefficient table does not match the encoding");
  }
  g.coefficients.resize(static_cast<Eigen::Index>(coef.rows.size()));
  for (std::size_t i = 0; i < coef.rows.size(); ++i) {
    const auto& r = coef.rows[i];
    if (r[0] != f.encoding.column_names[i]) {
      throw DataError(std::string(source) + ": coefficient '" + r[0] +
                      "' does not match encoding column '" + f.encoding.column_names[i] + "'");
    }
    g.column_names.push_back(r[0]);
    g.coefficients(static_cast<Eigen::Index>(i)) = num(r[1], "estimate");
    if (r[2] == "1") g.dropped_columns.push_back(r[0]);
  }
  const auto& ui = s.table("industry_effects");
  require_columns(ui, "industry_effects", 2);
  for (const auto& r : ui.rows) f.u_industry.emplace(r[0], num(r[1], "u"));
  const auto& ub = s.table("branch_effects");
  require_columns(ub, "branch_effects", 3);
  for (const auto& r : ub.rows) f.u_branch.emplace(BranchKey{r[0], r[1]}, num(r[2], "u"));
  if (s.tables.count("trajectory")) {
    for (const auto& r : s.table("trajectory").rows) {
      if (r.size() != 2) throw DataError("model file: [trajectory] rows need 2 fields");
      f.trajectory.push_back(num(r[1], "max_rel_change"));
    }
  }
  if (s.tables.count("power_profile")) {
    PowerProfile prof;
    prof.best_power = g.power;
    for (const auto& r : s.table("power_profile").rows) {
      if (r.size() != 3) throw DataError("model file: [power_profile] rows need 3 fields");
      prof.points.push_back({num(r[0], "power"), num(r[1], "log_likelihood"), r[2] == "1", ""});
    }
    f.profile = std::move(prof);
  }
  return m;
}

PricingModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_model(in, path.string());
}

const std::string& StructuredText::key(std::string_view name) const {
  const auto it = keys.find(name);
  if (it == keys.end()) throw DataError("missing key '" + std::string(name) + "'");
  return it->second;
}

const StructuredText::Table& StructuredText::table(std::string_view name) const {
  const auto it = tables.find(name);
  if (it == tables.end()) throw DataError("missing section [" + std::string(name) + "]");
  return it->second;
}

StructuredText read_structured_text(std::istream& in, std::string_view source) {
  StructuredText s;
  std::string line;
  std::size_t line_no = 0;
  StructuredText::Table* current = nullptr;
  bool need_header = false;
  auto fail = [&](const std::string& msg) {
    return DataError(std::string(source) + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      const std::string name(t.substr(1, t.size() - 2));
      auto [it, fresh] = s.tables.try_emplace(name);
      if (!fresh) throw fail("duplicate section [" + name + "]");
      current = &it->second;
      need_header = true;
      continue;
    }
    if (current) {
      try {
        auto fields = csv::parse_line(line);
        if (need_header) {
          current->header = std::move(fields);
          need_header = false;
        } else {
          current->rows.push_back(std::move(fields));
        }
      } catch (const DataError& e) {
        throw fail(e.what());
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw fail("expected 'key = value'");
    const std::string k(text::trim(t.substr(0, eq)));
    if (!s.keys.emplace(k, std::string(text::trim(t.substr(eq + 1)))).second) {
      throw fail("duplicate key '" + k + "'");
    }
  }
  return s;
}

}  // namespace hierrate
