#include "hierrate/config.hpp"

#include <algorithm>
#include <fstream>

#include "hierrate/errors.hpp"
#include "hierrate/text.hpp"

namespace hierrate {

Config Config::parse(std::istream& in, std::string_view source) {
  Config c;
  c.source_ = source;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    const std::string where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw InvalidArgument(where + "expected 'key = value'");
    std::string key(text::trim(t.substr(0, eq)));
    if (key.empty()) throw InvalidArgument(where + "empty key");
    if (c.entries_.count(key)) throw InvalidArgument(where + "duplicate key '" + key + "'");
    c.entries_.emplace(std::move(key), std::string(text::trim(t.substr(eq + 1))));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  return parse(in, path.string());
}

bool Config::has(std::string_view key) const { return entries_.find(key) != entries_.end(); }

std::optional<std::string> Config::get(std::string_view key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_string(std::string_view key, std::string_view fallback) const {
  return get(key).value_or(std::string(fallback));
}

double Config::get_double(std::string_view key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    return text::parse_double(*v, key);
  } catch (const DataError& e) {
    throw InvalidArgument(source_ + ": " + e.what());
  }
}

long long Config::get_int(std::string_view key, long long fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    return text::parse_int(*v, key);
  } catch (const DataError& e) {
    throw InvalidArgument(source_ + ": " + e.what());
  }
}

bool Config::get_bool(std::string_view key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw InvalidArgument(source_ + ": " + std::string(key) + ": expected true or false");
}

std::vector<std::string> Config::get_list(std::string_view key) const {
  const auto v = get(key);
  return v ? text::split_list(*v) : std::vector<std::string>{};
}

std::vector<double> Config::get_double_list(std::string_view key) const {
  std::vector<double> out;
  for (const auto& s : get_list(key)) {
    try {
      out.push_back(text::parse_double(s, key));
    } catch (const DataError& e) {
      throw InvalidArgument(source_ + ": " + e.what());
    }
  }
  return out;
}

void Config::set(std::string key, std::string value) { entries_[std::move(key)] = std::move(value); }

void Config::require_known(const std::vector<std::string>& known,
                           const std::vector<std::string>& known_prefixes) const {
  std::vector<std::string> unknown;
  for (const auto& [k, v] : entries_) {
    (void)v;
    bool ok = std::find(known.begin(), known.end(), k) != known.end();
    for (const auto& p : known_prefixes) ok = ok || k.rfind(p, 0) == 0;
    if (!ok) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    throw InvalidArgument(source_ + ": unknown key(s): " + text::join(unknown, ", "));
  }
}

const std::vector<std::pair<std::string, std::string>>& fit_config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys{
      {"estimator", "jewell | glmc (default glmc)"},
      {"family", "gaussian-identity | tweedie-log (default gaussian-identity)"},
      {"power", "fixed Tweedie power in (1, 2); omit to profile"},
      {"power_grid", "comma-separated powers to profile (default 1.05..1.95 step 0.05)"},
      {"covariates", "comma-separated covariate columns used by glmc"},
      {"tolerance", "glmc convergence tolerance on the random effects (default 1e-8)"},
      {"max_iterations", "glmc iteration cap (default 100)"},
      {"damping", "glmc damping in [0, 1) (default 0)"},
      {"reprofile_at_end", "re-profile the power after convergence (default true)"},
      {"glm_tolerance", "IRLS relative deviance tolerance (default 1e-9)"},
      {"glm_max_iterations", "IRLS iteration cap (default 200)"},
  };
  return keys;
}

const std::vector<std::pair<std::string, std::string>>& simulation_config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys{
      {"seed", "64-bit seed (overridden by --seed)"},
      {"n_industries", "number of industries J (default 5)"},
      {"branches_per_industry", "branches per industry K (default 4)"},
      {"units_per_branch", "units per branch (default 5)"},
      {"periods", "periods T (default 5)"},
      {"exposure_law", "constant | log-uniform (default log-uniform)"},
      {"exposure_low", "constant exposure or lower bound (default 1)"},
      {"exposure_high", "upper bound for log-uniform exposure (default 1000)"},
      {"sigma2_industry", "industry random-effect variance (default 0)"},
      {"sigma2_branch", "branch random-effect variance (default 0)"},
      {"family", "gaussian-identity | tweedie-log"},
      {"power", "Tweedie power (default 1.5)"},
      {"dispersion", "dispersion φ (default 1)"},
      {"intercept", "intercept μ on the link scale (default 0)"},
      {"covariates", "comma-separated covariate names"},
      {"covariate.<name>.levels", "levels of a covariate; the first is the reference"},
      {"covariate.<name>.effects", "link-scale effect per level"},
      {"covariate.<name>.probabilities", "level probabilities (default uniform)"},
  };
  return keys;
}

namespace {

std::vector<std::string> key_names(const std::vector<std::pair<std::string, std::string>>& keys) {
  std::vector<std::string> out;
  for (const auto& [k, d] : keys) {
    (void)d;
    out.push_back(k);
  }
  return out;
}

}  // namespace

FitConfig parse_fit_config(const Config& config) {
  config.require_known(key_names(fit_config_keys()));
  FitConfig fc;
  fc.estimator = parse_estimator(config.get_string("estimator", "glmc"));
  const Family family = parse_family(config.get_string("family", "gaussian-identity"));
  if (config.has("power") && config.has("power_grid")) {
    throw InvalidArgument("config: give either power or power_grid, not both");
  }
  if (family == Family::kGaussianIdentity) {
    if (config.has("power") || config.has("power_grid")) {
      throw InvalidArgument("config: power settings apply to tweedie-log only");
    }
    fc.family = FamilySpec::gaussian();
  } else if (config.has("power")) {
    fc.family = FamilySpec::tweedie(config.get_double("power", 1.5));
  } else if (config.has("power_grid")) {
    fc.family = FamilySpec::tweedie_profiled(config.get_double_list("power_grid"));
  } else {
    fc.family = FamilySpec::tweedie_profiled();
  }
  fc.family.validate();
  fc.covariates = config.get_list("covariates");
  if (fc.estimator == Estimator::kJewell && !fc.covariates.empty()) {
    throw InvalidArgument("config: the jewell estimator takes no covariates");
  }
  fc.glmc.tolerance = config.get_double("tolerance", fc.glmc.tolerance);
  fc.glmc.max_iterations = static_cast<int>(config.get_int("max_iterations", fc.glmc.max_iterations));
  fc.glmc.damping = config.get_double("damping", fc.glmc.damping);
  fc.glmc.reprofile_at_end = config.get_bool("reprofile_at_end", fc.glmc.reprofile_at_end);
  fc.glmc.glm.tolerance = config.get_double("glm_tolerance", fc.glmc.glm.tolerance);
  fc.glmc.glm.max_iterations =
      static_cast<int>(config.get_int("glm_max_iterations", fc.glmc.glm.max_iterations));
  return fc;
}

SimulationSpec parse_simulation_spec(const Config& config) {
  config.require_known(
      {"seed", "n_industries", "branches_per_industry", "units_per_branch", "periods",
       "exposure_law", "exposure_low", "exposure_high", "sigma2_industry", "sigma2_branch",
       "family", "power", "dispersion", "intercept", "covariates"},
      {"covariate."});
  SimulationSpec s;
  auto count = [&](std::string_view key, std::size_t fallback) {
    const long long v = config.get_int(key, static_cast<long long>(fallback));
    if (v < 1) throw InvalidArgument("config: " + std::string(key) + " must be at least 1");
    return static_cast<std::size_t>(v);
  };
  const long long seed = config.get_int("seed", static_cast<long long>(s.seed));
  if (seed < 0) throw InvalidArgument("config: seed must be non-negative");
  s.seed = static_cast<std::uint64_t>(seed);
  s.n_industries = count("n_industries", s.n_industries);
  s.branches_per_industry = count("branches_per_industry", s.branches_per_industry);
  s.units_per_branch = count("units_per_branch", s.units_per_branch);
  s.periods = count("periods", s.periods);
  const std::string law = config.get_string("exposure_law", "log-uniform");
  if (law == "constant") {
    s.exposure_law = ExposureLaw::kConstant;
  } else if (law == "log-uniform") {
    s.exposure_law = ExposureLaw::kLogUniform;
  } else {
    throw InvalidArgument("config: exposure_law must be constant or log-uniform");
  }
  s.exposure_low = config.get_double("exposure_low", s.exposure_low);
  s.exposure_high = config.get_double("exposure_high", s.exposure_high);
  s.sigma2_industry = config.get_double("sigma2_industry", s.sigma2_industry);
  s.sigma2_branch = config.get_double("sigma2_branch", s.sigma2_branch);
  s.family = parse_family(config.get_string("family", "gaussian-identity"));
  s.power = config.get_double("power", s.power);
  s.dispersion = config.get_double("dispersion", s.dispersion);
  s.intercept = config.get_double("intercept", s.intercept);
  for (const auto& name : config.get_list("covariates")) {
    SimCovariate c;
    c.name = name;
    const std::string prefix = "covariate." + name + ".";
    c.levels = config.get_list(prefix + "levels");
    c.effects = config.get_double_list(prefix + "effects");
    c.probabilities = config.get_double_list(prefix + "probabilities");
    if (c.effects.empty()) c.effects.assign(c.levels.size(), 0.0);
    s.covariates.push_back(std::move(c));
  }
  s.validate();
  return s;
}

}  // namespace hierrate
