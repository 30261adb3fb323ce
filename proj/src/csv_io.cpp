#include "hierrate/csv_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hierrate/errors.hpp"
#include "hierrate/text.hpp"

namespace hierrate {

namespace csv {

std::vector<std::string> parse_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? field : std::string(text::trim(field)));
      field.clear();
      was_quoted = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw DataError("unterminated quoted field");
  out.push_back(was_quoted ? field : std::string(text::trim(field)));
  return out;
}

std::string format_field(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos &&
      text::trim(field).size() == field.size()) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += format_field(fields[i]);
  }
  return out;
}

}  // namespace csv

namespace {

std::string located(std::string_view source, std::size_t line, const std::string& msg) {
  return std::string(source) + ":" + std::to_string(line) + ": " + msg;
}

bool read_record_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace

SchemaConfig schema_config_from(const CovariateSchema& schema) {
  std::vector<CovariateDecl> decls;
  for (const auto& c : schema.covariates) decls.push_back({c.name, c.levels});
  return SchemaConfig{std::move(decls)};
}

LoadedPortfolio read_portfolio(std::istream& in, const SchemaConfig& schema,
                               std::optional<Family> family, std::string_view source) {
  LoadedPortfolio out;
  std::string line;
  if (!read_record_line(in, line)) throw DataError(std::string(source) + ": empty file");
  std::vector<std::string> header;
  try {
    header = csv::parse_line(line);
  } catch (const DataError& e) {
    throw DataError(located(source, 1, e.what()));
  }
  std::map<std::string, std::size_t, std::less<>> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!col.emplace(header[i], i).second) {
      throw DataError(located(source, 1, "duplicate column '" + header[i] + "'"));
    }
  }
  std::vector<std::string_view> required(std::begin(kKeyColumns), std::end(kKeyColumns));
  required.push_back("response");
  for (auto name : required) {
    if (!col.count(name)) {
      throw DataError(located(source, 1, "missing required column '" + std::string(name) + "'"));
    }
  }

  std::vector<CovariateDecl> decls;
  if (schema.covariates) {
    decls = *schema.covariates;
    std::set<std::string> declared;
    for (const auto& d : decls) {
      if (!col.count(d.name)) {
        throw DataError(located(source, 1, "missing declared covariate column '" + d.name + "'"));
      }
      declared.insert(d.name);
    }
    for (const auto& h : header) {
      const bool key = std::find(required.begin(), required.end(), h) != required.end();
      if (!key && !declared.count(h)) {
        out.warnings.push_back(std::string(source) + ": ignoring undeclared column '" + h + "'");
      }
    }
  } else {
    for (const auto& h : header) {
      if (std::find(required.begin(), required.end(), h) == required.end()) decls.push_back({h, {}});
    }
  }
  std::vector<std::size_t> cov_col;
  for (const auto& d : decls) cov_col.push_back(col.at(d.name));

  std::vector<Observation> obs;
  std::vector<std::size_t> line_of;
  std::size_t line_no = 1;
  while (read_record_line(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    std::vector<std::string> f;
    try {
      f = csv::parse_line(line);
    } catch (const DataError& e) {
      throw DataError(located(source, line_no, e.what()));
    }
    if (f.size() != header.size()) {
      throw DataError(located(source, line_no, "expected " + std::to_string(header.size()) +
                                                   " fields, got " + std::to_string(f.size())));
    }
    Observation o;
    try {
      o.unit_id = f[col.at("unit_id")];
      o.industry_id = f[col.at("industry_id")];
      o.branch_id = f[col.at("branch_id")];
      o.period = static_cast<int>(text::parse_int(f[col.at("period")], "column 'period'"));
      o.exposure = text::parse_double(f[col.at("exposure")], "column 'exposure'");
      o.response = text::parse_double(f[col.at("response")], "column 'response'");
    } catch (const DataError& e) {
      throw DataError(located(source, line_no, e.what()));
    }
    for (std::size_t c : cov_col) {
      o.covariates.push_back(f[c].empty() ? std::string(kMissingLevel) : f[c]);
    }
    obs.push_back(std::move(o));
    line_of.push_back(line_no);
  }

  CovariateSchema cs;
  for (std::size_t c = 0; c < decls.size(); ++c) {
    std::set<std::string> seen;
    for (const auto& o : obs) seen.insert(o.covariates[c]);
    std::vector<std::string> levels = decls[c].levels;
    if (levels.empty()) {
      levels.assign(seen.begin(), seen.end());
      if (levels.empty()) levels.emplace_back(kMissingLevel);
    } else if (seen.count(std::string(kMissingLevel)) &&
               std::find(levels.begin(), levels.end(), kMissingLevel) == levels.end()) {
      levels.emplace_back(kMissingLevel);  // missing values are always admissible
    }
    try {
      cs.covariates.push_back(CovariateSpec::make(decls[c].name, std::move(levels)));
    } catch (const InvalidArgument& e) {
      throw DataError(std::string(source) + ": " + e.what());
    }
  }

  out.portfolio = Portfolio(std::move(obs), std::move(cs));
  const auto violations = validate_portfolio(out.portfolio, family);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << source << ": " << violations.size() << " validation failure(s)";
    constexpr std::size_t kShown = 20;
    for (std::size_t v = 0; v < std::min(kShown, violations.size()); ++v) {
      const auto& viol = violations[v];
      msg << "\n  ";
      if (viol.record != Violation::npos) msg << "line " << line_of[viol.record] << ": ";
      msg << "[" << viol.rule << "] " << viol.message;
    }
    if (violations.size() > kShown) msg << "\n  ...";
    throw DataError(msg.str());
  }
  return out;
}

LoadedPortfolio load_portfolio(const std::filesystem::path& path, const SchemaConfig& schema,
                               std::optional<Family> family) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_portfolio(in, schema, family, path.string());
}

void write_portfolio(std::ostream& out, const Portfolio& portfolio) {
  std::vector<std::string> header(std::begin(kKeyColumns), std::end(kKeyColumns));
  header.emplace_back("response");
  for (const auto& c : portfolio.schema().covariates) header.push_back(c.name);
  out << csv::format_row(header) << "\n";
  for (const auto& o : portfolio.observations()) {
    std::vector<std::string> row{o.unit_id,
                                 o.industry_id,
                                 o.branch_id,
                                 std::to_string(o.period),
                                 text::format_double(o.exposure),
                                 text::format_double(o.response)};
    row.insert(row.end(), o.covariates.begin(), o.covariates.end());
    out << csv::format_row(row) << "\n";
  }
}

void write_ground_truth(std::ostream& out, const Simulation& sim) {
  out << "format = hierrate-truth/1\n";
  out << "\n[industry_effects]\nindustry_id,u\n";
  for (const auto& [id, u] : sim.truth.u_industry) {
    out << csv::format_row({id, text::format_double(u)}) << "\n";
  }
  out << "\n[branch_effects]\nindustry_id,branch_id,u\n";
  for (const auto& [key, u] : sim.truth.u_branch) {
    out << csv::format_row({key.first, key.second, text::format_double(u)}) << "\n";
  }
  out << "\n[records]\nrecord,true_mean\n";
  for (std::size_t i = 0; i < sim.truth.true_mean.size(); ++i) {
    out << i << "," << text::format_double(sim.truth.true_mean[i]) << "\n";
  }
}

void write_predictions(std::ostream& out, const Portfolio& portfolio,
                       std::span<const double> predictions) {
  if (predictions.size() != portfolio.size()) {
    throw InvalidArgument("write_predictions: one prediction per record required");
  }
  out << "unit_id,industry_id,branch_id,period,prediction\n";
  for (std::size_t i = 0; i < portfolio.size(); ++i) {
    const auto& o = portfolio.observations()[i];
    out << csv::format_row({o.unit_id, o.industry_id, o.branch_id, std::to_string(o.period),
                            text::format_double(predictions[i])})
        << "\n";
  }
}

std::vector<double> read_predictions(const std::filesystem::path& path,
                                     const Portfolio& portfolio) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  const std::string source = path.string();
  std::string line;
  if (!read_record_line(in, line)) throw DataError(source + ": empty file");
  const auto header = csv::parse_line(line);
  const std::vector<std::string> expected{"unit_id", "industry_id", "branch_id", "period",
                                          "prediction"};
  if (header != expected) {
    throw DataError(located(source, 1, "expected header " + text::join(expected, ",")));
  }
  std::vector<double> out;
  std::size_t line_no = 1;
  while (read_record_line(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto f = csv::parse_line(line);
    if (f.size() != expected.size()) {
      throw DataError(located(source, line_no, "expected 5 fields"));
    }
    const std::size_t i = out.size();
    if (i >= portfolio.size()) {
      throw DataError(located(source, line_no, "more predictions than portfolio records"));
    }
    const auto& o = portfolio.observations()[i];
    if (f[0] != o.unit_id || f[1] != o.industry_id || f[2] != o.branch_id ||
        f[3] != std::to_string(o.period)) {
      throw DataError(located(source, line_no, "row does not match portfolio record " +
                                                   std::to_string(i) + " (unit " + o.unit_id +
                                                   ", period " + std::to_string(o.period) + ")"));
    }
    try {
      out.push_back(text::parse_double(f[4], "column 'prediction'"));
    } catch (const DataError& e) {
      throw DataError(located(source, line_no, e.what()));
    }
  }
  if (out.size() != portfolio.size()) {
    throw DataError(source + ": " + std::to_string(out.size()) + " predictions for " +
                    std::to_string(portfolio.size()) + " portfolio records");
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    try {
      writer(out);
    } catch (...) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw;
    }
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw DataError("write to '" + tmp.string() + "' failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot rename into '" + path.string() + "'");
  }
}

}  // namespace hierrate
