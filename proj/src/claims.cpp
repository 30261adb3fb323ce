#include "hierrate/claims.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "hierrate/csv_io.hpp"
#include "hierrate/errors.hpp"
#include "hierrate/numeric.hpp"
#include "hierrate/text.hpp"

namespace hierrate {

void CapConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("cap: tau must be positive");
  for (const auto& [t, c] : correction_factors) {
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw InvalidArgument("cap: correction factor for period " + std::to_string(t) +
                            " must be positive");
    }
  }
}

std::vector<double> cap_claims(std::span<const RawClaimRecord> records, const CapConfig& cap) {
  cap.validate();
  std::vector<double> out(records.size());
  CompensatedSum total, excess;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!(r.claim_amount >= 0.0) || !std::isfinite(r.claim_amount)) {
      throw DataError("claim " + std::to_string(i) + ": claim amount must be non-negative");
    }
    const auto c = cap.correction_factors.find(r.period);
    if (c == cap.correction_factors.end()) {
      throw DataError("no correction factor for period " + std::to_string(r.period));
    }
    const double threshold = cap.tau * c->second;
    out[i] = std::min(r.claim_amount, threshold);
    total.add(r.claim_amount);
    excess.add(r.claim_amount - out[i]);
  }
  if (cap.redistribute && excess.value() > 0.0) {
    if (!(total.value() > 0.0)) {
      throw DataError("cannot redistribute capped excess: total claim cost is zero");
    }
    const double e = excess.value();
    const double t = total.value();
    for (std::size_t i = 0; i < records.size(); ++i) {
      out[i] += e * (records[i].claim_amount / t);
    }
  }
  return out;
}

AggregationResult cap_and_aggregate(const ClaimTable& claims, const CapConfig& cap,
                                    Grouping grouping) {
  const auto& recs = claims.records;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (!(recs[i].exposure > 0.0) || !std::isfinite(recs[i].exposure)) {
      throw DataError("claim " + std::to_string(i) + ": exposure must be positive");
    }
    if (recs[i].covariates.size() != claims.covariate_names.size()) {
      throw DataError("claim " + std::to_string(i) + ": wrong number of covariate values");
    }
  }
  const std::vector<double> final_amount = cap_claims(recs, cap);

  AggregationResult result;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto it = cap.correction_factors.find(recs[i].period);
    if (recs[i].claim_amount > cap.tau * it->second) {
      ++result.capped_claims;
      result.total_excess += recs[i].claim_amount - cap.tau * it->second;
    }
  }

  struct Group {
    std::string unit_id;
    std::vector<std::string> covariates;
    std::map<std::string, double> unit_exposure;
    CompensatedSum amount;
  };
  // Key: industry, branch, period, then unit id or the covariate profile.
  using Key = std::tuple<std::string, std::string, int, std::vector<std::string>>;
  std::map<Key, Group> groups;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    std::vector<std::string> covs;
    for (const auto& v : r.covariates) covs.push_back(v.empty() ? std::string(kMissingLevel) : v);
    Key key{r.industry_id, r.branch_id, r.period,
            grouping == Grouping::kUnit ? std::vector<std::string>{r.unit_id} : covs};
    auto [it, fresh] = groups.try_emplace(key);
    Group& g = it->second;
    if (fresh) {
      g.covariates = covs;
      g.unit_id = grouping == Grouping::kUnit
                      ? r.unit_id
                      : (covs.empty() ? std::string("all") : "class:" + text::join(covs, "|"));
    } else if (grouping == Grouping::kUnit && g.covariates != covs) {
      throw DataError("claim " + std::to_string(i) + ": covariates of unit '" + r.unit_id +
                      "' differ within period " + std::to_string(r.period));
    }
    auto [ue, new_unit] = g.unit_exposure.try_emplace(r.unit_id, r.exposure);
    if (!new_unit && ue->second != r.exposure) {
      throw DataError("claim " + std::to_string(i) + ": exposure of unit '" + r.unit_id +
                      "' differs within period " + std::to_string(r.period));
    }
    g.amount.add(final_amount[i]);
  }

  CovariateSchema schema;
  for (std::size_t c = 0; c < claims.covariate_names.size(); ++c) {
    std::set<std::string> levels;
    for (const auto& [key, g] : groups) levels.insert(g.covariates[c]);
    if (levels.empty()) levels.insert(std::string(kMissingLevel));
    schema.covariates.push_back(CovariateSpec::make(
        claims.covariate_names[c], std::vector<std::string>(levels.begin(), levels.end())));
  }
  std::vector<Observation> obs;
  obs.reserve(groups.size());
  for (auto& [key, g] : groups) {
    CompensatedSum w;
    for (const auto& [unit, e] : g.unit_exposure) w.add(e);
    Observation o;
    o.unit_id = g.unit_id;
    o.industry_id = std::get<0>(key);
    o.branch_id = std::get<1>(key);
    o.period = std::get<2>(key);
    o.exposure = w.value();
    o.response = g.amount.value() / o.exposure;
    o.covariates = g.covariates;
    obs.push_back(std::move(o));
  }
  result.portfolio = Portfolio(std::move(obs), std::move(schema));
  return result;
}

ClaimTable read_claims(std::istream& in, std::string_view source) {
  auto where = [&](std::size_t line) { return std::string(source) + ":" + std::to_string(line) + ": "; };
  std::string line;
  if (!std::getline(in, line)) throw DataError(std::string(source) + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = csv::parse_line(line);
  std::vector<std::string> required(std::begin(kKeyColumns), std::end(kKeyColumns));
  required.emplace_back("claim_amount");
  std::vector<std::size_t> key_col;
  for (const auto& name : required) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(where(1) + "missing required column '" + name + "'");
    key_col.push_back(static_cast<std::size_t>(it - header.begin()));
  }
  ClaimTable table;
  std::vector<std::size_t> cov_col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (std::find(required.begin(), required.end(), header[i]) == required.end()) {
      table.covariate_names.push_back(header[i]);
      cov_col.push_back(i);
    }
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    try {
      const auto f = csv::parse_line(line);
      if (f.size() != header.size()) {
        throw DataError("expected " + std::to_string(header.size()) + " fields, got " +
                        std::to_string(f.size()));
      }
      RawClaimRecord r;
      r.unit_id = f[key_col[0]];
      r.industry_id = f[key_col[1]];
      r.branch_id = f[key_col[2]];
      r.period = static_cast<int>(text::parse_int(f[key_col[3]], "column 'period'"));
      r.exposure = text::parse_double(f[key_col[4]], "column 'exposure'");
      r.claim_amount = text::parse_double(f[key_col[5]], "column 'claim_amount'");
      if (!(r.exposure > 0.0)) throw DataError("exposure must be positive");
      if (!(r.claim_amount >= 0.0)) throw DataError("claim_amount must be non-negative");
      for (std::size_t c : cov_col) r.covariates.push_back(f[c]);
      table.records.push_back(std::move(r));
    } catch (const DataError& e) {
      throw DataError(where(line_no) + e.what());
    }
  }
  return table;
}

ClaimTable load_claims(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_claims(in, path.string());
}

}  // namespace hierrate
