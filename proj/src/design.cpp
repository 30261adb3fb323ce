#include "hierrate/design.hpp"

#include <algorithm>
#include <set>

#include "hierrate/errors.hpp"

namespace hierrate {

Eigen::RowVectorXd DesignEncoding::encode(const CovariateValues& values) const {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(cols()));
  row(0) = 1.0;
  for (const auto& cov : covariates) {
    auto it = values.find(cov.name);
    if (it == values.end()) continue;
    auto lv = std::find(cov.levels.begin(), cov.levels.end(), it->second);
    if (lv == cov.levels.end()) {
      throw InvalidArgument("unknown level '" + it->second + "' for covariate '" + cov.name + "'");
    }
    const auto li = static_cast<std::size_t>(lv - cov.levels.begin());
    if (li > 0) row(static_cast<Eigen::Index>(cov.first_column + li - 1)) = 1.0;
  }
  return row;
}

CovariateValues DesignEncoding::decode(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  CovariateValues out;
  for (const auto& cov : covariates) {
    std::string level = cov.levels.front();
    for (std::size_t l = 1; l < cov.levels.size(); ++l) {
      if (row(static_cast<Eigen::Index>(cov.first_column + l - 1)) == 1.0) level = cov.levels[l];
    }
    out.emplace(cov.name, std::move(level));
  }
  return out;
}

DesignMatrix build_design(const Portfolio& portfolio, std::span<const std::string> selection) {
  const auto& schema = portfolio.schema();
  std::set<std::size_t> chosen;
  for (const auto& name : selection) {
    const auto c = schema.find(name);
    if (!c) throw InvalidArgument("unknown covariate '" + name + "'");
    chosen.insert(*c);
  }

  DesignMatrix d;
  d.encoding.column_names.emplace_back(kInterceptName);
  for (std::size_t c : chosen) {  // std::set iterates in schema order
    const auto& spec = schema.covariates[c];
    std::set<std::string> observed;
    for (const auto& o : portfolio.observations()) observed.insert(o.covariates.at(c));
    if (observed.size() < 2) {
      throw DataError("covariate '" + spec.name + "' has fewer than 2 observed levels");
    }
    EncodedCovariate enc{spec.name, spec.levels, d.encoding.column_names.size()};
    for (std::size_t l = 1; l < spec.levels.size(); ++l) {
      d.encoding.column_names.push_back(spec.name + ":" + spec.levels[l]);
    }
    d.encoding.covariates.push_back(std::move(enc));
  }
  d.x = encode_portfolio(d.encoding, portfolio);
  return d;
}

Eigen::MatrixXd encode_portfolio(const DesignEncoding& encoding, const Portfolio& portfolio) {
  const auto& schema = portfolio.schema();
  const auto n = static_cast<Eigen::Index>(portfolio.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(encoding.cols()));
  x.col(0).setOnes();
  for (const auto& cov : encoding.covariates) {
    const auto c = schema.find(cov.name);
    if (!c) throw DataError("portfolio lacks covariate '" + cov.name + "'");
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& value = portfolio.observations()[static_cast<std::size_t>(i)].covariates.at(*c);
      auto lv = std::find(cov.levels.begin(), cov.levels.end(), value);
      if (lv == cov.levels.end()) {
        throw DataError("record " + std::to_string(i) + ": level '" + value +
                        "' not in encoding of '" + cov.name + "'");
      }
      const auto li = static_cast<std::size_t>(lv - cov.levels.begin());
      if (li > 0) x(i, static_cast<Eigen::Index>(cov.first_column + li - 1)) = 1.0;
    }
  }
  return x;
}

}  // namespace hierrate
