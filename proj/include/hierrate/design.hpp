#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hierrate/portfolio.hpp"

namespace hierrate {

inline constexpr const char* kInterceptName = "(Intercept)";

using CovariateValues = std::map<std::string, std::string, std::less<>>;

struct EncodedCovariate {
  std::string name;
  std::vector<std::string> levels;  // levels.front() is the reference
  std::size_t first_column = 0;     // column of levels[1]
};

/// Column layout of a dummy-coded design: intercept, then one column per
/// non-reference level, covariates in schema order.
struct DesignEncoding {
  std::vector<std::string> column_names;
  std::vector<EncodedCovariate> covariates;

  [[nodiscard]] std::size_t cols() const noexcept { return column_names.size(); }
  /// Row for a single covariate profile. Unknown levels raise InvalidArgument;
  /// covariates absent from `values` take their reference level.
  [[nodiscard]] Eigen::RowVectorXd encode(const CovariateValues& values) const;
  /// Inverse of encode: level per encoded covariate for a 0/1 row.
  [[nodiscard]] CovariateValues decode(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

struct DesignMatrix {
  Eigen::MatrixXd x;  // one row per observation, portfolio order
  DesignEncoding encoding;

  [[nodiscard]] std::size_t rows() const noexcept { return static_cast<std::size_t>(x.rows()); }
  [[nodiscard]] std::size_t cols() const noexcept { return static_cast<std::size_t>(x.cols()); }
  [[nodiscard]] const std::vector<std::string>& column_names() const noexcept {
    return encoding.column_names;
  }
};

/// Dummy-codes the selected covariates. Selection order does not matter;
/// columns follow schema order then level order.
DesignMatrix build_design(const Portfolio& portfolio, std::span<const std::string> selection);

/// Encodes another portfolio with an existing layout (e.g. a holdout set).
Eigen::MatrixXd encode_portfolio(const DesignEncoding& encoding, const Portfolio& portfolio);

}  // namespace hierrate
