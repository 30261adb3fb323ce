#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hierrate {

enum class Family { kGaussianIdentity, kTweedieLog };

std::string_view to_string(Family f) noexcept;
/// Accepts "gaussian-identity"/"gaussian" and "tweedie-log"/"tweedie".
Family parse_family(std::string_view s);

/// Power parameters {1.05, 1.10, ..., 1.95}.
std::vector<double> default_power_grid();

/// Model family plus either a fixed Tweedie power or a grid to profile over.
/// Gaussian-identity always carries p = 0.
struct FamilySpec {
  Family family = Family::kGaussianIdentity;
  std::vector<double> power_grid;  // singleton => fixed power

  static FamilySpec gaussian() { return {Family::kGaussianIdentity, {0.0}}; }
  static FamilySpec tweedie(double p) { return {Family::kTweedieLog, {p}}; }
  static FamilySpec tweedie_profiled(std::vector<double> grid = default_power_grid()) {
    return {Family::kTweedieLog, std::move(grid)};
  }

  [[nodiscard]] bool is_tweedie() const noexcept { return family == Family::kTweedieLog; }
  [[nodiscard]] bool power_fixed() const noexcept { return power_grid.size() == 1; }
  [[nodiscard]] double power() const;

  /// Throws InvalidArgument unless every Tweedie power lies in (1, 2).
  void validate() const;
};

}  // namespace hierrate
