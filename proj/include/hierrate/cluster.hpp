#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hierrate {

struct Clustering {
  std::vector<std::size_t> labels;  // per input value; 0 = lowest center
  std::vector<double> centers;      // weighted means, ascending
  double wcss = 0.0;                // weighted within-cluster sum of squares
};

/// Optimal weighted k-means in one dimension by dynamic programming over the
/// sorted values (globally optimal, not a local search). Equal values always
/// share a cluster. Requires 1 <= k <= number of distinct values.
Clustering cluster_1d(std::span<const double> values, std::span<const double> weights,
                      std::size_t k);

/// Σ w (x − center(label))² with centers recomputed from the assignment.
double weighted_wcss(std::span<const double> values, std::span<const double> weights,
                     std::span<const std::size_t> labels);

}  // namespace hierrate
