#include "hierrate/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "hierrate/errors.hpp"
#include "hierrate/numeric.hpp"

namespace hierrate {

double weighted_wcss(std::span<const double> values, std::span<const double> weights,
                     std::span<const std::size_t> labels) {
  std::map<std::size_t, std::pair<CompensatedSum, CompensatedSum>> groups;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& g = groups[labels[i]];
    g.first.add(weights[i]);
    g.second.add(weights[i] * values[i]);
  }
  CompensatedSum ss;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& g = groups[labels[i]];
    const double c = g.second.value() / g.first.value();
    ss.add(weights[i] * (values[i] - c) * (values[i] - c));
  }
  return ss.value();
}

Clustering cluster_1d(std::span<const double> values, std::span<const double> weights,
                      std::size_t k) {
  if (values.size() != weights.size()) throw InvalidArgument("cluster_1d: length mismatch");
  if (values.empty()) throw InvalidArgument("cluster_1d: no values");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw InvalidArgument("cluster_1d: non-finite value");
    if (!(weights[i] > 0.0)) throw InvalidArgument("cluster_1d: weights must be positive");
  }

  // Collapse equal values into weighted atoms, ascending.
  std::map<double, double> atoms_map;
  for (std::size_t i = 0; i < values.size(); ++i) atoms_map[values[i]] += weights[i];
  std::vector<double> x, w;
  for (const auto& [v, wt] : atoms_map) {
    x.push_back(v);
    w.push_back(wt);
  }
  const std::size_t m = x.size();
  if (k < 1 || k > m) {
    throw InvalidArgument("cluster_1d: k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(m) + "] distinct values");
  }

  // Prefix sums on values shifted by their weighted mean for conditioning.
  double shift = 0.0;
  {
    CompensatedSum sw, swx;
    for (std::size_t i = 0; i < m; ++i) {
      sw.add(w[i]);
      swx.add(w[i] * x[i]);
    }
    shift = swx.value() / sw.value();
  }
  std::vector<double> s0(m + 1, 0.0), s1(m + 1, 0.0), s2(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double d = x[i] - shift;
    s0[i + 1] = s0[i] + w[i];
    s1[i + 1] = s1[i] + w[i] * d;
    s2[i + 1] = s2[i] + w[i] * d * d;
  }
  // Cost of atoms [a, b] (inclusive).
  auto cost = [&](std::size_t a, std::size_t b) {
    const double sw = s0[b + 1] - s0[a];
    const double sx = s1[b + 1] - s1[a];
    const double sxx = s2[b + 1] - s2[a];
    return std::max(0.0, sxx - sx * sx / sw);
  };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // best[c][i]: optimal cost of atoms [0, i] in c+1 clusters; start[c][i]: first atom of last cluster.
  std::vector<std::vector<double>> best(k, std::vector<double>(m, kInf));
  std::vector<std::vector<std::size_t>> start(k, std::vector<std::size_t>(m, 0));
  for (std::size_t i = 0; i < m; ++i) best[0][i] = cost(0, i);
  for (std::size_t c = 1; c < k; ++c) {
    for (std::size_t i = c; i < m; ++i) {
      for (std::size_t j = c; j <= i; ++j) {
        const double v = best[c - 1][j - 1] + cost(j, i);
        if (v < best[c][i]) {
          best[c][i] = v;
          start[c][i] = j;
        }
      }
    }
  }

  std::vector<std::size_t> atom_label(m);
  std::size_t end = m - 1;
  for (std::size_t c = k; c-- > 0;) {
    const std::size_t s = c == 0 ? 0 : start[c][end];
    for (std::size_t a = s; a <= end; ++a) atom_label[a] = c;
    if (c > 0) end = s - 1;
  }

  Clustering out;
  out.labels.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto pos = static_cast<std::size_t>(
        std::lower_bound(x.begin(), x.end(), values[i]) - x.begin());
    out.labels[i] = atom_label[pos];
  }
  out.centers.assign(k, 0.0);
  std::vector<CompensatedSum> cw(k), cwx(k);
  for (std::size_t a = 0; a < m; ++a) {
    cw[atom_label[a]].add(w[a]);
    cwx[atom_label[a]].add(w[a] * x[a]);
  }
  for (std::size_t c = 0; c < k; ++c) out.centers[c] = cwx[c].value() / cw[c].value();
  out.wcss = weighted_wcss(values, weights, out.labels);
  return out;
}

}  // namespace hierrate
