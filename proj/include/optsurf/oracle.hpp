#pragma once

// Naive evaluation and exhaustive minimization of the multi-surface energy.
// Deliberately independent of the graph construction; used to certify that
// minimum cuts are globally optimal on small instances.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "optsurf/core.hpp"

namespace optsurf::oracle {

using Labeling = std::vector<std::vector<int>>;  // [surface][column]

inline void check_labels(const Problem& p, const Labeling& labels) {
  if (labels.size() != p.surface_count()) fail(ErrorCode::LabelOutOfRange, "labeling has the wrong surface count");
  for (const auto& s : labels) {
    if (s.size() != p.column_count()) fail(ErrorCode::LabelOutOfRange, "labeling has the wrong column count");
    for (int l : s)
      if (l < 0 || static_cast<std::size_t>(l) >= p.levels())
        fail(ErrorCode::LabelOutOfRange, "label " + std::to_string(l) + " outside [0, Z-1]");
  }
}

inline bool is_feasible(const Problem& p, const Labeling& labels) {
  for (std::size_t i = 0; i + 1 < p.surface_count(); ++i)
    for (std::size_t a = 0; a < p.column_count(); ++a) {
      const auto& m = p.mappings[a];
      if (m[labels[i + 1][a]] - m[labels[i][a]] < p.separation.min_gap[i]) return false;
    }
  return true;
}

/// Data part of the energy only.
inline double data_energy(const Problem& p, const Labeling& labels) {
  const Dims& d = p.dims();
  double e = 0.0;
  for (std::size_t i = 0; i < p.surface_count(); ++i)
    for (std::size_t x = 0; x < d.x; ++x)
      for (std::size_t y = 0; y < d.y; ++y)
        e += p.costs[i](x, y, static_cast<std::size_t>(labels[i][column_index(d, x, y)]));
  return e;
}

inline double smoothness_energy(const Problem& p, const Labeling& labels,
                                const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  double e = 0.0;
  for (std::size_t i = 0; i < p.surface_count(); ++i)
    for (const auto& [a, b] : pairs)
      e += p.penalties[i](p.mappings[a][labels[i][a]] - p.mappings[b][labels[i][b]]);
  return e;
}

inline double smoothness_energy(const Problem& p, const Labeling& labels) {
  return smoothness_energy(p, labels, neighbor_pairs(p.dims()));
}

/// Total energy, or nullopt when a separation constraint is violated.
inline std::optional<double> energy(const Problem& p, const Labeling& labels) {
  check_labels(p, labels);
  if (!is_feasible(p, labels)) return std::nullopt;
  return data_energy(p, labels) + smoothness_energy(p, labels);
}

struct Minimum {
  Labeling labels;
  double energy = 0.0;
};

inline constexpr double kMaxSearchSpace = 1e7;

/// Enumerates every labeling; ties go to the lexicographically smallest one
/// (surface-major, then column order).
inline Minimum brute_force_minimize(const Problem& p) {
  p.validate();
  const std::size_t n_vars = p.surface_count() * p.column_count();
  const std::size_t z = p.levels();
  if (std::pow(static_cast<double>(z), static_cast<double>(n_vars)) > kMaxSearchSpace)
    fail(ErrorCode::SearchSpaceTooLarge, "Z^(surfaces*columns) exceeds 1e7");

  const auto pairs = neighbor_pairs(p.dims());
  Labeling cur(p.surface_count(), std::vector<int>(p.column_count(), 0));
  std::optional<Minimum> best;
  while (true) {
    if (is_feasible(p, cur)) {
      const double e = data_energy(p, cur) + smoothness_energy(p, cur, pairs);
      if (!best || e < best->energy) best = Minimum{cur, e};
    }
    // Odometer increment with the last variable fastest -> lexicographic order.
    std::size_t k = n_vars;
    while (k > 0) {
      --k;
      int& v = cur[k / p.column_count()][k % p.column_count()];
      if (static_cast<std::size_t>(++v) < z) break;
      v = 0;
      if (k == 0) {
        k = n_vars + 1;
        break;
      }
    }
    if (k == n_vars + 1) break;
  }
  if (!best) fail(ErrorCode::Infeasible, "no labeling satisfies the separation constraints");
  return *best;
}

}  // namespace optsurf::oracle
