#pragma once

// Construction of the s-t graph whose minimum cut yields the optimal set of
// surfaces: intra-column data/monotonicity arcs, inter-column arcs encoding
// the convex smoothness prior between irregularly sampled columns, and
// inter-surface arcs encoding the minimum separation.

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "optsurf/core.hpp"
#include "optsurf/cost.hpp"

namespace optsurf {

using Capacity = std::int64_t;

enum class ArcKind : std::uint8_t { Source, Data, Monotone, InterColumn, InterSurface };

/// Node n_i(a, z) lives at 2 + (i * columns + a) * levels + z; 0 is s, 1 is t.
struct NodeIndex {
  static constexpr std::size_t source = 0;
  static constexpr std::size_t sink = 1;

  std::size_t surfaces = 1;
  std::size_t columns = 1;
  std::size_t levels = 1;

  std::size_t operator()(std::size_t surface, std::size_t column, std::size_t level) const noexcept {
    return 2 + (surface * columns + column) * levels + level;
  }
  std::size_t node_count() const noexcept { return 2 + surfaces * columns * levels; }
};

/// Arc with a real weight prior to quantization; `infinite` marks sentinel arcs.
struct RealArc {
  std::size_t from = 0;
  std::size_t to = 0;
  double weight = 0.0;
  bool infinite = false;
  ArcKind kind = ArcKind::Data;
};

struct Arc {
  std::size_t from = 0;
  std::size_t to = 0;
  Capacity capacity = 0;
  ArcKind kind = ArcKind::Data;
};

/// Fixed-point multiplier from real weights to integer capacities.
struct CapacityScale {
  Capacity scale = Capacity{1} << 16;
};

// Finite capacities must sum below this so that residual capacities (at most
// twice the sentinel) and accumulated flow never overflow.
inline constexpr Capacity kMaxFiniteTotal = std::numeric_limits<Capacity>::max() / 8;

struct GraphSpec {
  std::size_t node_count = 2;
  std::vector<Arc> arcs;
  Capacity sentinel = 1;
  NodeIndex index;
  Capacity scale = 1;
  // Added to flow / scale to recover the energy on the un-normalized costs.
  double energy_offset = 0.0;
};

/// round-half-even(energy * scale).
inline Capacity quantize_energy(double energy, CapacityScale scale) {
  if (!std::isfinite(energy)) fail(ErrorCode::NonFiniteValue, "energy is not finite");
  const double scaled = energy * static_cast<double>(scale.scale);
  if (!(std::abs(scaled) < static_cast<double>(kMaxFiniteTotal)))
    fail(ErrorCode::CapacityOverflow, "scaled value " + std::to_string(scaled) + " exceeds the capacity range");
  double r = std::round(scaled);
  if (std::abs(scaled - std::trunc(scaled)) == 0.5 && std::fmod(r, 2.0) != 0.0) r -= std::copysign(1.0, scaled);
  return static_cast<Capacity>(r);
}

/// Weight of the arc n(a,k1) -> n(b,k2), with k2 == Z denoting the arc to t.
/// Terms that reference L_a(-1) or L_b(Z) vanish.
inline double inter_column_weight(const ConvexPenalty& psi, const ColumnMapping& la, const ColumnMapping& lb,
                                  std::size_t k1, std::size_t k2) {
  const std::size_t z = la.size();
  if (lb.size() != z) fail(ErrorCode::DimMismatch, "neighbouring mappings differ in length");
  if (k1 >= z || k2 < 1 || k2 > z)
    fail(ErrorCode::IndexOutOfRange, "k1=" + std::to_string(k1) + " k2=" + std::to_string(k2) +
                                         " outside [0," + std::to_string(z - 1) + "]x[1," + std::to_string(z) + "]");
  auto f = [&](std::size_t i, bool i_valid, std::size_t j) {
    if (!i_valid || j >= z) return 0.0;
    return eval_f(psi, la[i], lb[j]);
  };
  const bool has_prev = k1 > 0;
  return f(k1, true, k2 - 1) - f(k1 - 1, has_prev, k2 - 1) - f(k1, true, k2) + f(k1 - 1, has_prev, k2);
}

/// Monotonicity and data arcs of one column. costs[z] = D_i(L_a(z)) >= 0.
inline std::vector<RealArc> build_intra_column_arcs(std::span<const double> costs, std::size_t surface,
                                                    std::size_t column, const NodeIndex& index) {
  const std::size_t z_count = costs.size();
  if (z_count == 0) fail(ErrorCode::InvalidArgument, "column has no levels");
  std::vector<RealArc> arcs;
  arcs.reserve(2 * z_count);
  arcs.push_back({NodeIndex::source, index(surface, column, 0), 0.0, true, ArcKind::Source});
  for (std::size_t z = 0; z < z_count; ++z) {
    if (!(costs[z] >= 0.0) || !std::isfinite(costs[z]))
      fail(ErrorCode::NegativeDataCost, "data cost at level " + std::to_string(z) + " is negative or not finite");
  }
  for (std::size_t z = 1; z < z_count; ++z) {
    arcs.push_back({index(surface, column, z), index(surface, column, z - 1), 0.0, true, ArcKind::Monotone});
    arcs.push_back({index(surface, column, z - 1), index(surface, column, z), costs[z - 1], false, ArcKind::Data});
  }
  arcs.push_back({index(surface, column, z_count - 1), NodeIndex::sink, costs[z_count - 1], false, ArcKind::Data});
  return arcs;
}

/// Convex-prior arcs between neighbouring columns a and b, both directions.
/// Arcs whose weight is not strictly positive are omitted.
inline std::vector<RealArc> build_inter_column_arcs(const ConvexPenalty& psi, const ColumnMapping& la,
                                                    const ColumnMapping& lb, std::size_t surface, std::size_t a,
                                                    std::size_t b, const NodeIndex& index) {
  const std::size_t z = la.size();
  std::vector<RealArc> arcs;
  auto one_direction = [&](const ColumnMapping& from_map, const ColumnMapping& to_map, std::size_t from,
                           std::size_t to) {
    for (std::size_t k1 = 0; k1 < z; ++k1) {
      for (std::size_t k2 = 1; k2 <= z; ++k2) {
        const double w = inter_column_weight(psi, from_map, to_map, k1, k2);
        if (!(w > 0.0)) continue;
        const std::size_t head = k2 == z ? NodeIndex::sink : index(surface, to, k2);
        arcs.push_back({index(surface, from, k1), head, w, false, ArcKind::InterColumn});
      }
    }
  };
  one_direction(la, lb, a, b);
  one_direction(lb, la, b, a);
  return arcs;
}

/// Sentinel arcs from column a of surface i to the same column of surface i+1
/// enforcing L_a(S_{i+1}(a)) - L_a(S_i(a)) >= d.
inline std::vector<RealArc> build_inter_surface_arcs(const ColumnMapping& la, double d, std::size_t surface,
                                                     std::size_t column, const NodeIndex& index) {
  if (!(d >= 0.0)) fail(ErrorCode::InvalidArgument, "separation must be >= 0");
  const std::size_t z_count = la.size();
  std::vector<RealArc> arcs;
  arcs.reserve(z_count);
  std::size_t target = 0;
  for (std::size_t z = 0; z < z_count; ++z) {
    target = std::max(target, z);
    while (target < z_count && la[target] - la[z] < d) ++target;
    const std::size_t head = target < z_count ? index(surface + 1, column, target) : NodeIndex::sink;
    arcs.push_back({index(surface, column, z), head, 0.0, true, ArcKind::InterSurface});
  }
  return arcs;
}

/// Quantizes real arcs and fixes the sentinel once every finite arc is known.
inline GraphSpec quantize_graph(const std::vector<RealArc>& real, const NodeIndex& index, CapacityScale scale,
                                double energy_offset) {
  if (scale.scale < 1) fail(ErrorCode::InvalidArgument, "capacity scale must be >= 1");
  GraphSpec g;
  g.index = index;
  g.node_count = index.node_count();
  g.scale = scale.scale;
  g.energy_offset = energy_offset;
  g.arcs.reserve(real.size());
  Capacity total = 0;
  for (const RealArc& r : real) {
    if (r.from == r.to) fail(ErrorCode::InternalInconsistency, "self arc");
    if (r.infinite) {
      g.arcs.push_back({r.from, r.to, 0, r.kind});
      continue;
    }
    if (!std::isfinite(r.weight)) fail(ErrorCode::NonFiniteValue, "arc weight is not finite");
    Capacity c = quantize_energy(r.weight, scale);
    if (c <= 0) {
      // Zero-cost data arcs stay so every column keeps its full chain.
      if (r.kind != ArcKind::Data) continue;
      c = 0;
    }
    if (__builtin_add_overflow(total, c, &total) || total >= kMaxFiniteTotal)
      fail(ErrorCode::CapacityOverflow, "sum of scaled capacities overflows; lower the scale");
    g.arcs.push_back({r.from, r.to, c, r.kind});
  }
  g.sentinel = total + 1;
  for (Arc& a : g.arcs)
    if (a.kind == ArcKind::Source || a.kind == ArcKind::Monotone || a.kind == ArcKind::InterSurface)
      a.capacity = g.sentinel;
  return g;
}

/// All real-weighted arcs of a problem, ordered surface by surface: intra
/// arcs per column, inter-column arcs per neighbour pair, then the arcs to
/// the next surface. Costs must already be nonnegative.
inline std::vector<RealArc> build_real_arcs(const Problem& problem, std::span<const Volume> costs) {
  const Dims& d = problem.dims();
  const NodeIndex index{problem.surface_count(), d.columns(), d.z};
  const auto pairs = neighbor_pairs(d);
  std::vector<RealArc> arcs;
  auto append = [&arcs](std::vector<RealArc>&& more) { arcs.insert(arcs.end(), more.begin(), more.end()); };
  for (std::size_t i = 0; i < problem.surface_count(); ++i) {
    for (std::size_t x = 0; x < d.x; ++x)
      for (std::size_t y = 0; y < d.y; ++y)
        append(build_intra_column_arcs(costs[i].column(x, y), i, column_index(d, x, y), index));
    for (const auto& [a, b] : pairs)
      append(build_inter_column_arcs(problem.penalties[i], problem.mappings[a], problem.mappings[b], i, a, b, index));
    if (i + 1 < problem.surface_count()) {
      const double gap = problem.separation.min_gap[i];
      for (std::size_t a = 0; a < d.columns(); ++a)
        append(build_inter_surface_arcs(problem.mappings[a], gap, i, a, index));
    }
  }
  return arcs;
}

/// Full graph for a problem. Cost volumes are shifted to a zero minimum and
/// the shift is recorded in energy_offset.
inline GraphSpec assemble_graph(const Problem& problem, CapacityScale scale = {}) {
  problem.validate();
  std::vector<Volume> shifted;
  shifted.reserve(problem.surface_count());
  double offset = 0.0;
  for (const Volume& c : problem.costs) {
    auto n = normalize_cost(c);
    offset += n.shift * static_cast<double>(problem.column_count());
    shifted.push_back(std::move(n.cost));
  }
  const Dims& d = problem.dims();
  const NodeIndex index{problem.surface_count(), d.columns(), d.z};
  return quantize_graph(build_real_arcs(problem, shifted), index, scale, offset);
}

/// DIMACS max-flow dump. Node ids are 1-based; the sentinel is kept in a comment.
inline void write_dimacs(const GraphSpec& g, std::ostream& out) {
  out << "c optsurf graph\n";
  out << "c sentinel " << g.sentinel << "\n";
  out << "c scale " << g.scale << "\n";
  out << "p max " << g.node_count << " " << g.arcs.size() << "\n";
  out << "n " << NodeIndex::source + 1 << " s\n";
  out << "n " << NodeIndex::sink + 1 << " t\n";
  for (const Arc& a : g.arcs) out << "a " << a.from + 1 << " " << a.to + 1 << " " << a.capacity << "\n";
}

/// Reads a DIMACS max-flow file. Sources/sinks other than nodes 1/2 are
/// renumbered so that s = 0 and t = 1. Arc kinds are not recoverable and are
/// reported as Data.
inline GraphSpec read_dimacs(std::istream& in) {
  GraphSpec g;
  std::size_t n = 0, m = 0, s = 0, t = 0;
  bool have_sentinel = false;
  std::vector<std::array<Capacity, 3>> raw;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    char tag = 0;
    ls >> tag;
    if (tag == 'c') {
      std::string key;
      ls >> key;
      if (key == "sentinel" && (ls >> g.sentinel)) have_sentinel = true;
      if (key == "scale") ls >> g.scale;
    } else if (tag == 'p') {
      std::string kind;
      ls >> kind >> n >> m;
      if (kind != "max") fail(ErrorCode::IoError, "DIMACS problem line is not 'max'");
    } else if (tag == 'n') {
      std::size_t id = 0;
      char role = 0;
      ls >> id >> role;
      (role == 's' ? s : t) = id;
    } else if (tag == 'a') {
      Capacity u = 0, v = 0, c = 0;
      if (!(ls >> u >> v >> c)) fail(ErrorCode::IoError, "malformed DIMACS arc line: " + line);
      raw.push_back({u, v, c});
    } else {
      fail(ErrorCode::IoError, "unknown DIMACS line: " + line);
    }
  }
  if (n < 2 || s == 0 || t == 0 || s == t) fail(ErrorCode::IoError, "DIMACS file lacks p/n lines");
  auto remap = [&](std::size_t id) -> std::size_t {
    if (id < 1 || id > n) fail(ErrorCode::IoError, "DIMACS node id out of range");
    if (id == s) return NodeIndex::source;
    if (id == t) return NodeIndex::sink;
    // Pack the remaining ids into 2..n-1 preserving their order.
    std::size_t shift = 0;
    if (s < id) ++shift;
    if (t < id) ++shift;
    return id - 1 - shift + 2;
  };
  g.node_count = n;
  g.index = NodeIndex{1, n - 2, 1};
  Capacity total = 0;
  for (const auto& [u, v, c] : raw) {
    if (c < 0) fail(ErrorCode::IoError, "negative DIMACS capacity");
    g.arcs.push_back({remap(static_cast<std::size_t>(u)), remap(static_cast<std::size_t>(v)), c, ArcKind::Data});
    if (!have_sentinel) total += c;
  }
  if (raw.size() != m) fail(ErrorCode::IoError, "DIMACS arc count does not match the problem line");
  if (!have_sentinel) g.sentinel = total + 1;
  return g;
}

}  // namespace optsurf
