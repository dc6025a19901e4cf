#pragma once

// Minimum s-t cut with exact integer arithmetic: augmenting paths found by
// two search trees (rooted at s and t) that are repaired and reused after
// every augmentation instead of being rebuilt from scratch.

#include <cstdint>
#include <deque>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "optsurf/core.hpp"
#include "optsurf/graphbuild.hpp"

namespace optsurf {

struct CutResult {
  Capacity flow = 0;
  std::vector<std::uint8_t> source_side;  // per node; s is 1, t is 0
  std::vector<std::size_t> severed;       // indices into GraphSpec::arcs
  Capacity sentinel = 0;
  Capacity scale = 1;
  double energy_offset = 0.0;
  NodeIndex index;
};

namespace detail {

class TreeReuseMaxFlow {
 public:
  explicit TreeReuseMaxFlow(const GraphSpec& g) : sentinel_(g.sentinel) {
    if (g.node_count > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max() / 2))
      fail(ErrorCode::CapacityOverflow, "graph too large");
    const auto n = static_cast<std::int32_t>(g.node_count);
    tr_cap_.assign(static_cast<std::size_t>(n), 0);
    std::vector<Capacity> from_source(static_cast<std::size_t>(n), 0), to_sink(static_cast<std::size_t>(n), 0);

    std::vector<std::int32_t> degree(static_cast<std::size_t>(n) + 1, 0);
    for (const Arc& a : g.arcs) {
      if (a.capacity < 0) fail(ErrorCode::InvalidArgument, "negative capacity");
      if (a.from >= g.node_count || a.to >= g.node_count) fail(ErrorCode::IndexOutOfRange, "arc endpoint out of range");
      if (is_internal(a)) {
        ++degree[a.from];
        ++degree[a.to];
      }
    }
    first_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::int32_t v = 0; v < n; ++v) first_[v + 1] = first_[v] + degree[v];
    head_.resize(static_cast<std::size_t>(first_[n]));
    sister_.resize(head_.size());
    r_cap_.resize(head_.size());
    std::vector<std::int32_t> fill(first_.begin(), first_.end() - 1);

    for (const Arc& a : g.arcs) {
      const auto u = static_cast<std::int32_t>(a.from);
      const auto v = static_cast<std::int32_t>(a.to);
      if (u == v || a.to == NodeIndex::source || a.from == NodeIndex::sink) continue;
      if (a.from == NodeIndex::source && a.to == NodeIndex::sink) {
        add_flow(a.capacity);
      } else if (a.from == NodeIndex::source) {
        from_source[v] = sat_add(from_source[v], a.capacity);
      } else if (a.to == NodeIndex::sink) {
        to_sink[u] = sat_add(to_sink[u], a.capacity);
      } else {
        const std::int32_t fa = fill[u]++;
        const std::int32_t ra = fill[v]++;
        head_[fa] = v;
        head_[ra] = u;
        sister_[fa] = ra;
        sister_[ra] = fa;
        r_cap_[fa] = a.capacity;
        r_cap_[ra] = 0;
      }
    }
    for (std::int32_t v = 2; v < n; ++v) {
      add_flow(std::min(from_source[v], to_sink[v]));
      tr_cap_[v] = from_source[v] - to_sink[v];
    }
  }

  Capacity run() {
    const auto n = static_cast<std::int32_t>(tr_cap_.size());
    parent_.assign(static_cast<std::size_t>(n), kNone);
    in_sink_.assign(static_cast<std::size_t>(n), 0);
    next_.assign(static_cast<std::size_t>(n), kNone);
    stamp_.assign(static_cast<std::size_t>(n), 0);
    dist_.assign(static_cast<std::size_t>(n), 0);
    for (std::int32_t v = 2; v < n; ++v) {
      if (tr_cap_[v] == 0) continue;
      in_sink_[v] = tr_cap_[v] < 0;
      parent_[v] = kTerminal;
      dist_[v] = 1;
      set_active(v);
    }

    std::int32_t current = kNone;
    while (true) {
      std::int32_t i = current;
      if (i != kNone) {
        next_[i] = kNone;
        if (parent_[i] == kNone) i = kNone;
      }
      if (i == kNone) {
        i = next_active();
        if (i == kNone) break;
      }

      std::int32_t found = kNone;  // arc from an S-tree node to a T-tree node
      if (!in_sink_[i]) {
        for (std::int32_t a = first_[i]; a < first_[i + 1]; ++a) {
          if (r_cap_[a] == 0) continue;
          const std::int32_t j = head_[a];
          if (parent_[j] == kNone) {
            in_sink_[j] = 0;
            parent_[j] = sister_[a];
            stamp_[j] = stamp_[i];
            dist_[j] = dist_[i] + 1;
            set_active(j);
          } else if (in_sink_[j]) {
            found = a;
            break;
          } else if (stamp_[j] <= stamp_[i] && dist_[j] > dist_[i]) {
            parent_[j] = sister_[a];
            stamp_[j] = stamp_[i];
            dist_[j] = dist_[i] + 1;
          }
        }
      } else {
        for (std::int32_t a = first_[i]; a < first_[i + 1]; ++a) {
          if (r_cap_[sister_[a]] == 0) continue;
          const std::int32_t j = head_[a];
          if (parent_[j] == kNone) {
            in_sink_[j] = 1;
            parent_[j] = sister_[a];
            stamp_[j] = stamp_[i];
            dist_[j] = dist_[i] + 1;
            set_active(j);
          } else if (!in_sink_[j]) {
            found = sister_[a];
            break;
          } else if (stamp_[j] <= stamp_[i] && dist_[j] > dist_[i]) {
            parent_[j] = sister_[a];
            stamp_[j] = stamp_[i];
            dist_[j] = dist_[i] + 1;
          }
        }
      }

      ++time_;
      if (found != kNone) {
        next_[i] = i;  // keep i out of the active list while it is current
        current = i;
        augment(found);
        adopt_orphans();
      } else {
        current = kNone;
      }
    }
    return flow_;
  }

  /// Nodes reachable from s in the final residual graph.
  std::vector<std::uint8_t> source_reachable() const {
    const std::size_t n = tr_cap_.size();
    std::vector<std::uint8_t> seen(n, 0);
    std::queue<std::int32_t> q;
    seen[NodeIndex::source] = 1;
    for (std::size_t v = 2; v < n; ++v)
      if (tr_cap_[v] > 0) {
        seen[v] = 1;
        q.push(static_cast<std::int32_t>(v));
      }
    while (!q.empty()) {
      const std::int32_t u = q.front();
      q.pop();
      for (std::int32_t a = first_[u]; a < first_[u + 1]; ++a) {
        const std::int32_t v = head_[a];
        if (r_cap_[a] > 0 && !seen[v]) {
          seen[v] = 1;
          q.push(v);
        }
      }
    }
    return seen;
  }

 private:
  static constexpr std::int32_t kNone = -1;
  static constexpr std::int32_t kTerminal = -2;
  static constexpr std::int32_t kOrphan = -3;
  static constexpr std::int32_t kInfDist = std::numeric_limits<std::int32_t>::max();

  static bool is_internal(const Arc& a) {
    return a.from != a.to && a.from != NodeIndex::source && a.from != NodeIndex::sink &&
           a.to != NodeIndex::source && a.to != NodeIndex::sink;
  }

  static Capacity sat_add(Capacity a, Capacity b) {
    Capacity r = 0;
    if (__builtin_add_overflow(a, b, &r)) fail(ErrorCode::CapacityOverflow, "terminal capacity overflow");
    return r;
  }

  void add_flow(Capacity c) {
    flow_ = sat_add(flow_, c);
    if (flow_ >= sentinel_)
      fail(ErrorCode::Infeasible, "every s-t cut severs a sentinel arc (no feasible labeling)");
  }

  void set_active(std::int32_t v) {
    if (next_[v] != kNone) return;
    next_[v] = v;  // self-link marks "queued"; the deque holds the order
    active_.push_back(v);
  }

  std::int32_t next_active() {
    while (!active_.empty()) {
      const std::int32_t v = active_.front();
      active_.pop_front();
      next_[v] = kNone;
      if (parent_[v] != kNone) return v;
    }
    return kNone;
  }

  void augment(std::int32_t middle) {
    Capacity bottleneck = r_cap_[middle];
    std::int32_t i = head_[sister_[middle]];
    for (std::int32_t a; (a = parent_[i]) != kTerminal; i = head_[a])
      bottleneck = std::min(bottleneck, r_cap_[sister_[a]]);
    bottleneck = std::min(bottleneck, tr_cap_[i]);
    i = head_[middle];
    for (std::int32_t a; (a = parent_[i]) != kTerminal; i = head_[a]) bottleneck = std::min(bottleneck, r_cap_[a]);
    bottleneck = std::min(bottleneck, -tr_cap_[i]);

    r_cap_[sister_[middle]] += bottleneck;
    r_cap_[middle] -= bottleneck;

    i = head_[sister_[middle]];
    for (std::int32_t a; (a = parent_[i]) != kTerminal; i = head_[a]) {
      r_cap_[a] += bottleneck;
      r_cap_[sister_[a]] -= bottleneck;
      if (r_cap_[sister_[a]] == 0) make_orphan(i);
    }
    tr_cap_[i] -= bottleneck;
    if (tr_cap_[i] == 0) make_orphan(i);

    i = head_[middle];
    for (std::int32_t a; (a = parent_[i]) != kTerminal; i = head_[a]) {
      r_cap_[sister_[a]] += bottleneck;
      r_cap_[a] -= bottleneck;
      if (r_cap_[a] == 0) make_orphan(i);
    }
    tr_cap_[i] += bottleneck;
    if (tr_cap_[i] == 0) make_orphan(i);

    add_flow(bottleneck);
  }

  void make_orphan(std::int32_t v) {
    parent_[v] = kOrphan;
    orphans_.push_back(v);
  }

  void adopt_orphans() {
    while (!orphans_.empty()) {
      const std::int32_t i = orphans_.front();
      orphans_.pop_front();
      process_orphan(i);
    }
  }

  void process_orphan(std::int32_t i) {
    const bool sink_tree = in_sink_[i];
    std::int32_t best_arc = kNone;
    std::int32_t best_dist = kInfDist;

    for (std::int32_t a0 = first_[i]; a0 < first_[i + 1]; ++a0) {
      // The candidate parent j must be able to push flow towards i (S tree)
      // or receive flow from i (T tree).
      const Capacity cap = sink_tree ? r_cap_[a0] : r_cap_[sister_[a0]];
      if (cap == 0) continue;
      std::int32_t j = head_[a0];
      if (in_sink_[j] != sink_tree || parent_[j] == kNone) continue;

      std::int32_t d = 0;
      while (true) {
        if (stamp_[j] == time_) {
          d += dist_[j];
          break;
        }
        const std::int32_t a = parent_[j];
        ++d;
        if (a == kTerminal) {
          stamp_[j] = time_;
          dist_[j] = 1;
          break;
        }
        if (a == kOrphan) {
          d = kInfDist;
          break;
        }
        j = head_[a];
      }
      if (d == kInfDist) continue;
      if (d < best_dist) {
        best_arc = a0;
        best_dist = d;
      }
      for (j = head_[a0]; stamp_[j] != time_; j = head_[parent_[j]]) {
        stamp_[j] = time_;
        dist_[j] = d--;
      }
    }

    if (best_arc != kNone) {
      parent_[i] = best_arc;
      stamp_[i] = time_;
      dist_[i] = best_dist + 1;
      return;
    }

    // No valid parent: i becomes free and its children become orphans.
    for (std::int32_t a0 = first_[i]; a0 < first_[i + 1]; ++a0) {
      const std::int32_t j = head_[a0];
      if (in_sink_[j] != sink_tree || parent_[j] == kNone) continue;
      const Capacity cap = sink_tree ? r_cap_[a0] : r_cap_[sister_[a0]];
      if (cap > 0) set_active(j);
      const std::int32_t pa = parent_[j];
      if (pa != kTerminal && pa != kOrphan && head_[pa] == i) make_orphan(j);
    }
    parent_[i] = kNone;
  }

  Capacity sentinel_;
  Capacity flow_ = 0;
  std::vector<Capacity> tr_cap_;  // >0: residual from s, <0: residual to t
  std::vector<std::int32_t> first_, head_, sister_;
  std::vector<Capacity> r_cap_;

  std::vector<std::int32_t> parent_, next_, dist_;
  std::vector<std::uint8_t> in_sink_;
  std::vector<std::int64_t> stamp_;
  std::int64_t time_ = 0;
  std::deque<std::int32_t> active_;
  std::deque<std::int32_t> orphans_;
};

}  // namespace detail

/// Maximum flow and the source-side-minimal minimum cut.
/// Throws Infeasible when the flow reaches the sentinel.
inline CutResult solve_min_cut(const GraphSpec& g) {
  detail::TreeReuseMaxFlow solver(g);
  CutResult out;
  out.flow = solver.run();
  out.source_side = solver.source_reachable();
  out.sentinel = g.sentinel;
  out.scale = g.scale;
  out.energy_offset = g.energy_offset;
  out.index = g.index;
  Capacity cut = 0;
  for (std::size_t k = 0; k < g.arcs.size(); ++k) {
    const Arc& a = g.arcs[k];
    if (out.source_side[a.from] && !out.source_side[a.to]) {
      out.severed.push_back(k);
      cut += a.capacity;
    }
  }
  if (cut != out.flow)
    fail(ErrorCode::InternalInconsistency,
         "cut capacity " + std::to_string(cut) + " differs from flow " + std::to_string(out.flow));
  return out;
}

/// Labels and mapped positions from a feasible cut.
inline SegmentationResult recover_surfaces(const CutResult& cut, const Problem& problem) {
  const Dims& d = problem.dims();
  const NodeIndex& index = cut.index;
  if (index.surfaces != problem.surface_count() || index.columns != d.columns() || index.levels != d.z)
    fail(ErrorCode::DimMismatch, "cut does not belong to this problem");
  if (cut.flow >= cut.sentinel) fail(ErrorCode::Infeasible, "cut severs a sentinel arc");

  SegmentationResult r;
  r.dims = d;
  r.labels.assign(problem.surface_count(), std::vector<int>(d.columns(), 0));
  r.positions.assign(problem.surface_count(), std::vector<double>(d.columns(), 0.0));
  for (std::size_t i = 0; i < problem.surface_count(); ++i) {
    for (std::size_t a = 0; a < d.columns(); ++a) {
      std::size_t count = 0;
      while (count < d.z && cut.source_side[index(i, a, count)]) ++count;
      for (std::size_t z = count; z < d.z; ++z)
        if (cut.source_side[index(i, a, z)])
          fail(ErrorCode::InternalInconsistency, "non-contiguous source side in a column");
      if (count == 0) fail(ErrorCode::InternalInconsistency, "column bottom node on the sink side");
      r.labels[i][a] = static_cast<int>(count - 1);
      r.positions[i][a] = problem.mappings[a][count - 1];
    }
  }
  for (std::size_t i = 0; i + 1 < problem.surface_count(); ++i)
    for (std::size_t a = 0; a < d.columns(); ++a)
      if (r.positions[i + 1][a] - r.positions[i][a] < problem.separation.min_gap[i])
        fail(ErrorCode::InternalInconsistency, "recovered surfaces violate the separation constraint");
  r.energy = static_cast<double>(cut.flow) / static_cast<double>(cut.scale) + cut.energy_offset;
  return r;
}

/// assemble_graph + solve_min_cut + recover_surfaces.
inline SegmentationResult segment(const Problem& problem, CapacityScale scale = {}, GraphSpec* graph_out = nullptr) {
  GraphSpec g = assemble_graph(problem, scale);
  CutResult cut = solve_min_cut(g);
  SegmentationResult r = recover_surfaces(cut, problem);
  if (graph_out) *graph_out = std::move(g);
  return r;
}

}  // namespace optsurf
