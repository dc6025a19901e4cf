#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "optsurf/graphbuild.hpp"
#include "optsurf/maxflow.hpp"
#include "optsurf/oracle.hpp"
#include "support/reference.hpp"

using namespace optsurf;

namespace {

GraphSpec raw_graph(std::size_t n, std::vector<Arc> arcs) {
  GraphSpec g;
  g.node_count = n;
  g.arcs = std::move(arcs);
  Capacity total = 0;
  for (const auto& a : g.arcs) total += a.capacity;
  g.sentinel = total + 1;
  g.index = NodeIndex{1, n - 2, 1};
  return g;
}

Problem random_problem(std::mt19937_64& rng, std::size_t nx, std::size_t ny, std::size_t z, std::size_t surfaces) {
  const Dims d{nx, ny, z};
  std::uniform_real_distribution<double> cost(0.0, 10.0);
  Problem p;
  for (std::size_t i = 0; i < surfaces; ++i) {
    std::vector<double> c(d.voxels());
    for (auto& v : c) v = cost(rng);
    p.costs.emplace_back(d, Spacing{}, c);
    p.penalties.push_back(reference::random_penalty(rng));
  }
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) p.mappings.push_back({x, y, reference::random_mapping(rng, z, 0.3, 1.5)});
  std::uniform_real_distribution<double> gap(0.0, 1.5);
  for (std::size_t i = 0; i + 1 < surfaces; ++i) p.separation.min_gap.push_back(gap(rng));
  return p;
}

}  // namespace

TEST(MinCut, SeriesBottleneck) {
  const auto g = raw_graph(3, {{0, 2, 5, ArcKind::Data}, {2, 1, 3, ArcKind::Data}});
  const auto cut = solve_min_cut(g);
  EXPECT_EQ(cut.flow, 3);
  ASSERT_EQ(cut.severed.size(), 1u);
  EXPECT_EQ(g.arcs[cut.severed[0]].to, NodeIndex::sink);
}

TEST(MinCut, Diamond) {
  // s=0, t=1, a=2, b=3
  const auto g = raw_graph(4, {{0, 2, 3, ArcKind::Data},
                               {0, 3, 2, ArcKind::Data},
                               {2, 1, 2, ArcKind::Data},
                               {3, 1, 3, ArcKind::Data},
                               {2, 3, 1, ArcKind::Data}});
  EXPECT_EQ(solve_min_cut(g).flow, 5);
}

TEST(MinCut, AllSentinelColumnIsInfeasible) {
  GraphSpec g = raw_graph(3, {{0, 2, 0, ArcKind::Source}, {2, 1, 0, ArcKind::Data}});
  g.sentinel = 10;
  g.arcs[0].capacity = g.sentinel;
  g.arcs[1].capacity = g.sentinel;
  try {
    solve_min_cut(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Infeasible);
  }
}

TEST(MinCut, SeparationLargerThanColumnIsInfeasible) {
  const Dims d{2, 1, 3};
  Problem p{{Volume(d, {}), Volume(d, {})}, identity_mappings(d), {ConvexPenalty::linear(), ConvexPenalty::linear()},
            {{5.0}}};
  try {
    segment(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Infeasible);
  }
}

TEST(MinCut, AgreesWithEdmondsKarpOnRandomGraphs) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng() % 12;
    std::uniform_int_distribution<std::size_t> node(0, n - 1);
    std::uniform_int_distribution<Capacity> cap(0, 20);
    std::vector<Arc> arcs;
    const std::size_t m = rng() % (n * 3);
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t u = node(rng), v = node(rng);
      if (u == v || v == NodeIndex::source || u == NodeIndex::sink) continue;
      arcs.push_back({u, v, cap(rng), ArcKind::Data});
    }
    const auto g = raw_graph(n, arcs);
    const auto cut = solve_min_cut(g);
    EXPECT_EQ(cut.flow, reference::max_flow(g)) << "trial " << trial;
    Capacity severed = 0;
    for (auto k : cut.severed) severed += g.arcs[k].capacity;
    EXPECT_EQ(severed, cut.flow);
    EXPECT_TRUE(cut.source_side[NodeIndex::source]);
    EXPECT_FALSE(cut.source_side[NodeIndex::sink]);
  }
}

TEST(MinCut, FlowInvariantUnderArcPermutation) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_problem(rng, 3, 2, 5, 2);
    auto g = assemble_graph(p);
    const Capacity f1 = solve_min_cut(g).flow;
    std::shuffle(g.arcs.begin(), g.arcs.end(), rng);
    EXPECT_EQ(solve_min_cut(g).flow, f1);
  }
}

TEST(MinCut, SourceSideIsMinimalAmongMinimumCuts) {
  // Two parallel minimum cuts: s->v (2) or v->t (2). The source-reachable set excludes v.
  const auto g = raw_graph(3, {{0, 2, 2, ArcKind::Data}, {2, 1, 2, ArcKind::Data}});
  const auto cut = solve_min_cut(g);
  EXPECT_FALSE(cut.source_side[2]);
}

TEST(Recover, SingleColumnArgmin) {
  const Dims d{1, 1, 3};
  Problem p{{Volume(d, {}, std::vector<double>{5, 2, 7})}, {{0, 0, {0.0, 0.4, 2.0}}}, {ConvexPenalty::linear()}, {}};
  const auto r = segment(p);
  EXPECT_EQ(r.labels[0][0], 1);
  EXPECT_DOUBLE_EQ(r.positions[0][0], 0.4);
  EXPECT_NEAR(r.energy, 2.0, 1e-9);
}

TEST(Recover, TinySmoothnessGivesIndependentArgmin) {
  std::mt19937_64 rng(2);
  const Dims d{4, 3, 6};
  std::vector<double> c(d.voxels());
  for (auto& v : c) v = static_cast<double>(rng() % 1000);
  Problem p{{Volume(d, {}, c)}, identity_mappings(d), {ConvexPenalty::linear(1e-9)}, {}};
  const auto r = segment(p);
  for (std::size_t x = 0; x < d.x; ++x)
    for (std::size_t y = 0; y < d.y; ++y) {
      const auto col = p.costs[0].column(x, y);
      const auto best = std::min_element(col.begin(), col.end()) - col.begin();
      EXPECT_EQ(r.labels[0][column_index(d, x, y)], best);
    }
}

TEST(Recover, ForcedPairIsReturned) {
  const Dims d{2, 1, 4};
  std::vector<double> c(d.voxels(), 1.0);
  Problem p{{Volume(d, {}, c), Volume(d, {}, c)}, identity_mappings(d),
            {ConvexPenalty::linear(), ConvexPenalty::linear()}, {{3.0}}};
  const auto r = segment(p);
  for (std::size_t a = 0; a < 2; ++a) {
    EXPECT_EQ(r.labels[0][a], 0);
    EXPECT_EQ(r.labels[1][a], 3);
  }
}

TEST(Recover, ReportedEnergyMatchesOracleEnergyOfLabels) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = random_problem(rng, 3, 2, 5, 2);
    // Shift costs negative to exercise the normalization offset.
    for (auto& c : p.costs)
      for (double& v : c.data()) v -= 4.0;
    GraphSpec g;
    const auto r = segment(p, {}, &g);
    const auto cut = solve_min_cut(g);
    const auto e = oracle::energy(p, r.labels);
    ASSERT_TRUE(e.has_value());
    EXPECT_NEAR(r.energy, *e, static_cast<double>(cut.severed.size()) / 65536.0);
  }
}

TEST(Recover, EveryColumnSeversExactlyOneDataArc) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_problem(rng, 3, 3, 6, 2);
    const auto g = assemble_graph(p);
    const auto cut = solve_min_cut(g);
    std::vector<int> per_column(p.surface_count() * p.column_count(), 0);
    for (auto k : cut.severed) {
      const auto& a = g.arcs[k];
      if (a.kind != ArcKind::Data) continue;
      ++per_column[(a.from - 2) / p.levels()];
    }
    for (int n : per_column) EXPECT_EQ(n, 1);
  }
}
