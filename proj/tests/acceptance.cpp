// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "optsurf/optsurf.hpp"
#include "support/golden.hpp"
#include "support/reference.hpp"

using namespace optsurf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

/// Every segmentation produced by any suite, checked for separation at the end.
struct SeparationLedger {
  std::size_t outputs = 0;
  std::size_t checks = 0;
  std::size_t violations = 0;

  void record(const std::vector<ColumnMapping>& maps, const std::vector<double>& gaps,
              const std::vector<std::vector<int>>& labels) {
    ++outputs;
    for (std::size_t i = 0; i + 1 < labels.size(); ++i)
      for (std::size_t a = 0; a < maps.size(); ++a) {
        ++checks;
        const double lo = maps[a].positions[static_cast<std::size_t>(labels[i][a])];
        const double hi = maps[a].positions[static_cast<std::size_t>(labels[i + 1][a])];
        if (hi - lo < gaps[i]) ++violations;
      }
  }
};

SeparationLedger g_sep;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome inter_column_nonnegativity() {
  std::mt19937_64 rng(1001);
  std::size_t weights = 0, negative_raw = 0, negative_kept = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t z = 2 + rng() % 11;  // [2, 12]
    const ColumnMapping la{0, 0, reference::random_mapping(rng, z, 0.05, 3.0)};
    const ColumnMapping lb{0, 1, reference::random_mapping(rng, z, 0.05, 3.0)};
    const auto psi = reference::random_penalty(rng);
    for (std::size_t k1 = 0; k1 < z; ++k1)
      for (std::size_t k2 = 1; k2 <= z; ++k2) {
        const double w = inter_column_weight(psi, la, lb, k1, k2);
        ++weights;
        worst = std::min(worst, w);
        if (w < -1e-12) ++negative_raw;
      }
    const NodeIndex idx{1, 2, z};
    for (const auto& arc : build_inter_column_arcs(psi, la, lb, 0, 0, 1, idx))
      if (!(arc.weight >= 0.0)) ++negative_kept;
  }
  return {negative_raw == 0 && negative_kept == 0,
          fmt("%zu weights, min raw %.3g, %zu below -1e-12, %zu negative arcs kept", weights, worst, negative_raw,
              negative_kept)};
}

Outcome severed_weight_equals_penalty() {
  std::mt19937_64 rng(2002);
  std::size_t pairs = 0, bad = 0;
  double worst = 0.0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t z = 2 + rng() % 9;
    const ColumnMapping la{0, 0, reference::random_mapping(rng, z, 0.1, 2.5)};
    const ColumnMapping lb{0, 1, reference::random_mapping(rng, z, 0.1, 2.5)};
    const auto psi = reference::random_penalty(rng);
    const NodeIndex idx{1, 2, z};
    const auto arcs = build_inter_column_arcs(psi, la, lb, 0, 0, 1, idx);
    auto level_of = [&](std::size_t node, std::size_t& col) {
      col = (node - 2) / z;
      return (node - 2) % z;
    };
    for (std::size_t k1 = 0; k1 < z; ++k1)
      for (std::size_t k2 = 0; k2 < z; ++k2) {
        const std::size_t label[2] = {k1, k2};
        double sum = 0.0;
        for (const auto& arc : arcs) {
          std::size_t cf = 0, ct = 0;
          const std::size_t lf = level_of(arc.from, cf);
          const bool tail_source = lf <= label[cf];
          bool head_sink = true;
          if (arc.to != NodeIndex::sink) head_sink = level_of(arc.to, ct) > label[ct];
          if (tail_source && head_sink) sum += arc.weight;
        }
        const double expect = reference::eval_reference(psi, la[k1] - lb[k2]);
        const double rel = std::abs(sum - expect) / std::max(1.0, std::abs(expect));
        worst = std::max(worst, rel);
        ++pairs;
        if (rel > 1e-9) ++bad;
      }
  }
  return {bad == 0, fmt("%zu label pairs over 200 instances, max relative error %.3g", pairs, worst)};
}

Outcome golden_cut_sums() {
  std::string detail;
  bool ok = true;
  for (const auto& cut : golden::cuts()) {
    std::int64_t sum = 0;
    std::set<std::string> severed;
    for (const auto& e : golden::arcs())
      if (golden::severed(e, cut.s_a, cut.s_b)) {
        sum += e.weight;
        severed.insert(golden::name(e));
      }
    std::int64_t listed = 0;
    for (const auto& m : cut.members)
      for (const auto& e : golden::arcs())
        if (golden::name(e) == m) listed += e.weight;
    const bool same_members = severed == std::set<std::string>(cut.members.begin(), cut.members.end());
    ok = ok && sum == cut.expected && listed == cut.expected && same_members;
    detail += fmt("%s=%lld%s ", cut.name.c_str(), static_cast<long long>(sum), same_members ? "" : "(members differ)");
  }
  return {ok, detail + fmt("from %zu arcs", golden::arcs().size())};
}

Problem random_small_problem(std::mt19937_64& rng, bool irregular) {
  const std::size_t layouts[4][2] = {{1, 1}, {2, 1}, {3, 1}, {2, 2}};
  const auto& lay = layouts[rng() % 4];
  const std::size_t surfaces = 1 + rng() % 2;
  const std::size_t z = 2 + rng() % 5;  // [2, 6]
  const Dims d{lay[0], lay[1], z};
  std::uniform_real_distribution<double> cost(0.0, 10.0), w(0.2, 4.0);
  Problem p;
  const bool quad = rng() % 2;
  for (std::size_t i = 0; i < surfaces; ++i) {
    std::vector<double> c(d.voxels());
    for (auto& v : c) v = cost(rng);
    p.costs.emplace_back(d, Spacing{}, c);
    p.penalties.push_back(quad ? ConvexPenalty::quadratic(w(rng)) : ConvexPenalty::linear(w(rng)));
  }
  for (std::size_t x = 0; x < d.x; ++x)
    for (std::size_t y = 0; y < d.y; ++y)
      p.mappings.push_back(irregular ? ColumnMapping{x, y, reference::random_mapping(rng, z, 0.3, 1.7)}
                                     : ColumnMapping::identity(z, x, y));
  if (surfaces == 2) {
    double extent = 1e300;
    for (const auto& m : p.mappings) extent = std::min(extent, m.positions.back() - m.positions.front());
    std::uniform_real_distribution<double> gap(0.0, extent);
    p.separation.min_gap = {gap(rng)};
  }
  return p;
}

Outcome global_optimality() {
  std::mt19937_64 rng(4004);
  int matched = 0;
  double worst_gap = 0.0;
  std::string first_failure;
  for (int inst = 0; inst < 50; ++inst) {
    const Problem p = random_small_problem(rng, true);
    GraphSpec g;
    const auto r = segment(p, {}, &g);
    const auto cut = solve_min_cut(g);
    const double tol = static_cast<double>(cut.severed.size()) / static_cast<double>(g.scale);
    const auto best = oracle::brute_force_minimize(p);
    const auto own = oracle::energy(p, r.labels);
    g_sep.record(p.mappings, p.separation.min_gap, r.labels);
    const double gap = std::abs(r.energy - best.energy);
    worst_gap = std::max(worst_gap, gap / std::max(tol, 1e-300));
    const bool ok = own && gap <= tol && std::abs(*own - best.energy) <= tol && *own >= best.energy - 1e-9;
    if (ok)
      ++matched;
    else if (first_failure.empty())
      first_failure = fmt(" first failure: instance %d pipeline %.9g oracle %.9g tol %.3g", inst, r.energy,
                          best.energy, tol);
  }
  return {matched == 50, fmt("%d/50 instances at the oracle minimum, max |gap|/tol %.3f", matched, worst_gap) +
                             first_failure};
}

Outcome equidistant_reduction() {
  std::mt19937_64 rng(5005);
  int matched = 0;
  std::string first_failure;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t nx = 2 + rng() % 3, ny = 1 + rng() % 3, z = 4 + rng() % 5;
    const std::size_t surfaces = 1 + rng() % 2;
    const double pitch = inst % 2 ? 1.0 : std::uniform_real_distribution<double>(0.5, 2.0)(rng);
    const Dims d{nx, ny, z};
    std::uniform_real_distribution<double> cost(0.0, 10.0);
    Problem p;
    reference::RegularInstance ref;
    ref.nx = nx;
    ref.ny = ny;
    ref.z = z;
    for (std::size_t i = 0; i < surfaces; ++i) {
      std::vector<double> c(d.voxels());
      for (auto& v : c) v = cost(rng);
      p.costs.emplace_back(d, Spacing{}, c);
      const auto psi = reference::random_penalty(rng);
      p.penalties.push_back(psi);
      ref.psi.push_back([psi, pitch](double k) { return reference::eval_reference(psi, pitch * k); });
      std::vector<std::vector<double>> per_col(d.columns(), std::vector<double>(z));
      for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y)
          for (std::size_t k = 0; k < z; ++k) per_col[x * ny + y][k] = p.costs.back()(x, y, k);
      ref.data.push_back(per_col);
    }
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t y = 0; y < ny; ++y) {
        ColumnMapping m = ColumnMapping::identity(z, x, y);
        for (double& v : m.positions) v *= pitch;
        p.mappings.push_back(m);
      }
    if (surfaces == 2) {
      const int steps = static_cast<int>(rng() % (z / 2 + 1));
      const double gap = pitch * steps;
      p.separation.min_gap = {gap};
      ref.gap = {steps};
    }
    GraphSpec g;
    const auto r = segment(p, {}, &g);
    const auto cut = solve_min_cut(g);
    const double tol = static_cast<double>(cut.severed.size()) / static_cast<double>(g.scale);
    const auto regular = reference::solve_regular(ref);
    g_sep.record(p.mappings, p.separation.min_gap, r.labels);
    const auto e_pipe = oracle::energy(p, r.labels);
    const auto e_ref = oracle::energy(p, regular.labels);
    const bool ok = r.labels == regular.labels && e_pipe && e_ref && std::abs(*e_pipe - *e_ref) <= tol &&
                    std::abs(r.energy - *e_ref) <= tol;
    if (ok)
      ++matched;
    else if (first_failure.empty())
      first_failure = fmt(" first failure: instance %d energies %.9g vs %.9g", inst, e_pipe ? *e_pipe : -1.0,
                          e_ref ? *e_ref : -1.0);
  }
  return {matched == 20, fmt("%d/20 instances with identical labels and energies", matched) + first_failure};
}

// Phantom study shared by the accuracy and determinism criteria.
json phantom_config(std::uint64_t seed) {
  const double phase = 0.37 * static_cast<double>(seed);
  json surfaces = json::array();
  surfaces.push_back({{"kind", "sinusoid"}, {"coefficients", {22.3, 6.0, 128.0, phase}}});
  surfaces.push_back({{"kind", "sinusoid"}, {"coefficients", {42.7, 5.0, 128.0, 1.1 + 0.5 * phase}}});
  json cfg;
  // Layer intensities 20 / 120 / 60: the strongest contrast is 100, so sigma 2 is 2% of it.
  cfg["input"]["phantom"] = {{"dims", {128, 32, 64}},
                             {"surfaces", surfaces},
                             {"intensities", {20.0, 120.0, 60.0}},
                             {"noise_sigma", 2.0}};
  cfg["downsample"] = {1, 1, 4};
  cfg["costs"] = json::array({{{"kind", "gradient"}, {"polarity", "dark-to-bright"}},
                              {{"kind", "gradient"}, {"polarity", "bright-to-dark"}}});
  cfg["penalty"] = {{"kind", "linear"}, {"weight", 1.0}};
  cfg["separation"] = {1.0};
  cfg["gvf"] = {{"enabled", true}, {"mu", 0.2}, {"iterations", 10}};
  cfg["baseline"] = true;
  cfg["seed"] = seed;
  return cfg;
}

double mean_umsp(const std::vector<SurfaceMetrics>& m) {
  double acc = 0.0;
  for (const auto& e : m) acc += e.umsp;
  return acc / static_cast<double>(m.size());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome phantom_accuracy() {
  std::vector<double> proposed, baseline;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto cfg = pipeline_config_from_json(phantom_config(seed));
    const auto r = run_pipeline(cfg);
    proposed.push_back(mean_umsp(r.proposed_metrics));
    baseline.push_back(mean_umsp(r.baseline_metrics));
    // Mappings of the proposed run are not kept in the result; positions carry them.
    for (std::size_t a = 0; a < r.dims.columns(); ++a)
      for (std::size_t i = 0; i + 1 < r.proposed.surface_count(); ++i) {
        ++g_sep.checks;
        if (r.proposed.positions[i + 1][a] - r.proposed.positions[i][a] < cfg.separation[i]) ++g_sep.violations;
        ++g_sep.checks;
        if (r.baseline->positions[i + 1][a] - r.baseline->positions[i][a] < cfg.separation[i]) ++g_sep.violations;
      }
    g_sep.outputs += 2;
  }
  const double mp = median(proposed), mb = median(baseline);
  return {mp <= 0.85 * mb, fmt("median UMSP proposed %.4f vs regular grid %.4f (ratio %.3f, need <= 0.85)", mp, mb,
                               mp / mb)};
}

Outcome normalization_half_voxel() {
  std::mt19937_64 rng(8008);
  int ok = 0;
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const Dims d{4 + rng() % 5, 3 + rng() % 4, 6 + rng() % 10};
    VectorField f{Volume(d, {}), Volume(d, {}), Volume(d, {})};
    if (t % 2 == 0) {
      std::normal_distribution<double> n(0.0, 1.0 + static_cast<double>(t));
      for (Volume* c : {&f.x, &f.y, &f.z})
        for (double& v : c->data()) v = n(rng);
    } else {
      Volume v(d, {});
      std::uniform_real_distribution<double> u(0.0, 100.0);
      for (double& e : v.data()) e = u(rng);
      f = compute_gvf(edge_map(v), {0.2, 20, std::nullopt, 1});
    }
    const double delta = 1.0;
    const auto s = normalize_and_shift(f, delta);
    double mx = 0.0;
    for (std::size_t i = 0; i < s.shift.x.data().size(); ++i) mx = std::max(mx, s.shift.norm(i));
    worst = std::max(worst, std::abs(mx - delta / 2));
    bool monotone = true;
    try {
      const auto maps = mappings_from_shifts(s);
      for (const auto& m : maps)
        for (std::size_t k = 1; k < m.size(); ++k) monotone = monotone && m[k] > m[k - 1];
    } catch (const Error&) {
      monotone = false;
    }
    if (std::abs(mx - delta / 2) <= 1e-12 && monotone) ++ok;
  }
  return {ok == 10, fmt("%d/10 fields, max | max shift - delta/2 | = %.3g", ok, worst)};
}

Outcome metrics_examples() {
  using namespace metrics;
  std::vector<std::pair<std::string, double>> errs;
  auto plane = [](double z) { return surface_points({8, 6, 1}, std::vector<double>(48, z)); };
  const std::vector<double> a{2.0, 3.0}, r{2.5, 2.0};
  errs.emplace_back("umsp identity", umsp(a, a) - 0.0);
  errs.emplace_back("umsp example", umsp(a, r) - 0.75);
  errs.emplace_back("uassd identity", uassd(plane(3.0), plane(3.0), {}) - 0.0);
  errs.emplace_back("uassd planes", uassd(plane(1.0), plane(4.0), {}) - 3.0);
  errs.emplace_back("uassd pitch", uassd(plane(10.0), plane(12.0), {6.54, 67.0, 3.23}) - 6.46);
  BinaryMask m1(30, 30), m2(30, 30), m3(30, 30);
  for (std::size_t y = 0; y < 10; ++y)
    for (std::size_t x = 0; x < 10; ++x) {
      m1.at(x, y) = 1;
      m2.at(x + 5, y + 5) = 1;
      m3.at(x + 15, y + 15) = 1;
    }
  errs.emplace_back("jaccard identity", jaccard(m1, m1) - 1.0);
  errs.emplace_back("jaccard disjoint", jaccard(m1, m3) - 0.0);
  errs.emplace_back("jaccard corner", jaccard(m1, m2) - 25.0 / 175.0);
  errs.emplace_back("pad equal", pad(100, 100) - 0.0);
  errs.emplace_back("pad under", pad(80, 100) - 0.2);
  errs.emplace_back("pad over", pad(120, 100) - 0.2);
  std::vector<Point2> c1, c2;
  for (int i = 0; i < 3600; ++i) {
    const double t = 2.0 * std::numbers::pi * i / 3600.0;
    c1.push_back({std::cos(t), std::sin(t)});
    c2.push_back({3.0 + std::cos(t), std::sin(t)});
  }
  errs.emplace_back("hausdorff identity", hausdorff(c1, c1) - 0.0);
  errs.emplace_back("hausdorff shifted circle", hausdorff(c1, c2) - 3.0);
  errs.emplace_back("hausdorff points", hausdorff(std::vector<Point2>{{0, 0}}, std::vector<Point2>{{3, 4}}) - 5.0);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, e] : errs)
    if (std::abs(e) >= worst) {
      worst = std::abs(e);
      worst_name = name;
    }
  return {worst <= 1e-9, fmt("%zu examples, max error %.3g (%s)", errs.size(), worst, worst_name.c_str())};
}

Outcome determinism() {
  const auto cfg = pipeline_config_from_json(phantom_config(3));
  const auto a = run_pipeline(cfg);
  const auto b = run_pipeline(cfg);
  bool same = a.proposed.labels == b.proposed.labels && a.baseline->labels == b.baseline->labels &&
              std::memcmp(&a.proposed.energy, &b.proposed.energy, sizeof(double)) == 0;
  for (std::size_t i = 0; i < a.proposed_metrics.size(); ++i) {
    same = same && std::memcmp(&a.proposed_metrics[i], &b.proposed_metrics[i], sizeof(SurfaceMetrics)) == 0;
    same = same && std::memcmp(&a.baseline_metrics[i], &b.baseline_metrics[i], sizeof(SurfaceMetrics)) == 0;
    same = same && a.proposed.positions[i] == b.proposed.positions[i];
  }
  const bool report_same = report_json(a, "fixed").dump() == report_json(b, "fixed").dump();
  g_sep.record(identity_mappings(a.dims), cfg.separation, a.baseline->labels);
  return {same && report_same, fmt("labels, energies, metrics %s; report %s", same ? "identical" : "DIFFER",
                                   report_same ? "identical" : "DIFFERS")};
}

Outcome separation_everywhere() {
  return {g_sep.violations == 0 && g_sep.checks > 0,
          fmt("%zu violations in %zu column checks over %zu outputs", g_sep.violations, g_sep.checks, g_sep.outputs)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // <= 0: no runtime limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "inter-column weights nonnegative (1000 trials)", 5.0, inter_column_nonnegativity},
      {2, "severed inter-column weight equals penalty (200 instances)", 10.0, severed_weight_equals_penalty},
      {3, "golden inter-column fixture cut sums 81/144/484/576", 0.0, golden_cut_sums},
      {4, "global optimality against exhaustive search (50 instances)", 60.0, global_optimality},
      {5, "equidistant mappings match regular-grid reference (20 instances)", 0.0, equidistant_reduction},
      {7, "phantom subvoxel accuracy, 20 seeds", 300.0, phantom_accuracy},
      {8, "GVF normalization to half a voxel (10 fields)", 0.0, normalization_half_voxel},
      {9, "metric examples", 1.0, metrics_examples},
      {10, "bit-for-bit determinism", 0.0, determinism},
      {6, "separation constraint holds on every output", 0.0, separation_everywhere},
  };
  std::vector<std::string> lines(11);
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    const bool in_time = c.budget_s <= 0.0 || secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::string timing = fmt("%.2fs", secs);
    if (c.budget_s > 0.0) timing += fmt(" of %.0fs budget", c.budget_s);
    lines[static_cast<std::size_t>(c.id)] =
        fmt("criterion %2d: %s  %s | %s | %s", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), timing.c_str());
  }
  for (std::size_t i = 1; i < lines.size(); ++i) std::printf("%s\n", lines[i].c_str());
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
