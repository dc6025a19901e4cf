// optsurf command-line tool.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error,
// 3 infeasible problem, 4 I/O error.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "optsurf/optsurf.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace optsurf;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::optional<std::int64_t> scale;
  bool baseline = false;
  std::string dump_graph;
  std::string out;
};

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::InvalidPenalty:
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnstableStep:
    case ErrorCode::FactorExceedsDim:
    case ErrorCode::SurfacesOutOfOrder:
      return 2;
    case ErrorCode::Infeasible:
      return 3;
    case ErrorCode::IoError:
      return 4;
    default:
      return 1;
  }
}

void require_config(const Common& c, const std::string& what) {
  if (c.config.empty()) fail(ErrorCode::ConfigInvalid, "--config " + what + " is required");
}

void dump_graph(const GraphSpec& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
  write_dimacs(g, out);
  if (!out) fail(ErrorCode::IoError, "failed writing " + path);
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

int cmd_phantom(const Common& c, const std::string& truth_path) {
  require_config(c, "(phantom spec JSON)");
  if (c.out.empty()) fail(ErrorCode::ConfigInvalid, "--out (volume path) is required");
  PhantomSpec spec = phantom_from_json(io::read_json(c.config));
  if (c.seed) spec.seed = *c.seed;
  const Phantom ph = generate_phantom(spec);
  io::write_volume(c.out, ph.volume, {{"role", "phantom"}, {"seed", spec.seed}});
  if (!truth_path.empty()) {
    SegmentationResult t;
    t.dims = spec.dims;
    t.positions = ph.truth;
    t.labels.assign(ph.truth.size(), std::vector<int>(spec.dims.columns()));
    for (std::size_t i = 0; i < ph.truth.size(); ++i)
      for (std::size_t a = 0; a < spec.dims.columns(); ++a)
        t.labels[i][a] = static_cast<int>(std::clamp(std::lround(ph.truth[i][a]), 0L, static_cast<long>(spec.dims.z) - 1));
    io::write_surfaces_csv(truth_path, t);
  }
  print({{"volume", c.out}, {"dims", {spec.dims.x, spec.dims.y, spec.dims.z}}, {"seed", spec.seed}});
  return 0;
}

int cmd_gvf(const Common& c, const std::string& input, double mu, int iterations, std::optional<double> dt,
            double delta, bool raw_gradient, const std::string& mapping_out) {
  if (input.empty() || c.out.empty()) fail(ErrorCode::ConfigInvalid, "--input and --out are required");
  const Volume v = io::read_volume(input);
  GvfParams gp{mu, iterations, dt, c.threads};
  const VectorField f = compute_gvf(raw_gradient ? v : edge_map(v), gp);
  const std::string stem = c.out;
  const char* names[3] = {"x", "y", "z"};
  const Volume* comps[3] = {&f.x, &f.y, &f.z};
  json files = json::array();
  for (int i = 0; i < 3; ++i) {
    const std::string path = stem + "_" + names[i] + ".raw";
    io::write_volume(path, *comps[i], {{"role", "gvf"}, {"component", names[i]}});
    files.push_back(path);
  }
  const ShiftedCenters s = normalize_and_shift(f, delta);
  if (!mapping_out.empty()) io::write_mappings_csv(mapping_out, mappings_from_shifts(s));
  print({{"components", files}, {"lambda", s.lambda}, {"max_norm", f.max_norm()}});
  return 0;
}

int cmd_cost(const Common& c, const std::string& input, const std::string& polarity, bool probability) {
  if (input.empty() || c.out.empty()) fail(ErrorCode::ConfigInvalid, "--input and --out are required");
  const Volume v = io::read_volume(input);
  const Volume cost = probability ? probability_to_cost(v) : gradient_cost(v, polarity_from_string(polarity), c.threads);
  io::write_volume(c.out, cost, {{"role", "cost"}});
  print({{"cost", c.out}, {"min", cost.min()}, {"max", cost.max()}});
  return 0;
}

int cmd_segment(const Common& c) {
  require_config(c, "(problem bundle JSON)");
  const Problem p = io::read_problem(c.config);
  CapacityScale scale;
  if (c.scale) scale.scale = *c.scale;
  GraphSpec g;
  const SegmentationResult r = segment(p, scale, &g);
  if (!c.dump_graph.empty()) dump_graph(g, c.dump_graph);
  if (!c.out.empty()) io::write_surfaces_csv(c.out, r);
  json j = io::result_to_json(r);
  if (c.baseline) {
    Problem base = p;
    base.mappings = identity_mappings(p.dims());
    j["baseline"] = io::result_to_json(segment(base, scale));
  }
  print(j);
  return 0;
}

int cmd_oracle(const Common& c) {
  require_config(c, "(problem bundle JSON)");
  const Problem p = io::read_problem(c.config);
  const oracle::Minimum m = oracle::brute_force_minimize(p);
  print({{"energy", m.energy}, {"labels", m.labels}});
  return 0;
}

json evaluate_surfaces(const fs::path& a, const fs::path& r, const Spacing& sp) {
  const auto at = io::read_surfaces_csv(a);
  const auto rt = io::read_surfaces_csv(r);
  if (at.size() != rt.size()) fail(ErrorCode::ColumnSetMismatch, "files hold different surface counts");
  json out = json::array();
  for (const auto& [idx, acols] : at) {
    const auto it = rt.find(idx);
    if (it == rt.end()) fail(ErrorCode::ColumnSetMismatch, "surface " + std::to_string(idx) + " missing in reference");
    const auto& rcols = it->second;
    if (acols.size() != rcols.size()) fail(ErrorCode::ColumnSetMismatch, "surfaces cover different columns");
    std::vector<double> av, rv;
    std::vector<metrics::Point3> ap, rp;
    for (const auto& [xy, pos] : acols) {
      const auto rit = rcols.find(xy);
      if (rit == rcols.end()) fail(ErrorCode::ColumnSetMismatch, "surfaces cover different columns");
      av.push_back(pos);
      rv.push_back(rit->second);
      ap.push_back({static_cast<double>(xy.first), static_cast<double>(xy.second), pos});
      rp.push_back({static_cast<double>(xy.first), static_cast<double>(xy.second), rit->second});
    }
    out.push_back({{"surface", idx}, {"umsp", metrics::umsp(av, rv)}, {"uassd", metrics::uassd(ap, rp, sp)}});
  }
  return {{"kind", "surface"}, {"surfaces", out}};
}

json evaluate_contours(const fs::path& a, const fs::path& r) {
  const auto ac = io::read_contour_csv(a);
  const auto rc = io::read_contour_csv(r);
  if (ac.empty() || rc.empty()) fail(ErrorCode::EmptyContour, "empty contour");
  double w = 0.0, h = 0.0;
  for (const auto* poly : {&ac, &rc})
    for (const auto& p : *poly) {
      w = std::max(w, p.x);
      h = std::max(h, p.y);
    }
  const auto width = static_cast<std::size_t>(std::ceil(w)) + 1, height = static_cast<std::size_t>(std::ceil(h)) + 1;
  const auto am = metrics::rasterize_polygon(ac, width, height);
  const auto rm = metrics::rasterize_polygon(rc, width, height);
  return {{"kind", "contour"},
          {"jaccard", metrics::jaccard(am, rm)},
          {"pad", metrics::pad(metrics::polygon_area(ac), metrics::polygon_area(rc))},
          {"hausdorff", metrics::hausdorff(ac, rc)}};
}

int cmd_evaluate(const std::string& automatic, const std::string& reference, const std::vector<double>& spacing) {
  if (automatic.empty() || reference.empty()) fail(ErrorCode::ConfigInvalid, "--auto and --ref are required");
  Spacing sp;
  if (!spacing.empty()) {
    if (spacing.size() != 3) fail(ErrorCode::ConfigInvalid, "--spacing takes three values");
    sp = {spacing[0], spacing[1], spacing[2]};
  }
  const bool surf_a = io::is_surface_csv(automatic), surf_r = io::is_surface_csv(reference);
  if (surf_a != surf_r) fail(ErrorCode::ConfigInvalid, "cannot compare a surface file with a contour file");
  print(surf_a ? evaluate_surfaces(automatic, reference, sp) : evaluate_contours(automatic, reference));
  return 0;
}

int cmd_pipeline(const Common& c) {
  require_config(c, "(pipeline JSON)");
  PipelineConfig cfg = read_pipeline_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads > 1) cfg.threads = c.threads;
  if (c.scale) cfg.scale.scale = *c.scale;
  if (c.baseline) cfg.baseline = true;
  GraphSpec g;
  const PipelineResult r = run_pipeline(cfg, c.dump_graph.empty() ? nullptr : &g);
  if (!c.dump_graph.empty()) dump_graph(g, c.dump_graph);
  const fs::path dir = c.out.empty() ? fs::path("optsurf-out") : fs::path(c.out);
  emit_report(r, dir);
  json summary = report_json(r);
  print({{"output", dir.string()}, {"energy", summary["energy"]}, {"summary", summary.value("summary", json::object())}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal multi-surface segmentation in irregularly sampled column space"};
  app.set_version_flag("--version", std::string(OPTSURF_VERSION));
  app.require_subcommand(1);
  app.fallthrough();

  Common c;
  app.add_option("--config", c.config, "JSON input (phantom spec, problem bundle or pipeline config)");
  app.add_option("--seed", c.seed, "Random seed override");
  app.add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--scale", c.scale, "Fixed-point capacity scale")->check(CLI::PositiveNumber);
  app.add_flag("--baseline", c.baseline, "Also run the regular-grid comparison");
  app.add_option("--dump-graph", c.dump_graph, "Write the flow graph in DIMACS max-flow format");
  app.add_option("--out", c.out, "Output path (file or directory, per subcommand)");

  auto* phantom = app.add_subcommand("phantom", "Render a synthetic layered volume");
  std::string truth_path;
  phantom->add_option("--truth", truth_path, "Write ground-truth surfaces as CSV");

  auto* gvf = app.add_subcommand("gvf", "Compute a GVF field and the induced column mappings");
  std::string gvf_input, mapping_out;
  double mu = 0.2, delta = 1.0;
  int iterations = 80;
  std::optional<double> dt;
  bool raw_gradient = false;
  gvf->add_option("--input", gvf_input, "Input volume (.raw with .json sidecar)");
  gvf->add_option("--mu", mu, "Diffusion weight");
  gvf->add_option("--iterations", iterations, "Explicit iterations");
  gvf->add_option("--dt", dt, "Time step (defaults to the stable step)");
  gvf->add_option("--delta", delta, "Voxel size used to normalize the shift");
  gvf->add_flag("--raw-gradient", raw_gradient, "Diffuse the gradient of the input itself rather than of its edge map");
  gvf->add_option("--mappings", mapping_out, "Write the induced column mappings as CSV");

  auto* cost = app.add_subcommand("cost", "Build a cost volume");
  std::string cost_input, polarity = "dark-to-bright";
  bool probability = false;
  cost->add_option("--input", cost_input, "Input volume");
  cost->add_option("--polarity", polarity, "dark-to-bright | bright-to-dark");
  cost->add_flag("--probability", probability, "Treat the input as a probability map: D = (1 - p) * 255");

  auto* seg = app.add_subcommand("segment", "Segment a problem bundle by minimum cut");
  auto* orc = app.add_subcommand("oracle", "Exhaustively minimize a small problem bundle");

  auto* eval = app.add_subcommand("evaluate", "Compare surfaces or contours against a reference");
  std::string auto_path, ref_path;
  std::vector<double> spacing;
  eval->add_option("--auto", auto_path, "Automatic result CSV");
  eval->add_option("--ref", ref_path, "Reference CSV");
  eval->add_option("--spacing", spacing, "Physical voxel spacing sx sy sz")->expected(3);

  auto* pipe = app.add_subcommand("pipeline", "Run the full workflow and write a report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*phantom) return cmd_phantom(c, truth_path);
    if (*gvf) return cmd_gvf(c, gvf_input, mu, iterations, dt, delta, raw_gradient, mapping_out);
    if (*cost) return cmd_cost(c, cost_input, polarity, probability);
    if (*seg) return cmd_segment(c);
    if (*orc) return cmd_oracle(c);
    if (*eval) return cmd_evaluate(auto_path, ref_path, spacing);
    if (*pipe) return cmd_pipeline(c);
  } catch (const Error& e) {
    std::cerr << "optsurf: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "optsurf: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
