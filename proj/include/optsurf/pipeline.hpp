#pragma once

// End-to-end segmentation workflow driven by a single JSON configuration:
// phantom or volume input, optional downsampling and smoothing, cost
// construction, GVF displacement, irregular-grid segmentation, an optional
// regular-grid comparison run, and accuracy metrics against ground truth.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "optsurf/core.hpp"
#include "optsurf/cost.hpp"
#include "optsurf/displacement.hpp"
#include "optsurf/graphbuild.hpp"
#include "optsurf/io.hpp"
#include "optsurf/maxflow.hpp"
#include "optsurf/metrics.hpp"
#include "optsurf/phantom.hpp"

#ifndef OPTSURF_VERSION
#define OPTSURF_VERSION "0.0.0"
#endif

namespace optsurf {

using json = nlohmann::json;

/// Runs `fn`, re-raising library errors with the stage name prepended.
template <typename Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    std::string msg = e.what();
    const std::string prefix = std::string(to_string(e.code())) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    throw Error(e.code(), "stage '" + stage + "': " + msg);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, "stage '" + stage + "': " + e.what());
  }
}

inline SurfaceSpec surface_from_json(const json& j) {
  SurfaceSpec s;
  const std::string kind = j.value("kind", std::string("plane"));
  if (kind == "plane") {
    s.kind = SurfaceSpec::Kind::Plane;
    if (j.contains("coefficients")) {
      const auto c = j.at("coefficients").get<std::vector<double>>();
      if (c.empty() || c.size() > 3) fail(ErrorCode::ConfigInvalid, "plane coefficients are [c0, cx, cy]");
      s.offset = c[0];
      s.slope_x = c.size() > 1 ? c[1] : 0.0;
      s.slope_y = c.size() > 2 ? c[2] : 0.0;
    } else {
      s.offset = j.value("offset", 0.0);
      s.slope_x = j.value("slope_x", 0.0);
      s.slope_y = j.value("slope_y", 0.0);
    }
  } else if (kind == "sinusoid") {
    s.kind = SurfaceSpec::Kind::Sinusoid;
    if (j.contains("coefficients")) {
      const auto c = j.at("coefficients").get<std::vector<double>>();
      if (c.size() < 3 || c.size() > 4)
        fail(ErrorCode::ConfigInvalid, "sinusoid coefficients are [offset, amplitude, period, phase]");
      s.offset = c[0];
      s.amplitude = c[1];
      s.period = c[2];
      s.phase = c.size() > 3 ? c[3] : 0.0;
    } else {
      s.offset = j.value("offset", 0.0);
      s.amplitude = j.value("amplitude", 0.0);
      s.period = j.value("period", 1.0);
      s.phase = j.value("phase", 0.0);
    }
    s.along_y = j.value("axis", std::string("x")) == "y";
    if (!(s.period > 0.0)) fail(ErrorCode::ConfigInvalid, "sinusoid period must be > 0");
  } else {
    fail(ErrorCode::ConfigInvalid, "unknown surface kind '" + kind + "'");
  }
  return s;
}

inline PhantomSpec phantom_from_json(const json& j) {
  try {
    PhantomSpec p;
    const auto& dims = j.at("dims");
    p.dims = {dims.at(0).get<std::size_t>(), dims.at(1).get<std::size_t>(), dims.at(2).get<std::size_t>()};
    if (p.dims.x == 0 || p.dims.y == 0 || p.dims.z == 0) fail(ErrorCode::ConfigInvalid, "phantom dims must be positive");
    if (j.contains("spacing")) {
      const auto& sp = j.at("spacing");
      p.spacing = {sp.at(0).get<double>(), sp.at(1).get<double>(), sp.at(2).get<double>()};
    }
    for (const auto& s : j.at("surfaces")) p.surfaces.push_back(surface_from_json(s));
    p.intensities = j.at("intensities").get<std::vector<double>>();
    p.noise_sigma = j.value("noise_sigma", 0.0);
    p.seed = j.value("seed", std::uint64_t{0});
    return p;
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigInvalid, std::string("malformed phantom spec: ") + e.what());
  }
}

/// How one surface's cost volume is obtained.
struct CostSpec {
  enum class Kind { Gradient, Probability, Volume };
  Kind kind = Kind::Gradient;
  Polarity polarity = Polarity::DarkToBright;
  std::string path;  // Probability / Volume inputs
};

inline Polarity polarity_from_string(const std::string& s) {
  if (s == "dark-to-bright") return Polarity::DarkToBright;
  if (s == "bright-to-dark") return Polarity::BrightToDark;
  fail(ErrorCode::ConfigInvalid, "polarity must be 'dark-to-bright' or 'bright-to-dark', got '" + s + "'");
}

inline std::string to_string(Polarity p) { return p == Polarity::DarkToBright ? "dark-to-bright" : "bright-to-dark"; }

struct PipelineConfig {
  std::optional<PhantomSpec> phantom;
  std::string volume_path;
  std::size_t downsample[3] = {1, 1, 1};
  double gaussian_sigma = 0.0;
  std::vector<CostSpec> costs;
  std::vector<ConvexPenalty> penalties;
  std::vector<double> separation;
  bool gvf_enabled = true;
  GvfParams gvf;
  double delta = 1.0;
  CapacityScale scale;
  bool baseline = false;
  std::uint64_t seed = 0;
  int threads = 1;
  json raw;  // the document as given, echoed into the report
};

/// Parses the pipeline document; relative paths resolve against `base_dir`.
inline PipelineConfig pipeline_config_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  try {
    PipelineConfig c;
    c.raw = j;
    const json& input = j.at("input");
    if (input.contains("phantom")) {
      c.phantom = phantom_from_json(input.at("phantom"));
    } else if (input.contains("volume")) {
      c.volume_path = (base_dir / input.at("volume").get<std::string>()).string();
    } else {
      fail(ErrorCode::ConfigInvalid, "input needs a 'phantom' or a 'volume' entry");
    }
    if (j.contains("downsample")) {
      const auto f = j.at("downsample").get<std::vector<std::size_t>>();
      if (f.size() != 3) fail(ErrorCode::ConfigInvalid, "downsample takes three factors [fx, fy, fz]");
      for (int i = 0; i < 3; ++i) c.downsample[i] = f[static_cast<std::size_t>(i)];
    }
    if (j.contains("preprocess")) c.gaussian_sigma = j.at("preprocess").value("gaussian_sigma", 0.0);
    for (const auto& cj : j.at("costs")) {
      CostSpec s;
      const std::string kind = cj.value("kind", std::string("gradient"));
      if (kind == "gradient") {
        s.kind = CostSpec::Kind::Gradient;
        s.polarity = polarity_from_string(cj.value("polarity", std::string("dark-to-bright")));
      } else if (kind == "probability" || kind == "volume") {
        s.kind = kind == "probability" ? CostSpec::Kind::Probability : CostSpec::Kind::Volume;
        s.path = (base_dir / cj.at("path").get<std::string>()).string();
      } else {
        fail(ErrorCode::ConfigInvalid, "unknown cost kind '" + kind + "'");
      }
      c.costs.push_back(s);
    }
    if (c.costs.empty()) fail(ErrorCode::ConfigInvalid, "at least one surface cost is required");
    if (j.contains("penalties")) {
      for (const auto& pj : j.at("penalties")) c.penalties.push_back(io::penalty_from_json(pj));
      if (c.penalties.size() != c.costs.size()) fail(ErrorCode::ConfigInvalid, "need one penalty per surface");
    } else {
      c.penalties.assign(c.costs.size(), io::penalty_from_json(j.value("penalty", json::object())));
    }
    c.separation = j.value("separation", std::vector<double>(c.costs.size() - 1, 0.0));
    if (c.separation.size() + 1 != c.costs.size())
      fail(ErrorCode::ConfigInvalid, "need one separation value per adjacent surface pair");
    if (j.contains("gvf")) {
      const json& g = j.at("gvf");
      c.gvf_enabled = g.value("enabled", true);
      c.gvf.mu = g.value("mu", c.gvf.mu);
      c.gvf.iterations = g.value("iterations", c.gvf.iterations);
      if (g.contains("dt") && !g.at("dt").is_null()) c.gvf.dt = g.at("dt").get<double>();
      c.delta = g.value("delta", 1.0);
    }
    c.scale.scale = j.value("scale", c.scale.scale);
    if (c.scale.scale < 1) fail(ErrorCode::ConfigInvalid, "scale must be >= 1");
    c.baseline = j.value("baseline", false);
    c.seed = j.value("seed", c.phantom ? c.phantom->seed : std::uint64_t{0});
    c.threads = j.value("threads", 1);
    if (c.threads < 1) fail(ErrorCode::ConfigInvalid, "threads must be >= 1");
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigInvalid, std::string("malformed pipeline config: ") + e.what());
  }
}

inline PipelineConfig read_pipeline_config(const std::filesystem::path& path) {
  return pipeline_config_from_json(io::read_json(path), path.parent_path());
}

struct SurfaceMetrics {
  double umsp = 0.0;
  double uassd = 0.0;
};

struct PipelineResult {
  SegmentationResult proposed;
  std::optional<SegmentationResult> baseline;
  std::optional<std::vector<std::vector<double>>> truth;  // [surface][column], working-grid units
  std::vector<SurfaceMetrics> proposed_metrics;
  std::vector<SurfaceMetrics> baseline_metrics;
  Dims dims;
  Spacing spacing;
  double gvf_lambda = 0.0;
  PipelineConfig config;
};

namespace detail {

inline std::vector<SurfaceMetrics> surface_metrics(const SegmentationResult& r,
                                                   const std::vector<std::vector<double>>& truth,
                                                   const Spacing& spacing) {
  std::vector<SurfaceMetrics> out;
  for (std::size_t i = 0; i < r.positions.size(); ++i) {
    const auto a = metrics::surface_points(r.dims, r.positions[i]);
    const auto t = metrics::surface_points(r.dims, truth[i]);
    out.push_back({metrics::umsp(r.positions[i], truth[i]), metrics::uassd(a, t, spacing)});
  }
  return out;
}

}  // namespace detail

/// `graph_out`, when given, receives the proposed run's graph.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, GraphSpec* graph_out = nullptr) {
  PipelineResult res;
  res.config = cfg;

  std::optional<Phantom> phantom;
  Volume volume = run_stage("input", [&] {
    if (cfg.phantom) {
      PhantomSpec spec = *cfg.phantom;
      spec.seed = cfg.seed;
      phantom = generate_phantom(spec);
      return phantom->volume;
    }
    return io::read_volume(cfg.volume_path);
  });

  volume = run_stage("downsample", [&] {
    return downsample(volume, cfg.downsample[0], cfg.downsample[1], cfg.downsample[2]);
  });
  const Dims d = volume.dims();
  res.dims = d;
  res.spacing = volume.spacing();
  if (phantom) {
    if (cfg.downsample[0] != 1 || cfg.downsample[1] != 1)
      fail(ErrorCode::ConfigInvalid, "ground-truth comparison supports downsampling along z only");
    std::vector<std::vector<double>> truth(phantom->truth.size(), std::vector<double>(d.columns()));
    for (std::size_t i = 0; i < truth.size(); ++i)
      for (std::size_t a = 0; a < d.columns(); ++a)
        truth[i][a] = downsample_position(phantom->truth[i][a], cfg.downsample[2]);
    res.truth = std::move(truth);
  }

  volume = run_stage("preprocess", [&] { return gaussian_smooth(volume, cfg.gaussian_sigma, cfg.threads); });

  const std::vector<Volume> costs = run_stage("cost", [&] {
    std::vector<Volume> out;
    for (const CostSpec& c : cfg.costs) {
      switch (c.kind) {
        case CostSpec::Kind::Gradient: out.push_back(gradient_cost(volume, c.polarity, cfg.threads)); break;
        case CostSpec::Kind::Probability: {
          Volume p = downsample(io::read_volume(c.path), cfg.downsample[0], cfg.downsample[1], cfg.downsample[2]);
          out.push_back(probability_to_cost(p));
          break;
        }
        case CostSpec::Kind::Volume:
          out.push_back(downsample(io::read_volume(c.path), cfg.downsample[0], cfg.downsample[1], cfg.downsample[2]));
          break;
      }
      if (!(out.back().dims() == d)) fail(ErrorCode::DimMismatch, "cost volume dims differ from the input volume");
    }
    return out;
  });

  const SeparationConstraint sep{cfg.separation};
  const bool displace = cfg.gvf_enabled && cfg.gvf.iterations > 0;

  Problem proposed = run_stage("gvf", [&] {
    if (!displace) return Problem{costs, identity_mappings(d), cfg.penalties, sep};
    GvfParams gp = cfg.gvf;
    gp.threads = cfg.threads;
    const VectorField f = compute_gvf(edge_map(volume), gp);
    const ShiftedCenters s = normalize_and_shift(f, cfg.delta);
    res.gvf_lambda = s.lambda;
    Problem p{{}, mappings_from_shifts(s), cfg.penalties, sep};
    for (const Volume& c : costs) p.costs.push_back(deform_cost_volume(c, s, cfg.threads));
    return p;
  });

  res.proposed = run_stage("segment", [&] { return segment(proposed, cfg.scale, graph_out); });

  if (cfg.baseline) {
    res.baseline = run_stage("baseline", [&] {
      if (!displace) return res.proposed;
      return segment(Problem{costs, identity_mappings(d), cfg.penalties, sep}, cfg.scale);
    });
  }

  if (res.truth) {
    run_stage("metrics", [&] {
      if (res.truth->size() != res.proposed.surface_count())
        fail(ErrorCode::ColumnSetMismatch, "phantom surface count differs from the number of costs");
      res.proposed_metrics = detail::surface_metrics(res.proposed, *res.truth, res.spacing);
      if (res.baseline) res.baseline_metrics = detail::surface_metrics(*res.baseline, *res.truth, res.spacing);
    });
  }
  return res;
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Report document. Keys are sorted, so only `timestamp` varies between
/// reruns of the same configuration.
inline json report_json(const PipelineResult& r, const std::string& timestamp = utc_timestamp()) {
  if (r.proposed.labels.empty()) fail(ErrorCode::EmptySurface, "no surfaces to report");
  const PipelineConfig& c = r.config;
  json j;
  j["timestamp"] = timestamp;
  j["versions"] = {{"optsurf", OPTSURF_VERSION}, {"json", "nlohmann " + std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                             std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                             std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  j["seed"] = c.seed;
  json params;
  params["downsample"] = {c.downsample[0], c.downsample[1], c.downsample[2]};
  params["gaussian_sigma"] = c.gaussian_sigma;
  params["separation"] = c.separation;
  json pens = json::array();
  for (const auto& p : c.penalties) pens.push_back(io::penalty_to_json(p));
  params["penalties"] = pens;
  params["gvf"] = {{"enabled", c.gvf_enabled && c.gvf.iterations > 0},
                   {"mu", c.gvf.mu},
                   {"iterations", c.gvf.iterations},
                   {"dt", c.gvf.dt ? json(*c.gvf.dt) : json(nullptr)},
                   {"delta", c.delta},
                   {"lambda", r.gvf_lambda}};
  params["scale"] = c.scale.scale;
  params["baseline"] = c.baseline;
  params["threads"] = c.threads;
  j["parameters"] = params;
  j["config"] = c.raw;
  j["dims"] = {r.dims.x, r.dims.y, r.dims.z};
  j["spacing"] = {r.spacing.x, r.spacing.y, r.spacing.z};
  j["energy"] = {{"proposed", r.proposed.energy}, {"baseline", r.baseline ? json(r.baseline->energy) : json(nullptr)}};

  json surfaces = json::array();
  for (std::size_t i = 0; i < r.proposed.surface_count(); ++i) {
    json s;
    s["index"] = i;
    if (!r.proposed_metrics.empty()) {
      s["proposed"] = {{"umsp", r.proposed_metrics[i].umsp}, {"uassd", r.proposed_metrics[i].uassd}};
      if (!r.baseline_metrics.empty())
        s["baseline"] = {{"umsp", r.baseline_metrics[i].umsp}, {"uassd", r.baseline_metrics[i].uassd}};
    }
    surfaces.push_back(s);
  }
  j["surfaces"] = surfaces;
  if (!r.proposed_metrics.empty()) {
    auto mean = [](const std::vector<SurfaceMetrics>& m, double SurfaceMetrics::*field) {
      double acc = 0.0;
      for (const auto& e : m) acc += e.*field;
      return acc / static_cast<double>(m.size());
    };
    j["summary"]["proposed"] = {{"umsp", mean(r.proposed_metrics, &SurfaceMetrics::umsp)},
                                {"uassd", mean(r.proposed_metrics, &SurfaceMetrics::uassd)}};
    if (!r.baseline_metrics.empty())
      j["summary"]["baseline"] = {{"umsp", mean(r.baseline_metrics, &SurfaceMetrics::umsp)},
                                  {"uassd", mean(r.baseline_metrics, &SurfaceMetrics::uassd)}};
  }
  return j;
}

/// Per-column truth / baseline / proposed positions; absent values are blank.
inline void write_plotdata_csv(const std::filesystem::path& path, const PipelineResult& r) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << "x,y,surface,truth,baseline,proposed\n";
  const Dims& d = r.dims;
  for (std::size_t i = 0; i < r.proposed.surface_count(); ++i)
    for (std::size_t x = 0; x < d.x; ++x)
      for (std::size_t y = 0; y < d.y; ++y) {
        const std::size_t a = column_index(d, x, y);
        out << x << "," << y << "," << i << ",";
        if (r.truth) out << io::format_double((*r.truth)[i][a]);
        out << ",";
        if (r.baseline) out << io::format_double(r.baseline->positions[i][a]);
        out << "," << io::format_double(r.proposed.positions[i][a]) << "\n";
      }
  if (!out) fail(ErrorCode::IoError, "failed writing " + path.string());
}

/// Writes report.json, surfaces.csv and plotdata.csv into `dir`.
inline void emit_report(const PipelineResult& r, const std::filesystem::path& dir,
                        const std::string& timestamp = utc_timestamp()) {
  if (r.proposed.labels.empty()) fail(ErrorCode::EmptySurface, "no surfaces to report");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  const json report = report_json(r, timestamp);
  {
    std::ofstream out(dir / "report.json");
    if (!out) fail(ErrorCode::IoError, "cannot write " + (dir / "report.json").string());
    out << report.dump(2) << "\n";
  }
  io::write_surfaces_csv(dir / "surfaces.csv", r.proposed);
  write_plotdata_csv(dir / "plotdata.csv", r);
}

}  // namespace optsurf
