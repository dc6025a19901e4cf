#pragma once

// File formats: raw float32 volumes with a JSON sidecar, column-mapping CSV,
// surface/contour CSV and JSON problem bundles.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "optsurf/core.hpp"
#include "optsurf/metrics.hpp"

namespace optsurf::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline fs::path sidecar_path(const fs::path& raw) {
  fs::path p = raw;
  p.replace_extension(".json");
  return p;
}

/// Writes <path> (little-endian float32, z fastest) and its JSON sidecar.
inline void write_volume(const fs::path& path, const Volume& v, const json& extra = json::object()) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  std::vector<char> bytes(v.data().size() * 4);
  for (std::size_t i = 0; i < v.data().size(); ++i) {
    auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v.data()[i]));
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    std::memcpy(bytes.data() + 4 * i, &bits, 4);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "failed writing " + path.string());

  json side = extra;
  side["dims"] = {v.dims().x, v.dims().y, v.dims().z};
  side["spacing"] = {v.spacing().x, v.spacing().y, v.spacing().z};
  std::ofstream js(sidecar_path(path));
  if (!js) fail(ErrorCode::IoError, "cannot write sidecar for " + path.string());
  js << side.dump(2) << "\n";
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::IoError, "invalid JSON in " + path.string() + ": " + e.what());
  }
}

inline Volume read_volume(const fs::path& path) {
  const json side = read_json(sidecar_path(path));
  Dims d;
  Spacing s;
  try {
    const auto& dims = side.at("dims");
    d = {dims.at(0).get<std::size_t>(), dims.at(1).get<std::size_t>(), dims.at(2).get<std::size_t>()};
    if (side.contains("spacing")) {
      const auto& sp = side.at("spacing");
      s = {sp.at(0).get<double>(), sp.at(1).get<double>(), sp.at(2).get<double>()};
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::IoError, "malformed sidecar for " + path.string() + ": " + e.what());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<char> bytes(d.voxels() * 4);
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    fail(ErrorCode::IoError, path.string() + " is shorter than its dims require");
  std::vector<double> data(d.voxels());
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, bytes.data() + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    data[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return Volume(d, s, std::move(data));
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

inline double parse_double(const std::string& s, const fs::path& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail(ErrorCode::IoError, "bad number '" + s + "' in " + where.string());
  return v;
}

/// Rows of a CSV file keyed by header name.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const fs::path& where) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    fail(ErrorCode::IoError, where.string() + " lacks column '" + name + "'");
  }
  bool has(const std::string& name) const { return std::find(header.begin(), header.end(), name) != header.end(); }
};

inline Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::IoError, path.string() + " is empty");
  t.header = split_csv(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto row = split_csv(line);
    if (row.size() != t.header.size()) fail(ErrorCode::IoError, "ragged row in " + path.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace detail

inline void write_mappings_csv(const fs::path& path, const std::vector<ColumnMapping>& maps) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << "x,y,k,position\n";
  for (const auto& m : maps)
    for (std::size_t k = 0; k < m.size(); ++k)
      out << m.x << "," << m.y << "," << k << "," << format_double(m.positions[k]) << "\n";
}

/// Reads a complete mapping set for `dims`, validating every column.
inline std::vector<ColumnMapping> read_mappings_csv(const fs::path& path, const Dims& dims) {
  const auto t = detail::read_table(path);
  const std::size_t cx = t.column("x", path), cy = t.column("y", path), ck = t.column("k", path),
                    cp = t.column("position", path);
  std::vector<ColumnMapping> maps = identity_mappings(dims);
  std::vector<std::size_t> seen(dims.voxels(), 0);
  for (const auto& row : t.rows) {
    const auto x = static_cast<std::size_t>(detail::parse_double(row[cx], path));
    const auto y = static_cast<std::size_t>(detail::parse_double(row[cy], path));
    const auto k = static_cast<std::size_t>(detail::parse_double(row[ck], path));
    if (x >= dims.x || y >= dims.y || k >= dims.z) fail(ErrorCode::IoError, "mapping row outside the volume");
    maps[column_index(dims, x, y)].positions[k] = detail::parse_double(row[cp], path);
    ++seen[(column_index(dims, x, y)) * dims.z + k];
  }
  for (std::size_t s : seen)
    if (s != 1) fail(ErrorCode::IoError, path.string() + " must list every (x,y,k) exactly once");
  for (const auto& m : maps) validate_mapping(m);
  return maps;
}

/// x,y,surface,label,position rows, surface-major.
inline void write_surfaces_csv(const fs::path& path, const SegmentationResult& r) {
  if (r.labels.empty()) fail(ErrorCode::EmptySurface, "no surfaces to write");
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << "x,y,surface,label,position\n";
  for (std::size_t i = 0; i < r.labels.size(); ++i)
    for (std::size_t x = 0; x < r.dims.x; ++x)
      for (std::size_t y = 0; y < r.dims.y; ++y) {
        const std::size_t a = column_index(r.dims, x, y);
        out << x << "," << y << "," << i << "," << r.labels[i][a] << "," << format_double(r.positions[i][a]) << "\n";
      }
}

/// Surfaces keyed by index; each maps (x, y) to a position.
using SurfaceTable = std::map<std::size_t, std::map<std::pair<std::size_t, std::size_t>, double>>;

inline SurfaceTable read_surfaces_csv(const fs::path& path) {
  const auto t = detail::read_table(path);
  const std::size_t cx = t.column("x", path), cy = t.column("y", path), cp = t.column("position", path);
  const bool has_surface = t.has("surface");
  const std::size_t cs = has_surface ? t.column("surface", path) : 0;
  SurfaceTable out;
  for (const auto& row : t.rows) {
    const auto s = has_surface ? static_cast<std::size_t>(detail::parse_double(row[cs], path)) : 0;
    const auto x = static_cast<std::size_t>(detail::parse_double(row[cx], path));
    const auto y = static_cast<std::size_t>(detail::parse_double(row[cy], path));
    out[s][{x, y}] = detail::parse_double(row[cp], path);
  }
  return out;
}

inline std::vector<metrics::Point2> read_contour_csv(const fs::path& path) {
  const auto t = detail::read_table(path);
  const std::size_t cx = t.column("x", path), cy = t.column("y", path);
  std::vector<metrics::Point2> pts;
  for (const auto& row : t.rows) pts.push_back({detail::parse_double(row[cx], path), detail::parse_double(row[cy], path)});
  return pts;
}

inline bool is_surface_csv(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  if (!in || !std::getline(in, line)) fail(ErrorCode::IoError, "cannot read " + path.string());
  const auto header = detail::split_csv(line);
  return std::find(header.begin(), header.end(), "position") != header.end();
}

inline ConvexPenalty penalty_from_json(const json& j) {
  const std::string kind = j.value("kind", std::string("linear"));
  const double w = j.value("weight", 1.0);
  if (kind == "linear") return ConvexPenalty::linear(w);
  if (kind == "quadratic") return ConvexPenalty::quadratic(w);
  if (kind == "piecewise-linear" || kind == "piecewise")
    return ConvexPenalty::piecewise_linear(w, j.at("breakpoints").get<std::vector<double>>(),
                                           j.at("slopes").get<std::vector<double>>());
  fail(ErrorCode::ConfigInvalid, "unknown penalty kind '" + kind + "'");
}

inline json penalty_to_json(const ConvexPenalty& p) {
  json j;
  switch (p.kind()) {
    case PenaltyKind::Linear: j["kind"] = "linear"; break;
    case PenaltyKind::Quadratic: j["kind"] = "quadratic"; break;
    case PenaltyKind::PiecewiseLinear:
      j["kind"] = "piecewise-linear";
      j["breakpoints"] = p.breakpoints();
      j["slopes"] = p.slopes();
      break;
  }
  j["weight"] = p.weight();
  return j;
}

/// Problem bundle:
///   {"dims": [X,Y,Z], "spacing": [..],
///    "costs": [ <flat z-fastest array> | "volume.raw", ... ],
///    "mappings": "mapping.csv" | [[L(0..Z-1)] per column] | absent (regular grid),
///    "penalty": {...} | "penalties": [{...}, ...],
///    "separation": [d_12, ...]}
/// Relative paths resolve against the bundle's directory.
inline Problem problem_from_json(const json& j, const fs::path& base_dir = {}) {
  try {
    Problem p;
    Dims d;
    const auto& dims = j.at("dims");
    d = {dims.at(0).get<std::size_t>(), dims.at(1).get<std::size_t>(), dims.at(2).get<std::size_t>()};
    Spacing s;
    if (j.contains("spacing")) {
      const auto& sp = j.at("spacing");
      s = {sp.at(0).get<double>(), sp.at(1).get<double>(), sp.at(2).get<double>()};
    }
    for (const auto& c : j.at("costs")) {
      if (c.is_string()) {
        Volume v = read_volume(base_dir / c.get<std::string>());
        if (!(v.dims() == d)) fail(ErrorCode::DimMismatch, "cost volume dims differ from the bundle dims");
        p.costs.push_back(std::move(v));
      } else {
        p.costs.emplace_back(d, s, c.get<std::vector<double>>());
      }
    }
    if (!j.contains("mappings")) {
      p.mappings = identity_mappings(d);
    } else if (j.at("mappings").is_string()) {
      p.mappings = read_mappings_csv(base_dir / j.at("mappings").get<std::string>(), d);
    } else {
      const auto& ms = j.at("mappings");
      if (ms.size() != d.columns()) fail(ErrorCode::ConfigInvalid, "need one mapping per column");
      for (std::size_t x = 0; x < d.x; ++x)
        for (std::size_t y = 0; y < d.y; ++y)
          p.mappings.push_back({x, y, ms.at(column_index(d, x, y)).get<std::vector<double>>()});
    }
    if (j.contains("penalties")) {
      for (const auto& pj : j.at("penalties")) p.penalties.push_back(penalty_from_json(pj));
    } else {
      const ConvexPenalty psi = penalty_from_json(j.value("penalty", json::object()));
      p.penalties.assign(p.costs.size(), psi);
    }
    p.separation.min_gap = j.value("separation", std::vector<double>{});
    if (p.separation.min_gap.empty() && p.costs.size() > 1) p.separation.min_gap.assign(p.costs.size() - 1, 0.0);
    p.validate();
    return p;
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigInvalid, std::string("malformed problem bundle: ") + e.what());
  }
}

inline Problem read_problem(const fs::path& path) { return problem_from_json(read_json(path), path.parent_path()); }

inline json result_to_json(const SegmentationResult& r) {
  json j;
  j["energy"] = r.energy;
  j["labels"] = r.labels;
  j["positions"] = r.positions;
  j["dims"] = {r.dims.x, r.dims.y, r.dims.z};
  return j;
}

}  // namespace optsurf::io
