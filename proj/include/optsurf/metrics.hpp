#pragma once

// Segmentation accuracy measures: surface positioning errors for layered
// surfaces, and overlap / area / contour distances for 2-D regions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "optsurf/core.hpp"

namespace optsurf::metrics {

struct Point2 {
  double x = 0.0, y = 0.0;
};
struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

/// Unsigned mean surface positioning error, in mapping units.
inline double umsp(std::span<const double> automatic, std::span<const double> reference) {
  if (automatic.size() != reference.size())
    fail(ErrorCode::ColumnSetMismatch, "surfaces cover different column counts");
  if (automatic.empty()) fail(ErrorCode::EmptySurface, "no columns");
  double acc = 0.0;
  for (std::size_t i = 0; i < automatic.size(); ++i) acc += std::abs(automatic[i] - reference[i]);
  return acc / static_cast<double>(automatic.size());
}

/// One point per column at (x, y, position), in index units.
inline std::vector<Point3> surface_points(const Dims& dims, std::span<const double> positions) {
  if (positions.size() != dims.columns()) fail(ErrorCode::ColumnSetMismatch, "one position per column expected");
  std::vector<Point3> pts;
  pts.reserve(positions.size());
  for (std::size_t x = 0; x < dims.x; ++x)
    for (std::size_t y = 0; y < dims.y; ++y)
      pts.push_back({static_cast<double>(x), static_cast<double>(y), positions[column_index(dims, x, y)]});
  return pts;
}

namespace detail {

inline double dist(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Uniform-grid bucketing for exact nearest-neighbour distances.
class PointGrid {
 public:
  explicit PointGrid(std::span<const Point3> pts) : pts_(pts) {
    lo_ = hi_ = pts.front();
    for (const auto& p : pts) {
      lo_ = {std::min(lo_.x, p.x), std::min(lo_.y, p.y), std::min(lo_.z, p.z)};
      hi_ = {std::max(hi_.x, p.x), std::max(hi_.y, p.y), std::max(hi_.z, p.z)};
    }
    const double extent = std::max({hi_.x - lo_.x, hi_.y - lo_.y, hi_.z - lo_.z});
    cell_ = extent > 0.0 ? extent / std::sqrt(static_cast<double>(pts.size())) : 1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) buckets_[key(cell_of(pts[i]))].push_back(i);
    const auto top = cell_of(hi_);
    max_ring_ = std::max({top[0], top[1], top[2]}) + 1;
  }

  double nearest(const Point3& q) const {
    const auto c = cell_of(q);
    double best = std::numeric_limits<double>::infinity();
    // Points outside ring r are at least r * cell_ away (per-axis bound).
    const long far = max_ring_ + std::max({std::abs(c[0]), std::abs(c[1]), std::abs(c[2])}) + 1;
    for (long r = 0; r <= far; ++r) {
      for (long i = -r; i <= r; ++i)
        for (long j = -r; j <= r; ++j)
          for (long k = -r; k <= r; ++k) {
            if (std::max({std::abs(i), std::abs(j), std::abs(k)}) != r) continue;
            const auto it = buckets_.find(key({c[0] + i, c[1] + j, c[2] + k}));
            if (it == buckets_.end()) continue;
            for (std::size_t idx : it->second) best = std::min(best, dist(q, pts_[idx]));
          }
      if (best <= static_cast<double>(r) * cell_) break;
    }
    return best;
  }

 private:
  std::array<long, 3> cell_of(const Point3& p) const {
    return {static_cast<long>(std::floor((p.x - lo_.x) / cell_)), static_cast<long>(std::floor((p.y - lo_.y) / cell_)),
            static_cast<long>(std::floor((p.z - lo_.z) / cell_))};
  }
  static std::int64_t key(const std::array<long, 3>& c) {
    return (static_cast<std::int64_t>(c[0]) * 2097152 + c[1]) * 2097152 + c[2];
  }

  std::span<const Point3> pts_;
  Point3 lo_, hi_;
  double cell_ = 1.0;
  long max_ring_ = 0;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> buckets_;
};

inline constexpr std::size_t kBruteForceLimit = 10000;

inline double mean_nearest(std::span<const Point3> from, std::span<const Point3> to) {
  double acc = 0.0;
  if (std::max(from.size(), to.size()) < kBruteForceLimit) {
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, dist(p, q));
      acc += best;
    }
  } else {
    const PointGrid grid(to);
    for (const auto& p : from) acc += grid.nearest(p);
  }
  return acc / static_cast<double>(from.size());
}

}  // namespace detail

/// Unsigned average symmetric surface distance in physical units: the mean
/// nearest-point distance in each direction, averaged over both directions.
inline double uassd(std::span<const Point3> automatic, std::span<const Point3> reference, const Spacing& spacing) {
  if (automatic.empty() || reference.empty()) fail(ErrorCode::EmptySurface, "empty surface point set");
  auto physical = [&](std::span<const Point3> pts) {
    std::vector<Point3> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back({p.x * spacing.x, p.y * spacing.y, p.z * spacing.z});
    return out;
  };
  const auto a = physical(automatic);
  const auto r = physical(reference);
  return 0.5 * (detail::mean_nearest(a, r) + detail::mean_nearest(r, a));
}

struct BinaryMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> data;  // row-major, nonzero = inside

  BinaryMask() = default;
  BinaryMask(std::size_t w, std::size_t h) : width(w), height(h), data(w * h, 0) {}
  std::uint8_t& at(std::size_t x, std::size_t y) { return data[y * width + x]; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto v) { return v != 0; }));
  }
};

/// |A n B| / |A u B|; 1 when both regions are empty.
inline double jaccard(const BinaryMask& a, const BinaryMask& b) {
  if (a.width != b.width || a.height != b.height || a.data.size() != b.data.size())
    fail(ErrorCode::DimMismatch, "masks differ in size");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool ia = a.data[i] != 0, ib = b.data[i] != 0;
    inter += ia && ib;
    uni += ia || ib;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// |A_auto - A_man| / A_man.
inline double pad(double area_auto, double area_manual) {
  if (!(area_manual > 0.0)) fail(ErrorCode::ZeroReferenceArea, "reference area must be > 0");
  return std::abs(area_auto - area_manual) / area_manual;
}

/// Largest distance from a point of `from` to its nearest point of `to`.
inline double directed_hausdorff(std::span<const Point2> from, std::span<const Point2> to) {
  double worst = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) best = std::min(best, std::hypot(p.x - q.x, p.y - q.y));
    worst = std::max(worst, best);
  }
  return worst;
}

/// Symmetric (max-min) Hausdorff distance between two contours.
inline double hausdorff(std::span<const Point2> a, std::span<const Point2> b) {
  if (a.empty() || b.empty()) fail(ErrorCode::EmptyContour, "empty contour");
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

/// Shoelace area of a closed polygon.
inline double polygon_area(std::span<const Point2> poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % poly.size()];
    acc += p.x * q.y - q.x * p.y;
  }
  return 0.5 * std::abs(acc);
}

/// Pixels whose centre (x + 0.5, y + 0.5) lies inside the polygon (even-odd rule).
inline BinaryMask rasterize_polygon(std::span<const Point2> poly, std::size_t width, std::size_t height) {
  BinaryMask m(width, height);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      bool inside = false;
      for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a.y > py) != (b.y > py) && px < (b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x) inside = !inside;
      }
      m.at(x, y) = inside;
    }
  return m;
}

}  // namespace optsurf::metrics
