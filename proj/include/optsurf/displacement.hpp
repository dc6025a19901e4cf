#pragma once

// Gradient vector flow and the voxel-centre displacement it induces. The
// shifted centres define the irregular column mappings and the positions at
// which cost volumes are resampled.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "optsurf/core.hpp"
#include "optsurf/parallel.hpp"

namespace optsurf {

struct VectorField {
  Volume x, y, z;

  const Dims& dims() const noexcept { return x.dims(); }
  double norm(std::size_t i) const noexcept {
    const double a = x.data()[i], b = y.data()[i], c = z.data()[i];
    return std::sqrt(a * a + b * b + c * c);
  }
  double max_norm() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < x.data().size(); ++i) m = std::max(m, norm(i));
    return m;
  }
};

/// Central differences in index units; borders use the clamped neighbour.
inline VectorField gradient(const Volume& v) {
  const Dims d = v.dims();
  VectorField g{Volume(d, v.spacing()), Volume(d, v.spacing()), Volume(d, v.spacing())};
  for (std::size_t x = 0; x < d.x; ++x)
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t z = 0; z < d.z; ++z) {
        const long xi = static_cast<long>(x), yi = static_cast<long>(y), zi = static_cast<long>(z);
        g.x(x, y, z) = 0.5 * (v.clamped(xi + 1, yi, zi) - v.clamped(xi - 1, yi, zi));
        g.y(x, y, z) = 0.5 * (v.clamped(xi, yi + 1, zi) - v.clamped(xi, yi - 1, zi));
        g.z(x, y, z) = 0.5 * (v.clamped(xi, yi, zi + 1) - v.clamped(xi, yi, zi - 1));
      }
  return g;
}

/// Gradient magnitude scaled to a maximum of 1 (all zeros for a flat volume).
inline Volume edge_map(const Volume& v) {
  const VectorField g = gradient(v);
  Volume out(v.dims(), v.spacing());
  double m = 0.0;
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    out.data()[i] = g.norm(i);
    m = std::max(m, out.data()[i]);
  }
  if (m > 0.0)
    for (double& e : out.data()) e /= m;
  return out;
}

struct GvfParams {
  double mu = 0.2;
  int iterations = 80;
  std::optional<double> dt;  // default: min(1, stable bound)
  int threads = 1;
};

/// Largest explicit step for which the update stays stable: the 7-point
/// Laplacian contributes 6 mu and the data term max |grad v|^2.
inline double gvf_stable_step(double mu, double max_grad_sq) { return 1.0 / (6.0 * mu + max_grad_sq); }

/// Iterates u <- u + dt (mu Lap(u) - (u - grad v) |grad v|^2) starting from
/// u = grad v. Feed an edge map to obtain a field pointing at edges.
inline VectorField compute_gvf(const Volume& v, const GvfParams& params = {}) {
  if (!(params.mu > 0.0) || !std::isfinite(params.mu)) fail(ErrorCode::InvalidArgument, "GVF mu must be > 0");
  if (params.iterations < 0) fail(ErrorCode::InvalidArgument, "GVF iterations must be >= 0");
  const VectorField g = gradient(v);
  VectorField u = g;
  if (params.iterations == 0) return u;

  const Dims d = v.dims();
  std::vector<double> b(d.voxels());
  double bmax = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double n = g.norm(i);
    b[i] = n * n;
    bmax = std::max(bmax, b[i]);
  }
  const double bound = gvf_stable_step(params.mu, bmax);
  double dt = std::min(1.0, bound);
  if (params.dt) {
    if (!(*params.dt > 0.0) || *params.dt > bound)
      fail(ErrorCode::UnstableStep, "dt " + std::to_string(*params.dt) + " exceeds the stability bound " +
                                        std::to_string(bound));
    dt = *params.dt;
  }

  VectorField next = u;
  Volume* cur_c[3] = {&u.x, &u.y, &u.z};
  Volume* nxt_c[3] = {&next.x, &next.y, &next.z};
  const Volume* grad_c[3] = {&g.x, &g.y, &g.z};
  for (int it = 0; it < params.iterations; ++it) {
    for (int c = 0; c < 3; ++c) {
      const Volume& in = *cur_c[c];
      Volume& out = *nxt_c[c];
      const Volume& gc = *grad_c[c];
      parallel_for(d.x, params.threads, [&](std::size_t x) {
        for (std::size_t y = 0; y < d.y; ++y)
          for (std::size_t z = 0; z < d.z; ++z) {
            const long xi = static_cast<long>(x), yi = static_cast<long>(y), zi = static_cast<long>(z);
            const double center = in(x, y, z);
            const double lap = in.clamped(xi + 1, yi, zi) + in.clamped(xi - 1, yi, zi) + in.clamped(xi, yi + 1, zi) +
                               in.clamped(xi, yi - 1, zi) + in.clamped(xi, yi, zi + 1) + in.clamped(xi, yi, zi - 1) -
                               6.0 * center;
            const std::size_t i = in.index(x, y, z);
            out(x, y, z) = center + dt * (params.mu * lap - (center - gc(x, y, z)) * b[i]);
          }
      });
    }
    std::swap(u, next);
    cur_c[0] = &u.x, cur_c[1] = &u.y, cur_c[2] = &u.z;
    nxt_c[0] = &next.x, nxt_c[1] = &next.y, nxt_c[2] = &next.z;
  }
  return u;
}

/// Per-voxel displacement lambda * F with max |lambda F| = delta / 2.
struct ShiftedCenters {
  double lambda = 0.0;
  double delta = 1.0;
  VectorField shift;

  const Dims& dims() const noexcept { return shift.dims(); }
};

inline ShiftedCenters normalize_and_shift(const VectorField& f, double delta = 1.0) {
  if (!(delta > 0.0)) fail(ErrorCode::InvalidArgument, "voxel size delta must be > 0");
  const double m = f.max_norm();
  ShiftedCenters s{m > 0.0 ? delta / (2.0 * m) : 0.0, delta, f};
  for (Volume* c : {&s.shift.x, &s.shift.y, &s.shift.z})
    for (double& v : c->data()) v *= s.lambda;
  return s;
}

/// L(k) = k + shift_z(x, y, k) for every column, validated strictly increasing.
inline std::vector<ColumnMapping> mappings_from_shifts(const ShiftedCenters& s) {
  const Dims& d = s.dims();
  std::vector<ColumnMapping> out;
  out.reserve(d.columns());
  for (std::size_t x = 0; x < d.x; ++x)
    for (std::size_t y = 0; y < d.y; ++y) {
      ColumnMapping m{x, y, std::vector<double>(d.z)};
      const auto dz = s.shift.z.column(x, y);
      for (std::size_t k = 0; k < d.z; ++k) m.positions[k] = static_cast<double>(k) + dz[k];
      validate_mapping(m);
      out.push_back(std::move(m));
    }
  return out;
}

/// Trilinear sample at real index coordinates, clamped to the grid.
inline double sample_trilinear(const Volume& v, double x, double y, double z) {
  const Dims& d = v.dims();
  auto split = [](double p, std::size_t n, std::size_t& lo, std::size_t& hi, double& t) {
    p = std::clamp(p, 0.0, static_cast<double>(n - 1));
    const double f = std::floor(p);
    lo = static_cast<std::size_t>(f);
    hi = std::min(lo + 1, n - 1);
    t = p - f;
  };
  std::size_t x0, x1, y0, y1, z0, z1;
  double tx, ty, tz;
  split(x, d.x, x0, x1, tx);
  split(y, d.y, y0, y1, ty);
  split(z, d.z, z0, z1, tz);
  auto lerp = [](double a, double b, double t) { return a + t * (b - a); };
  const double c00 = lerp(v(x0, y0, z0), v(x0, y0, z1), tz);
  const double c01 = lerp(v(x0, y1, z0), v(x0, y1, z1), tz);
  const double c10 = lerp(v(x1, y0, z0), v(x1, y0, z1), tz);
  const double c11 = lerp(v(x1, y1, z0), v(x1, y1, z1), tz);
  return lerp(lerp(c00, c01, ty), lerp(c10, c11, ty), tx);
}

/// Resamples `cost` at every shifted voxel centre.
inline Volume deform_cost_volume(const Volume& cost, const ShiftedCenters& s, int threads = 1) {
  const Dims d = cost.dims();
  if (!(s.dims() == d)) fail(ErrorCode::DimMismatch, "shift field dims differ from the cost volume");
  Volume out(d, cost.spacing());
  parallel_for(d.x, threads, [&](std::size_t x) {
    for (std::size_t y = 0; y < d.y; ++y)
      for (std::size_t z = 0; z < d.z; ++z)
        out(x, y, z) = sample_trilinear(cost, static_cast<double>(x) + s.shift.x(x, y, z),
                                        static_cast<double>(y) + s.shift.y(x, y, z),
                                        static_cast<double>(z) + s.shift.z(x, y, z));
  });
  return out;
}

}  // namespace optsurf
