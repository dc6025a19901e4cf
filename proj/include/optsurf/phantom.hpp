#pragma once

// Synthetic layered volumes with exact partial-volume blending, plus block
// downsampling, for ground-truth accuracy experiments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "optsurf/core.hpp"

namespace optsurf {

/// Analytic height field z(x, y) in voxel-centre coordinates (voxel k spans
/// [k - 0.5, k + 0.5)).
struct SurfaceSpec {
  enum class Kind { Plane, Sinusoid };
  Kind kind = Kind::Plane;
  // Plane: z = offset + slope_x * x + slope_y * y.
  double offset = 0.0;
  double slope_x = 0.0;
  double slope_y = 0.0;
  // Sinusoid: z = offset + amplitude * sin(2 pi t / period + phase), t = x or y.
  double amplitude = 0.0;
  double period = 1.0;
  double phase = 0.0;
  bool along_y = false;

  double operator()(double x, double y) const {
    if (kind == Kind::Plane) return offset + slope_x * x + slope_y * y;
    const double t = along_y ? y : x;
    return offset + amplitude * std::sin(2.0 * std::numbers::pi * t / period + phase);
  }
};

struct PhantomSpec {
  Dims dims;
  Spacing spacing;
  std::vector<SurfaceSpec> surfaces;  // bottom to top
  std::vector<double> intensities;    // surfaces + 1 layers, bottom to top
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct Phantom {
  Volume volume;
  std::vector<std::vector<double>> truth;  // [surface][column] exact heights
};

/// Fraction of [lo, hi) covered by [a, b).
inline double overlap(double lo, double hi, double a, double b) {
  return std::max(0.0, std::min(hi, b) - std::max(lo, a)) / (hi - lo);
}

inline Phantom generate_phantom(const PhantomSpec& spec) {
  const Dims& d = spec.dims;
  const std::size_t n_surf = spec.surfaces.size();
  if (spec.intensities.size() != n_surf + 1)
    fail(ErrorCode::InvalidArgument, "need one intensity per layer (surfaces + 1)");
  if (!(spec.noise_sigma >= 0.0)) fail(ErrorCode::InvalidArgument, "noise sigma must be >= 0");

  Phantom ph{Volume(d, spec.spacing), std::vector<std::vector<double>>(n_surf, std::vector<double>(d.columns()))};
  for (std::size_t x = 0; x < d.x; ++x)
    for (std::size_t y = 0; y < d.y; ++y) {
      const std::size_t a = column_index(d, x, y);
      for (std::size_t i = 0; i < n_surf; ++i) {
        ph.truth[i][a] = spec.surfaces[i](static_cast<double>(x), static_cast<double>(y));
        if (!std::isfinite(ph.truth[i][a])) fail(ErrorCode::NonFiniteValue, "surface height is not finite");
        if (i > 0 && !(ph.truth[i][a] > ph.truth[i - 1][a]))
          fail(ErrorCode::SurfacesOutOfOrder, "surface " + std::to_string(i) + " is not above surface " +
                                                  std::to_string(i - 1) + " at column " + std::to_string(a));
      }
      const double inf = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < d.z; ++k) {
        const double lo = static_cast<double>(k) - 0.5, hi = static_cast<double>(k) + 0.5;
        double v = 0.0;
        for (std::size_t layer = 0; layer <= n_surf; ++layer) {
          const double a0 = layer == 0 ? -inf : ph.truth[layer - 1][a];
          const double b0 = layer == n_surf ? inf : ph.truth[layer][a];
          v += overlap(lo, hi, a0, b0) * spec.intensities[layer];
        }
        ph.volume(x, y, k) = v;
      }
    }
  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (double& v : ph.volume.data()) v += noise(rng);
  }
  return ph;
}

/// Block-mean pooling; dims are floor-divided and spacing multiplied.
inline Volume downsample(const Volume& v, std::size_t fx, std::size_t fy, std::size_t fz) {
  const Dims& d = v.dims();
  if (fx < 1 || fy < 1 || fz < 1) fail(ErrorCode::InvalidArgument, "downsampling factors must be >= 1");
  if (fx > d.x || fy > d.y || fz > d.z) fail(ErrorCode::FactorExceedsDim, "downsampling factor exceeds a dimension");
  const Dims od{d.x / fx, d.y / fy, d.z / fz};
  const Spacing os{v.spacing().x * static_cast<double>(fx), v.spacing().y * static_cast<double>(fy),
                   v.spacing().z * static_cast<double>(fz)};
  Volume out(od, os);
  const double inv = 1.0 / static_cast<double>(fx * fy * fz);
  for (std::size_t x = 0; x < od.x; ++x)
    for (std::size_t y = 0; y < od.y; ++y)
      for (std::size_t z = 0; z < od.z; ++z) {
        double acc = 0.0;
        for (std::size_t i = 0; i < fx; ++i)
          for (std::size_t j = 0; j < fy; ++j)
            for (std::size_t k = 0; k < fz; ++k) acc += v(x * fx + i, y * fy + j, z * fz + k);
        out(x, y, z) = acc * inv;
      }
  return out;
}

/// Fine voxel-centre coordinate expressed on a grid downsampled by `factor`.
constexpr double downsample_position(double fine, std::size_t factor) {
  const double f = static_cast<double>(factor);
  return (fine - (f - 1.0) / 2.0) / f;
}

/// Coarse coordinate mapped back onto the fine grid.
constexpr double upsample_position(double coarse, std::size_t factor) {
  const double f = static_cast<double>(factor);
  return coarse * f + (f - 1.0) / 2.0;
}

}  // namespace optsurf
