#pragma once

// Data-cost construction: signed 5x5x5 Sobel edge costs, probability-map
// inversion and shifting costs to a nonnegative range.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "optsurf/core.hpp"
#include "optsurf/parallel.hpp"

namespace optsurf {

enum class Polarity { DarkToBright, BrightToDark };

namespace detail {

inline constexpr std::array<double, 5> kSobelSmooth{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
// Divided by 8 so a unit ramp along z yields a response of exactly 1.
inline constexpr std::array<double, 5> kSobelDerivative{-1.0 / 8, -2.0 / 8, 0.0, 2.0 / 8, 1.0 / 8};

enum class Axis { X, Y, Z };

/// Correlates `in` with a centred 1-D kernel along one axis, clamping borders.
template <std::size_t N>
Volume convolve_axis(const Volume& in, const std::array<double, N>& kernel, Axis axis, int threads = 1) {
  static_assert(N % 2 == 1);
  constexpr long half = static_cast<long>(N / 2);
  const Dims d = in.dims();
  Volume out(d, in.spacing());
  parallel_for(d.x, threads, [&](std::size_t x) {
    for (std::size_t y = 0; y < d.y; ++y) {
      for (std::size_t z = 0; z < d.z; ++z) {
        double acc = 0.0;
        for (long t = -half; t <= half; ++t) {
          const double w = kernel[static_cast<std::size_t>(t + half)];
          if (w == 0.0) continue;
          const long xi = static_cast<long>(x) + (axis == Axis::X ? t : 0);
          const long yi = static_cast<long>(y) + (axis == Axis::Y ? t : 0);
          const long zi = static_cast<long>(z) + (axis == Axis::Z ? t : 0);
          acc += w * in.clamped(xi, yi, zi);
        }
        out(x, y, z) = acc;
      }
    }
  });
  return out;
}

}  // namespace detail

/// Signed z-derivative from the separable 5x5x5 Sobel operator (smoothing in
/// x and y, derivative along z). Positive where intensity increases with z.
inline Volume sobel_z_response(const Volume& v, int threads = 1) {
  Volume r = detail::convolve_axis(v, detail::kSobelSmooth, detail::Axis::X, threads);
  r = detail::convolve_axis(r, detail::kSobelSmooth, detail::Axis::Y, threads);
  return detail::convolve_axis(r, detail::kSobelDerivative, detail::Axis::Z, threads);
}

/// Edge cost with its minimum on transitions of the requested polarity,
/// shifted so that the volume minimum is 0.
inline Volume gradient_cost(const Volume& v, Polarity polarity, int threads = 1) {
  Volume r = sobel_z_response(v, threads);
  const double sign = polarity == Polarity::DarkToBright ? -1.0 : 1.0;
  for (double& c : r.data()) c *= sign;
  const double m = r.min();
  for (double& c : r.data()) c -= m;
  return r;
}

/// cost = (1 - p) * 255.
inline Volume probability_to_cost(const Volume& p) {
  Volume out = p;
  for (double& c : out.data()) {
    if (!(c >= 0.0 && c <= 1.0))
      fail(ErrorCode::ProbabilityOutOfRange, "probability " + std::to_string(c) + " outside [0,1]");
    c = (1.0 - c) * 255.0;
  }
  return out;
}

struct NormalizedCost {
  Volume cost;
  double shift = 0.0;  // the subtracted minimum; original = cost + shift
};

inline NormalizedCost normalize_cost(const Volume& c) {
  NormalizedCost out{c, c.min()};
  if (out.shift != 0.0)
    for (double& v : out.cost.data()) v -= out.shift;
  return out;
}

/// Separable Gaussian blur with a kernel truncated at 3 sigma; sigma in voxels.
inline Volume gaussian_smooth(const Volume& v, double sigma, int threads = 1) {
  if (!(sigma > 0.0)) return v;
  const long half = std::max<long>(1, static_cast<long>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * half + 1));
  double sum = 0.0;
  for (long i = -half; i <= half; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + half)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;

  const Dims d = v.dims();
  auto pass = [&](const Volume& in, detail::Axis axis) {
    Volume out(d, in.spacing());
    parallel_for(d.x, threads, [&](std::size_t x) {
      for (std::size_t y = 0; y < d.y; ++y)
        for (std::size_t z = 0; z < d.z; ++z) {
          double acc = 0.0;
          for (long t = -half; t <= half; ++t) {
            const long xi = static_cast<long>(x) + (axis == detail::Axis::X ? t : 0);
            const long yi = static_cast<long>(y) + (axis == detail::Axis::Y ? t : 0);
            const long zi = static_cast<long>(z) + (axis == detail::Axis::Z ? t : 0);
            acc += k[static_cast<std::size_t>(t + half)] * in.clamped(xi, yi, zi);
          }
          out(x, y, z) = acc;
        }
    });
    return out;
  };
  return pass(pass(pass(v, detail::Axis::X), detail::Axis::Y), detail::Axis::Z);
}

}  // namespace optsurf
