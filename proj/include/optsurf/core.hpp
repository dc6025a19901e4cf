#pragma once

// Domain types shared by every stage: volumes, column mappings, the convex
// penalty family and the multi-surface problem description.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "optsurf/error.hpp"

namespace optsurf {

struct Dims {
  std::size_t x = 1;
  std::size_t y = 1;
  std::size_t z = 1;

  std::size_t voxels() const noexcept { return x * y * z; }
  std::size_t columns() const noexcept { return x * y; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

struct Spacing {
  double x = 1.0;
  double y = 1.0;
  double z = 1.0;
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// Column id of (x, y); columns are numbered x-major to match the voxel order.
constexpr std::size_t column_index(const Dims& d, std::size_t x, std::size_t y) noexcept {
  return x * d.y + y;
}

/// Dense 3-D scalar grid, z-fastest then y then x.
class Volume {
 public:
  Volume() = default;

  Volume(Dims dims, Spacing spacing, double fill = 0.0)
      : dims_(dims), spacing_(spacing) {
    check_dims();
    data_.assign(dims_.voxels(), fill);
  }

  Volume(Dims dims, Spacing spacing, std::vector<double> data)
      : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    check_dims();
    if (data_.size() != dims_.voxels())
      fail(ErrorCode::DimMismatch, "volume data length " + std::to_string(data_.size()) +
                                       " does not match dims " + std::to_string(dims_.voxels()));
    for (double v : data_)
      if (!std::isfinite(v)) fail(ErrorCode::NonFiniteValue, "volume contains a non-finite value");
  }

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  void set_spacing(Spacing s) noexcept { spacing_ = s; }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return (x * dims_.y + y) * dims_.z + z;
  }
  double& operator()(std::size_t x, std::size_t y, std::size_t z) noexcept { return data_[index(x, y, z)]; }
  double operator()(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return data_[index(x, y, z)];
  }

  /// Value at integer coordinates clamped into the grid.
  double clamped(long x, long y, long z) const noexcept {
    auto clampi = [](long v, std::size_t n) {
      return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1));
    };
    return (*this)(clampi(x, dims_.x), clampi(y, dims_.y), clampi(z, dims_.z));
  }

  std::span<const double> column(std::size_t x, std::size_t y) const noexcept {
    return {data_.data() + index(x, y, 0), dims_.z};
  }
  std::span<double> column(std::size_t x, std::size_t y) noexcept {
    return {data_.data() + index(x, y, 0), dims_.z};
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double min() const { return *std::min_element(data_.begin(), data_.end()); }
  double max() const { return *std::max_element(data_.begin(), data_.end()); }

 private:
  void check_dims() const {
    if (dims_.x < 1 || dims_.y < 1 || dims_.z < 1)
      fail(ErrorCode::InvalidArgument, "volume dims must all be >= 1");
  }

  Dims dims_{};
  Spacing spacing_{};
  std::vector<double> data_ = std::vector<double>(1, 0.0);
};

/// Per-column sample positions L(0..Z-1) along the continuous z axis.
struct ColumnMapping {
  std::size_t x = 0;
  std::size_t y = 0;
  std::vector<double> positions;

  std::size_t size() const noexcept { return positions.size(); }
  double operator[](std::size_t k) const noexcept { return positions[k]; }

  /// L(k) = k, the regularly sampled column.
  static ColumnMapping identity(std::size_t levels, std::size_t x = 0, std::size_t y = 0) {
    ColumnMapping m{x, y, std::vector<double>(levels)};
    for (std::size_t k = 0; k < levels; ++k) m.positions[k] = static_cast<double>(k);
    return m;
  }
};

/// Throws NonMonotoneMappingError at the first k with L(k) <= L(k-1).
inline void validate_mapping(const ColumnMapping& m) {
  for (std::size_t k = 0; k < m.positions.size(); ++k) {
    if (!std::isfinite(m.positions[k]))
      fail(ErrorCode::NonFiniteValue, "mapping position " + std::to_string(k) + " is not finite");
    if (k > 0 && !(m.positions[k] > m.positions[k - 1]))
      throw NonMonotoneMappingError(k, "column (" + std::to_string(m.x) + "," + std::to_string(m.y) +
                                           ") is not strictly increasing at index " + std::to_string(k));
  }
}

/// Regular-grid mappings for every column of `dims`.
inline std::vector<ColumnMapping> identity_mappings(const Dims& dims) {
  std::vector<ColumnMapping> out;
  out.reserve(dims.columns());
  for (std::size_t x = 0; x < dims.x; ++x)
    for (std::size_t y = 0; y < dims.y; ++y) out.push_back(ColumnMapping::identity(dims.z, x, y));
  return out;
}

enum class PenaltyKind { Linear, Quadratic, PiecewiseLinear };

/// Even convex smoothness penalty with psi(0) = 0, evaluated on |d|.
///
/// Piecewise penalties are given by their slopes on consecutive intervals of
/// |d| split at strictly increasing positive breakpoints; slopes must be
/// nonnegative and nondecreasing, which makes psi convex and nondecreasing
/// on the nonnegative axis.
class ConvexPenalty {
 public:
  static ConvexPenalty linear(double weight = 1.0) { return ConvexPenalty(PenaltyKind::Linear, weight, {}, {}); }
  static ConvexPenalty quadratic(double weight = 1.0) {
    return ConvexPenalty(PenaltyKind::Quadratic, weight, {}, {});
  }
  static ConvexPenalty piecewise_linear(double weight, std::vector<double> breakpoints, std::vector<double> slopes) {
    return ConvexPenalty(PenaltyKind::PiecewiseLinear, weight, std::move(breakpoints), std::move(slopes));
  }

  PenaltyKind kind() const noexcept { return kind_; }
  double weight() const noexcept { return weight_; }
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<double>& slopes() const noexcept { return slopes_; }

  double operator()(double d) const noexcept {
    const double r = std::abs(d);
    switch (kind_) {
      case PenaltyKind::Linear: return weight_ * r;
      case PenaltyKind::Quadratic: return weight_ * r * r;
      case PenaltyKind::PiecewiseLinear: {
        double acc = 0.0;
        double lo = 0.0;
        for (std::size_t i = 0; i < breakpoints_.size() && r > lo; ++i) {
          const double hi = std::min(r, breakpoints_[i]);
          acc += slopes_[i] * (hi - lo);
          lo = breakpoints_[i];
        }
        if (r > lo) acc += slopes_.back() * (r - lo);
        return weight_ * acc;
      }
    }
    return 0.0;
  }

  /// Same penalty with the weight multiplied by `factor`.
  ConvexPenalty scaled(double factor) const {
    return ConvexPenalty(kind_, weight_ * factor, breakpoints_, slopes_);
  }

 private:
  ConvexPenalty(PenaltyKind kind, double weight, std::vector<double> breakpoints, std::vector<double> slopes)
      : kind_(kind), weight_(weight), breakpoints_(std::move(breakpoints)), slopes_(std::move(slopes)) {
    if (!std::isfinite(weight_) || !(weight_ > 0.0))
      fail(ErrorCode::InvalidPenalty, "penalty weight must be finite and > 0");
    if (kind_ != PenaltyKind::PiecewiseLinear) return;
    if (slopes_.size() != breakpoints_.size() + 1)
      fail(ErrorCode::InvalidPenalty, "piecewise penalty needs one more slope than breakpoints");
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
      if (!std::isfinite(breakpoints_[i]) || !(breakpoints_[i] > (i == 0 ? 0.0 : breakpoints_[i - 1])))
        fail(ErrorCode::InvalidPenalty, "breakpoints must be finite, positive and strictly increasing");
    }
    for (std::size_t i = 0; i < slopes_.size(); ++i) {
      if (!std::isfinite(slopes_[i]) || slopes_[i] < 0.0)
        fail(ErrorCode::InvalidPenalty, "slopes must be finite and nonnegative");
      if (i > 0 && slopes_[i] < slopes_[i - 1])
        fail(ErrorCode::InvalidPenalty, "slopes must be nondecreasing (convexity)");
    }
  }

  PenaltyKind kind_;
  double weight_;
  std::vector<double> breakpoints_;
  std::vector<double> slopes_;
};

inline double eval_penalty(const ConvexPenalty& psi, double d) noexcept { return psi(d); }

/// One-sided penalty: 0 when r1 < r2, otherwise psi(r1 - r2).
inline double eval_f(const ConvexPenalty& psi, double r1, double r2) noexcept {
  return r1 < r2 ? 0.0 : psi(r1 - r2);
}

/// Minimum separations d_{j,j+1} between consecutive surfaces, in mapping units.
struct SeparationConstraint {
  std::vector<double> min_gap;

  void validate(std::size_t surfaces) const {
    if (min_gap.size() + 1 != surfaces && !(surfaces == 0 && min_gap.empty()))
      fail(ErrorCode::InvalidArgument, "expected " + std::to_string(surfaces == 0 ? 0 : surfaces - 1) +
                                           " separation values, got " + std::to_string(min_gap.size()));
    for (double d : min_gap)
      if (!std::isfinite(d) || d < 0.0) fail(ErrorCode::InvalidArgument, "separation values must be finite and >= 0");
  }
};

/// Unordered 4-neighbour column pairs (a, b) with a < b.
inline std::vector<std::pair<std::size_t, std::size_t>> neighbor_pairs(const Dims& dims) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t x = 0; x < dims.x; ++x) {
    for (std::size_t y = 0; y < dims.y; ++y) {
      const std::size_t a = column_index(dims, x, y);
      if (y + 1 < dims.y) pairs.emplace_back(a, column_index(dims, x, y + 1));
      if (x + 1 < dims.x) pairs.emplace_back(a, column_index(dims, x + 1, y));
    }
  }
  return pairs;
}

/// Everything needed to segment lambda coupled surfaces.
struct Problem {
  std::vector<Volume> costs;             // D_1..D_lambda, sampled at the mapped positions
  std::vector<ColumnMapping> mappings;   // one per column, column_index order
  std::vector<ConvexPenalty> penalties;  // one per surface
  SeparationConstraint separation;

  std::size_t surface_count() const noexcept { return costs.size(); }
  const Dims& dims() const { return costs.front().dims(); }
  std::size_t column_count() const { return dims().columns(); }
  std::size_t levels() const { return dims().z; }

  void validate() const {
    if (costs.empty()) fail(ErrorCode::InvalidArgument, "problem has no surfaces");
    const Dims& d = costs.front().dims();
    for (const auto& c : costs)
      if (!(c.dims() == d)) fail(ErrorCode::DimMismatch, "cost volumes must share dims");
    if (penalties.size() != costs.size())
      fail(ErrorCode::InvalidArgument, "need exactly one penalty per surface");
    separation.validate(costs.size());
    if (mappings.size() != d.columns())
      fail(ErrorCode::InvalidArgument, "need exactly one mapping per column");
    for (std::size_t x = 0; x < d.x; ++x) {
      for (std::size_t y = 0; y < d.y; ++y) {
        const auto& m = mappings[column_index(d, x, y)];
        if (m.size() != d.z) fail(ErrorCode::DimMismatch, "mapping length differs from Z");
        if (m.x != x || m.y != y) fail(ErrorCode::ColumnSetMismatch, "mapping column id out of order");
        validate_mapping(m);
      }
    }
  }
};

/// Optimal surfaces: labels S_i(a) and mapped positions L_a(S_i(a)).
struct SegmentationResult {
  Dims dims;
  std::vector<std::vector<int>> labels;        // [surface][column]
  std::vector<std::vector<double>> positions;  // [surface][column]
  double energy = 0.0;

  std::size_t surface_count() const noexcept { return labels.size(); }
};

}  // namespace optsurf
