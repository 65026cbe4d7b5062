#ifndef MADELUNG_LAB_FIELDS_HPP
#define MADELUNG_LAB_FIELDS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "madelung_lab/error.hpp"

namespace madelung_lab {

using Complex = std::complex<double>;

enum class Boundary { periodic, vanishing };

inline std::string to_string(Boundary b) {
  return b == Boundary::periodic ? "periodic" : "vanishing";
}

/// Uniform 1D grid. Periodic grids exclude the right end point, vanishing
/// grids include both end points.
class SpatialGrid {
 public:
  static constexpr std::size_t min_points = 16;

  SpatialGrid(double x_min, double x_max, std::size_t n_points, Boundary boundary)
      : x_min_(x_min), x_max_(x_max), n_(n_points), boundary_(boundary) {
    require(std::isfinite(x_min) && std::isfinite(x_max) && x_max > x_min,
            ErrorCode::InvalidArgument, "grid extent must be finite with x_max > x_min");
    require(n_points >= min_points, ErrorCode::InvalidArgument,
            "grid needs at least 16 points, got " + std::to_string(n_points));
    const double intervals =
        boundary == Boundary::periodic ? double(n_points) : double(n_points - 1);
    dx_ = (x_max - x_min) / intervals;
  }

  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  double length() const noexcept { return x_max_ - x_min_; }
  double dx() const noexcept { return dx_; }
  std::size_t size() const noexcept { return n_; }
  Boundary boundary() const noexcept { return boundary_; }
  bool periodic() const noexcept { return boundary_ == Boundary::periodic; }

  double x(std::size_t i) const noexcept { return x_min_ + double(i) * dx_; }

  std::vector<double> coordinates() const {
    std::vector<double> xs(n_);
    for (std::size_t i = 0; i < n_; ++i) xs[i] = x(i);
    return xs;
  }

  friend bool operator==(const SpatialGrid&, const SpatialGrid&) = default;

 private:
  double x_min_;
  double x_max_;
  std::size_t n_;
  Boundary boundary_;
  double dx_ = 0.0;
};

/// Samples of a scalar quantity on every node of a grid.
template <typename T>
class Field {
 public:
  using value_type = T;

  explicit Field(const SpatialGrid& grid) : grid_(grid), values_(grid.size(), T{}) {}

  Field(const SpatialGrid& grid, std::vector<T> values)
      : grid_(grid), values_(std::move(values)) {
    require(values_.size() == grid_.size(), ErrorCode::InvalidArgument,
            "field length does not match grid size");
  }

  template <typename Fn>
  static Field sample(const SpatialGrid& grid, Fn&& fn) {
    Field f(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) f.values_[i] = fn(grid.x(i));
    return f;
  }

  const SpatialGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }

  T& operator[](std::size_t i) noexcept { return values_[i]; }
  const T& operator[](std::size_t i) const noexcept { return values_[i]; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](const T& v) {
      if constexpr (std::is_same_v<T, Complex>) {
        return std::isfinite(v.real()) && std::isfinite(v.imag());
      } else {
        return std::isfinite(v);
      }
    });
  }

 private:
  SpatialGrid grid_;
  std::vector<T> values_;
};

using RealField = Field<double>;
using ComplexField = Field<Complex>;

template <typename T, typename Fn>
auto transform(const Field<T>& f, Fn&& fn) {
  using R = std::invoke_result_t<Fn, T>;
  Field<R> out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = fn(f[i]);
  return out;
}

template <typename A, typename B, typename Fn>
auto combine(const Field<A>& a, const Field<B>& b, Fn&& fn) {
  require(a.grid() == b.grid(), ErrorCode::InvalidArgument, "fields live on different grids");
  using R = std::invoke_result_t<Fn, A, B>;
  Field<R> out(a.grid());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i], b[i]);
  return out;
}

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      carry_ += (sum_ - t) + v;
    } else {
      carry_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  void add(const CompensatedSum& other) noexcept {
    add(other.sum_);
    add(other.carry_);
  }
  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) noexcept {
  CompensatedSum s;
  for (double v : xs) s.add(v);
  return s.value();
}

/// Rectangle rule on periodic grids, trapezoid rule on vanishing grids.
inline double integrate(const RealField& f) {
  require(f.all_finite(), ErrorCode::NonFinite, "integrand contains NaN or Inf");
  const auto& g = f.grid();
  CompensatedSum s;
  for (std::size_t i = 0; i < f.size(); ++i) s.add(f[i]);
  if (!g.periodic()) {
    s.add(-0.5 * f[0]);
    s.add(-0.5 * f[f.size() - 1]);
  }
  return s.value() * g.dx();
}

/// Quadrature of fn(x_i, f_i) without materializing an intermediate field.
template <typename Fn>
double integrate_with(const SpatialGrid& g, Fn&& fn) {
  RealField tmp(g);
  for (std::size_t i = 0; i < g.size(); ++i) tmp[i] = fn(i, g.x(i));
  return integrate(tmp);
}

/// Linear interpolation of a grid field at an arbitrary position, clamped to
/// the grid extent.
inline double interpolate(const RealField& f, double x) noexcept {
  const auto& g = f.grid();
  const double s = (x - g.x_min()) / g.dx();
  if (s <= 0.0) return f[0];
  const auto last = f.size() - 1;
  if (s >= double(last)) return f[last];
  const auto i = static_cast<std::size_t>(s);
  const double w = s - double(i);
  return (1.0 - w) * f[i] + w * f[i + 1];
}

/// Writes (x, value) rows with 17 significant digits.
inline void write_csv(std::ostream& os, const RealField& f, const std::string& name = "value") {
  os << "x," << name << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < f.size(); ++i) os << f.grid().x(i) << ',' << f[i] << '\n';
}

}  // namespace madelung_lab

#endif  // MADELUNG_LAB_FIELDS_HPP
