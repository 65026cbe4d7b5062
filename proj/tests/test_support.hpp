#ifndef MADELUNG_LAB_TEST_SUPPORT_HPP
#define MADELUNG_LAB_TEST_SUPPORT_HPP

#include <cmath>
#include <functional>

#include "madelung_lab/gaussian.hpp"
#include "madelung_lab/madelung.hpp"
#include "madelung_lab/schrodinger.hpp"

namespace test_support {

using namespace madelung_lab;

inline SpatialGrid reference_grid(std::size_t n = 4096) {
  return SpatialGrid(-40.0, 40.0, n, Boundary::periodic);
}

inline WaveState evolved_gaussian(double t, const SpatialGrid& g = reference_grid(),
                                  const PhysicalConstants& k = {}, double sigma0 = 1.0) {
  auto s = initial_gaussian(g, sigma0, 0.0, 0.0, k);
  return propagate_to(s, t, 1e-3, Method::splitstep);
}

/// ||a - b|| / ||b|| over nodes where keep(i) holds; absolute if ||b|| == 0.
inline double relative_l2(const RealField& a, const RealField& b,
                          const std::function<bool(std::size_t)>& keep) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!keep(i)) continue;
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline double max_abs_where(const RealField& a, const std::function<bool(std::size_t)>& keep) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (keep(i)) m = std::max(m, std::abs(a[i]));
  return m;
}

}  // namespace test_support

#endif
