#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "madelung_lab/schrodinger.hpp"

using namespace madelung_lab;

namespace {

const double kPi = std::numbers::pi;

SpatialGrid reference_grid() { return SpatialGrid(-40.0, 40.0, 4096, Boundary::periodic); }

// Free Gaussian packet density with initial width s0, centre c, momentum p:
// the Galilean boost of the spreading solution, centre moving at p/m.
double boosted_density(double x, double t, double s0, double c, double p, const PhysicalConstants& k) {
  const double v = k.hbar * t / (2.0 * k.mass * s0);
  const double s2 = s0 * s0 + v * v;
  const double d = x - c - p * t / k.mass;
  return std::exp(-d * d / (2.0 * s2)) / std::sqrt(2.0 * kPi * s2);
}

double l2_density_error(const WaveState& s, double s0, double c, double p) {
  const auto rho = s.density();
  return std::sqrt(integrate_with(s.grid(), [&](std::size_t i, double x) {
    const double d = rho[i] - boosted_density(x, s.time, s0, c, p, s.constants);
    return d * d;
  }));
}

}  // namespace

TEST(InitialGaussian, PeakDensityAndZeroPhase) {
  auto s = initial_gaussian(reference_grid(), 1.0, 0.0, 0.0, {});
  const auto rho = s.density();
  EXPECT_NEAR(rho[2048], 1.0 / std::sqrt(2.0 * kPi), 1e-15);  // x = 0 is node 2048
  EXPECT_NEAR(rho[2048], 0.39894, 1e-5);
  for (const auto& z : s.psi) EXPECT_EQ(z.imag(), 0.0);
  EXPECT_NEAR(s.norm(), 1.0, 1e-12);
}

TEST(InitialGaussian, VarianceOfWiderPacket) {
  auto s = initial_gaussian(reference_grid(), 2.0, 0.0, 0.0, {});
  const auto rho = s.density();
  const double var = integrate_with(s.grid(), [&](std::size_t i, double x) { return x * x * rho[i]; });
  EXPECT_NEAR(var, 4.0, 1e-8);
}

TEST(InitialGaussian, GridTooNarrow) {
  SpatialGrid g(-5.0, 5.0, 256, Boundary::periodic);
  try {
    initial_gaussian(g, 1.0, 0.0, 0.0, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridTooNarrow);
  }
}

TEST(InitialGaussian, RejectsNonPositiveWidthAndConstants) {
  EXPECT_THROW(initial_gaussian(reference_grid(), 0.0, 0.0, 0.0, {}), Error);
  EXPECT_THROW(initial_gaussian(reference_grid(), 1.0, 0.0, 0.0, {0.0, 1.0}), Error);
  EXPECT_THROW(initial_gaussian(reference_grid(), 1.0, 0.0, 0.0, {1.0, -1.0}), Error);
}

TEST(Propagate, SpreadsToSqrtTwoAtTimeTwo) {
  auto s0 = initial_gaussian(reference_grid(), 1.0, 0.0, 0.0, {});
  auto s = propagate(s0, 1e-3, 2000, Method::splitstep);
  EXPECT_NEAR(s.time, 2.0, 1e-12);
  EXPECT_LT(l2_density_error(s, 1.0, 0.0, 0.0), 1e-6);
}

TEST(Propagate, ZeroStepsIsIdentity) {
  auto s0 = initial_gaussian(reference_grid(), 1.0, 0.0, 0.0, {});
  auto s = propagate(s0, 1e-3, 0, Method::splitstep);
  EXPECT_EQ(s.time, s0.time);
  for (std::size_t i = 0; i < s.psi.size(); ++i) EXPECT_EQ(s.psi[i], s0.psi[i]);
}

TEST(Propagate, BoostedPacketCentroidMovesAtMomentumOverMass) {
  const double p = 1.5;
  auto s0 = initial_gaussian(reference_grid(), 1.0, -3.0, p, {});
  auto s = propagate(s0, 1e-3, 4000, Method::splitstep);
  const auto rho = s.density();
  const double centroid = integrate_with(s.grid(), [&](std::size_t i, double x) { return x * rho[i]; });
  EXPECT_NEAR(centroid, -3.0 + p * 4.0, 1e-9);
  EXPECT_LT(l2_density_error(s, 1.0, -3.0, p), 1e-6);
}

TEST(Propagate, NonUnitConstantsFollowScaledSpreading) {
  PhysicalConstants k{0.5, 2.0};
  auto s0 = initial_gaussian(reference_grid(), 1.0, 0.0, 0.0, k);
  auto s = propagate(s0, 1e-2, 300, Method::splitstep);
  EXPECT_LT(l2_density_error(s, 1.0, 0.0, 0.0), 1e-6);
}

TEST(Propagate, UnitarityAndEnergyConservationForBothMethods) {
  auto sp0 = initial_gaussian(reference_grid(), 1.0, 0.0, 0.5, {});
  SpatialGrid vg(-40.0, 40.0, 4097, Boundary::vanishing);
  auto cn0 = initial_gaussian(vg, 1.0, 0.0, 0.5, {});
  const double e_sp = energy(sp0, Scheme::spectral);
  const double e_cn = energy(cn0, Scheme::central4);
  auto sp = sp0;
  auto cn = cn0;
  for (int block = 0; block < 4; ++block) {
    sp = propagate(sp, 1e-3, 500, Method::splitstep);
    cn = propagate(cn, 1e-3, 500, Method::implicit);
    EXPECT_NEAR(sp.norm(), 1.0, 1e-8);
    EXPECT_NEAR(cn.norm(), cn0.norm(), 1e-8);
    EXPECT_NEAR(energy(sp, Scheme::spectral), e_sp, 1e-8);
    EXPECT_NEAR(energy(cn, Scheme::central4), e_cn, 1e-8);
  }
}

TEST(Propagate, ImplicitAgreesWithSplitstepAtMatchedResolution) {
  auto sp = propagate(initial_gaussian(reference_grid(), 1.0, 0.0, 0.0, {}), 1e-3, 2000,
                      Method::splitstep);
  SpatialGrid vg(-40.0, 40.0, 4097, Boundary::vanishing);
  auto cn = propagate(initial_gaussian(vg, 1.0, 0.0, 0.0, {}), 1e-3, 2000, Method::implicit);
  // Node i of both grids sits at the same x.
  const auto a = sp.density();
  const auto b = cn.density();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  EXPECT_LT(std::sqrt(acc * sp.grid().dx()), 1e-5);
}

TEST(Propagate, TimeReversalRecoversInitialDensity) {
  auto s0 = initial_gaussian(reference_grid(), 1.0, 1.0, 0.7, {});
  auto s1 = propagate(s0, 1e-3, 1500, Method::splitstep);
  for (auto& z : s1.psi) z = std::conj(z);
  auto back = propagate(s1, 1e-3, 1500, Method::splitstep);
  const auto r0 = s0.density();
  const auto r1 = back.density();
  double acc = 0.0;
  for (std::size_t i = 0; i < r0.size(); ++i) acc += (r0[i] - r1[i]) * (r0[i] - r1[i]);
  EXPECT_LT(std::sqrt(acc * s0.grid().dx()), 1e-6);

  SpatialGrid vg(-40.0, 40.0, 2049, Boundary::vanishing);
  auto c0 = initial_gaussian(vg, 1.0, 1.0, 0.7, {});
  auto c1 = propagate(c0, 1e-3, 1500, Method::implicit);
  for (auto& z : c1.psi) z = std::conj(z);
  auto cback = propagate(c1, 1e-3, 1500, Method::implicit);
  const auto q0 = c0.density();
  const auto q1 = cback.density();
  acc = 0.0;
  for (std::size_t i = 0; i < q0.size(); ++i) acc += (q0[i] - q1[i]) * (q0[i] - q1[i]);
  EXPECT_LT(std::sqrt(acc * vg.dx()), 1e-6);
}

TEST(Propagate, MethodBoundaryMismatch) {
  auto s = initial_gaussian(reference_grid(), 1.0, 0.0, 0.0, {});
  try {
    propagate(s, 1e-3, 10, Method::implicit);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MethodBoundaryMismatch);
  }
  SpatialGrid vg(-40.0, 40.0, 1025, Boundary::vanishing);
  auto v = initial_gaussian(vg, 1.0, 0.0, 0.0, {});
  EXPECT_THROW(propagate(v, 1e-3, 10, Method::splitstep), Error);
}

TEST(Propagate, RejectsNonPositiveStep) {
  auto s = initial_gaussian(reference_grid(), 1.0, 0.0, 0.0, {});
  EXPECT_THROW(propagate(s, 0.0, 10, Method::splitstep), Error);
  EXPECT_THROW(propagate(s, -1e-3, 10, Method::splitstep), Error);
}

TEST(Propagate, AbortsWhenDensityReachesTheEdge) {
  SpatialGrid g(-10.0, 10.0, 512, Boundary::periodic);
  auto s = initial_gaussian(g, 1.0, 0.0, 0.0, {});
  try {
    propagate(s, 1e-2, 2000, Method::splitstep);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridTooNarrow);
  }
}

TEST(Propagate, PropagateToHitsRequestedTime) {
  auto s = initial_gaussian(reference_grid(), 1.0, 0.0, 0.0, {});
  auto t = propagate_to(s, 1.2345, 1e-3, Method::splitstep);
  EXPECT_EQ(t.time, 1.2345);
}
