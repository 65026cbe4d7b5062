#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "madelung_lab/statistics.hpp"
#include "test_support.hpp"

using namespace madelung_lab;
using namespace test_support;

TEST(ForceMoments, LowRanksVanishAndThirdRankIsFixed) {
  for (double t : {0.0, 1.0, 2.0, 4.0}) {
    auto f = extract(evolved_gaussian(t), Scheme::spectral);
    auto r = force_moments(f);
    ASSERT_EQ(r.rows.size(), 5u);
    for (int k = 0; k < 3; ++k) EXPECT_LT(std::abs(r.rows[k].lhs), 1e-8) << "k=" << k << " t=" << t;
    EXPECT_NEAR(r.rows[3].lhs, -1.5, 1.5e-6);
    for (const auto& row : r.rows) {
      EXPECT_TRUE(std::isfinite(row.residual));
      EXPECT_LT(std::abs(row.residual), 1e-6 * (1.0 + std::abs(row.rhs))) << "k=" << row.k;
    }
  }
}

TEST(ForceMoments, BoostedOffCentrePacketAndNonUnitConstants) {
  // <X^4 F> = -(1/m)(hbar/2)^2 24 <X> is nonzero once the packet moves.
  PhysicalConstants k{0.7, 1.6};
  auto s = initial_gaussian(reference_grid(), 1.2, -2.0, 0.9, k);
  s = propagate_to(s, 1.5, 1e-3, Method::splitstep);
  auto r = force_moments(extract(s, Scheme::spectral));
  EXPECT_NEAR(r.rows[3].lhs, -3.0 * k.hbar * k.hbar / (2.0 * k.mass), 1e-6);
  const double mean_x = -2.0 + 0.9 / k.mass * 1.5;
  EXPECT_NEAR(r.rows[4].rhs, -(k.hbar * k.hbar / 4.0) / k.mass * 24.0 * mean_x, 1e-9);
  EXPECT_LT(std::abs(r.rows[4].residual), 1e-6 * (1.0 + std::abs(r.rows[4].rhs)));
}

TEST(ForceMoments, ScaleAsHbarSquared) {
  double prev = 0.0;
  for (double hbar : {0.5, 1.0, 2.0}) {
    PhysicalConstants k{hbar, 1.0};
    auto r = force_moments(extract(evolved_gaussian(1.0, reference_grid(), k), Scheme::spectral));
    const double scaled = r.rows[3].lhs / (hbar * hbar);
    if (prev != 0.0) { EXPECT_NEAR(scaled, prev, 1e-6); }
    prev = scaled;
  }
}

TEST(ForceMoments, IntegrationByPartsOfThirdDerivative) {
  auto f = extract(evolved_gaussian(2.0), Scheme::spectral);
  const auto d3 = derivative(f.rho, 3, Scheme::spectral);
  for (int k = 3; k <= 4; ++k) {
    const double lhs = raw_moment(d3, k);
    const double rhs = -double(k * (k - 1) * (k - 2)) * raw_moment(f.rho, k - 3);
    EXPECT_NEAR(lhs, rhs, 1e-8) << "k=" << k;
  }
}

TEST(ForceMoments, QuadratureOfWeightedForceAgreesWithDerivativeForm) {
  auto f = extract(evolved_gaussian(1.0), Scheme::spectral);
  auto r = force_moments(f, 3);
  const double masked = integrate_with(f.grid, [&](std::size_t i, double x) {
    return f.valid(i) ? x * x * x * f.rho[i] * f.F_bar[i] : 0.0;
  });
  EXPECT_NEAR(masked, r.rows[3].lhs, 1e-3);
}

TEST(ForceMoments, TailTruncation) {
  SpatialGrid g(-8.0, 8.0, 512, Boundary::periodic);
  auto f = extract(initial_gaussian(g, 1.0, 0.0, 0.0, {}), Scheme::spectral);
  try {
    force_moments(f, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TailTruncation);
  }
  EXPECT_THROW(force_moments(f, -1), Error);
}

TEST(ForceMoments, SchemesAgree) {
  auto s = evolved_gaussian(2.0);
  auto a = force_moments(extract(s, Scheme::spectral));
  auto b = force_moments(extract(s, Scheme::central4));
  for (std::size_t k = 0; k < a.rows.size(); ++k) EXPECT_NEAR(a.rows[k].lhs, b.rows[k].lhs, 1e-6);
}

TEST(ForceMoments, JsonAndTableCarryMetadata) {
  auto r = force_moments(extract(evolved_gaussian(1.0), Scheme::spectral));
  auto j = r.to_json();
  EXPECT_EQ(j["grid"]["n_points"], 4096);
  EXPECT_EQ(j["scheme"], "spectral");
  EXPECT_EQ(j["force_moments"].size(), 5u);
  EXPECT_DOUBLE_EQ(j["time"].get<double>(), 1.0);
  std::ostringstream os;
  r.print_table(os);
  EXPECT_NE(os.str().find("closed form"), std::string::npos);
}

TEST(EnergyPartition, KineticPlusInternalEqualsTotal) {
  for (double p : {0.0, 0.8}) {
    for (double t : {0.0, 1.0, 4.0}) {
      auto s = propagate_to(initial_gaussian(reference_grid(), 1.0, 0.0, p, {}), t, 1e-3,
                            Method::splitstep);
      auto f = extract(s, Scheme::spectral);
      auto e = energy_partition(s, f);
      EXPECT_NEAR(e.E_total, e.K_mean + e.I_mean, 1e-8);
      EXPECT_NEAR(e.Q_mean, e.I_mean, 1e-6);
      EXPECT_NEAR(e.E_total, p * p / 2.0 + 0.125, 1e-6);
    }
  }
}

TEST(EnergyPartition, StaticPacketIsAllInternal) {
  auto s = evolved_gaussian(0.0);
  auto e = energy_partition(s, extract(s, Scheme::spectral));
  EXPECT_NEAR(e.K_mean, 0.0, 1e-14);
  EXPECT_NEAR(e.I_mean, 0.125, 1e-10);
}

TEST(EnergyPartition, ConstantInTime) {
  auto s = evolved_gaussian(0.0);
  const double e0 = energy_partition(s, extract(s, Scheme::spectral)).E_total;
  for (double t : {1.0, 2.0, 3.0, 4.0}) {
    s = propagate_to(s, t, 1e-3, Method::splitstep);
    EXPECT_NEAR(energy_partition(s, extract(s, Scheme::spectral)).E_total, e0, 1e-8);
  }
}

TEST(EnergyPartition, MatchesClosedFormMeanEnergy) {
  GaussianParams gp{0.8, {1.3, 0.6}};
  auto s = evolved_gaussian(1.0, reference_grid(), gp.constants, gp.sigma0);
  auto e = energy_partition(s, extract(s, Scheme::spectral));
  EXPECT_NEAR(e.E_total, gaussian::mean_energy(gp), 1e-6);
}

namespace {

std::vector<MadelungFields> series(const std::vector<double>& times) {
  std::vector<MadelungFields> out;
  for (double t : times) out.push_back(extract(evolved_gaussian(t), Scheme::spectral));
  return out;
}

}  // namespace

TEST(Uncertainty, MinimumAtTimeZeroAndBoundHolds) {
  auto fs = series({0.0, 1.0, 2.0, 4.0});
  auto r = uncertainty_check(fs);
  EXPECT_NEAR(r.bound, 0.5, 1e-15);
  EXPECT_NEAR(r.rows[0].product, 0.5, 1e-6);
  EXPECT_EQ(r.min_product_time, 0.0);
  EXPECT_TRUE(r.all_bounds_satisfied);
  for (const auto& row : r.rows) {
    // Oracle: product = (hbar / 2 m s0) sigma(t).
    EXPECT_NEAR(row.product, 0.5 * gaussian::sigma(GaussianParams{}, row.time), 1e-6);
    EXPECT_TRUE(row.cauchy_schwarz);
    EXPECT_NEAR(row.x4 / (row.position_variance * row.position_variance), 3.0, 1e-6);
  }
}

TEST(Uncertainty, SecondMomentIdentity) {
  for (double t : {0.5, 2.0, 4.0}) {
    const double h = 1e-2;
    auto fs = series({t - h, t, t + h});
    auto r = uncertainty_check(fs);
    ASSERT_TRUE(r.rows[1].has_identity);
    EXPECT_FALSE(r.rows[0].has_identity);
    EXPECT_LT(std::abs(r.rows[1].identity_residual), 1e-4) << "t=" << t;
    // The opposite sign misses by 6 sigma^2 sigma'^2 + hbar^2/2m^2.
    const double s = gaussian::sigma(GaussianParams{}, t);
    const double ds = gaussian::sigma_rate(GaussianParams{}, t);
    EXPECT_NEAR(r.rows[1].xv_sq - r.rows[1].opposite_sign_rhs, 6.0 * s * s * ds * ds + 0.5, 1e-4);
  }
}

TEST(Uncertainty, NeedsThreeSnapshots) {
  auto fs = series({0.0, 1.0});
  try {
    uncertainty_check(fs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientSnapshots);
  }
}
