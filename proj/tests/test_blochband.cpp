#include <gtest/gtest.h>

#include <cmath>

#include "lmt/blochband.hpp"
#include "lmt/pulses.hpp"

using namespace lmt;

TEST(Bands, FreeParticleParabola) {
  for (int i = 0; i <= 512; ++i) {
    const double k = -1.0 + 2.0 * i / 512.0;
    const auto e = bloch_spectrum(0.0, k, 3);
    const double kf = fold_quasimomentum(k);
    EXPECT_NEAR(e[0], kf * kf, 1e-10);
    EXPECT_NEAR(e[1], (std::abs(kf) - 2.0) * (std::abs(kf) - 2.0), 1e-10);
  }
}

TEST(Bands, WeakLatticeEdgeGap) {
  EXPECT_NEAR(edge_gap(0.5) / 0.25, 1.0, 0.05);
}

TEST(Bands, HarmonicGroundState) {
  const double V0 = 20.0;
  // potential (V0/2) cos 2x: minimum -V0/2, harmonic zero point sqrt(V0)
  const double e0 = bloch_spectrum(V0, 0.0, 1)[0];
  const double harmonic = -V0 / 2.0 + std::sqrt(V0);
  EXPECT_NEAR(e0, harmonic, 0.1 * std::abs(harmonic));
}

TEST(Bands, Periodic) {
  const auto a = bloch_spectrum(7.0, 0.3, 4);
  const auto b = bloch_spectrum(7.0, 2.3, 4);
  const auto c = bloch_spectrum(7.0, -0.3, 4);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(a[i], b[i], 1e-12);
    EXPECT_NEAR(a[i], c[i], 1e-12);
  }
}

TEST(BandAverage, FreeAndFlat) {
  EXPECT_NEAR(band_average(0.0, 0), 1.0 / 3.0, 1e-10);
  const double flat = band_average(60.0, 0);
  EXPECT_NEAR(flat, bloch_spectrum(60.0, 0.0, 1)[0], 1e-3);
  EXPECT_EQ(band_average(13.0, 1), band_average(13.0, 1));
}

TEST(BandAverage, ExcitedBandMaximumNearNine) {
  const double x = numeric::golden_section_max([](double v) { return band_average_uncached(v, 1); }, 1.0, 30.0, 0.01);
  EXPECT_NEAR(x, 9.1, 0.1);
}

TEST(LandauZener, ClosedForms) {
  const auto rb = presets::rb87_d2();
  EXPECT_EQ(landau_zener_probability(rb, 0.0, 393.5), 1.0);
  const double a = rb.acceleration_from_tilt(pi * pi / 32.0);
  EXPECT_NEAR(landau_zener_probability(rb, 0.5, a), std::exp(-1.0), 1e-13);
  EXPECT_LT(landau_zener_probability(rb, 0.5, 1e-3), 1e-300);
  EXPECT_THROW(landau_zener_probability(rb, -0.1, 1.0), DomainError);
}

TEST(LandauZener, Linewidth) {
  EXPECT_EQ(lz_linewidth_from_probability(2.0, 0.0), 0.0);
  const double P = 1e-7, tilt = 3.0;
  EXPECT_NEAR(lz_linewidth_from_probability(tilt, P) / (tilt / two_pi), P, 1e-13);
  EXPECT_THROW(lz_linewidth_from_probability(tilt, 1.0), DomainError);
}

TEST(BlochPhase, FreeKineticPhase) {
  const auto rb = presets::rb87_d2();
  auto s = build_schedule(rb, 3, 0.0, 393.5, 0.2e-3, 0.0);
  const double tr = rb.recoil_time();
  const double t0 = s.t_accel_start(), t1 = s.t_accel_end();
  // folded parabola: the atom stays at p - p_L folded into the zone
  const auto f = [&](double t) {
    const double k = fold_quasimomentum(-s.momentum(t));
    return k * k;
  };
  double expect = 0.0;
  const double TB = bloch_period(rb, 393.5);
  for (int i = 0; i < 6; ++i)
    expect += numeric::adaptive_simpson(f, t0 + i * TB / 2, t0 + (i + 1) * TB / 2, 1e-16) / tr;
  EXPECT_NEAR(adiabatic_bloch_phase(s, 0.0, t0, t1), expect, 1e-8 * expect);
}

TEST(BlochPhase, OnePeriodIsBandAverage) {
  const auto rb = presets::rb87_d2();
  const auto s = build_schedule(rb, 1, 20.0, 393.5, 0.0, 0.0);
  const double TB = rb.to_recoil_time(bloch_period(rb, 393.5));
  EXPECT_NEAR(adiabatic_bloch_phase(s, 0.0, 0.0, s.t_accel_end()), band_average(20.0, 0) * TB, 1e-8);
}

TEST(BlochPhase, IndependentOfStartAfterWholePeriods) {
  const auto rb = presets::rb87_d2();
  const auto s = build_schedule(rb, 4, 20.0, 393.5, 0.0, 0.0);
  const double a = adiabatic_bloch_phase(s, 0.0, 0.0, s.t_accel_end());
  const double b = adiabatic_bloch_phase(s, 0.37, 0.0, s.t_accel_end());
  EXPECT_NEAR(a, b, 1e-9);
}
