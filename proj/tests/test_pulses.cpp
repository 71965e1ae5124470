#include <gtest/gtest.h>

#include <cmath>

#include "lmt/pulses.hpp"

using namespace lmt;

namespace {
const SpeciesLattice rb = presets::rb87_d2();
}

TEST(Schedule, BoxPulseLimit) {
  const auto s = build_schedule(rb, 500, 20, 393.5, 2e-3, 0.0);
  EXPECT_NEAR(s.T_accel, 500 * bloch_period(rb, 393.5), 1e-15);
  const auto one = build_schedule(rb, 1, 20, 393.5, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(one.T_accel, bloch_period(rb, 393.5));
}

TEST(Schedule, SmallRampApproachesBox) {
  const double box = 500 * bloch_period(rb, 393.5);
  const auto s = build_schedule(rb, 500, 20, 393.5, 2e-3, 1e-7);
  EXPECT_NEAR(s.T_accel / box, 1.0, 1e-5);
}

TEST(Schedule, ReferenceOperatingPoint) {
  const auto s = build_schedule(rb, 500, 20, 393.5, 2e-3, 1e-3);
  const double box = 500 * bloch_period(rb, 393.5);
  EXPECT_GT(s.T_accel, box);
  EXPECT_NEAR(s.T_accel, 15.0e-3, 1.0e-3);
  EXPECT_NEAR(s.final_velocity() / s.target_velocity(), 1.0, 1e-10);
  EXPECT_NEAR(s.momentum(s.t_end()), 1000.0, 1e-7);
}

TEST(Schedule, VelocityIsIntegralOfAcceleration) {
  const auto s = build_schedule(rb, 50, 20, 393.5, 0.5e-3, 0.4e-3);
  for (double t : {0.7e-3, 0.9e-3, 1.2e-3, s.t_accel_end() - 0.1e-3}) {
    const double v = numeric::adaptive_simpson([&](double x) { return s.accel(x); }, 0.0, t, 1e-12);
    EXPECT_NEAR(s.velocity(t), v, 1e-9 * s.final_velocity());
  }
}

TEST(Schedule, ShapeIsSymmetric) {
  const auto s = build_schedule(rb, 50, 20, 393.5, 0.5e-3, 0.4e-3);
  const double t0 = s.t_accel_start(), t1 = s.t_accel_end();
  for (double u : {0.05e-3, 0.2e-3, 0.33e-3}) {
    EXPECT_NEAR(s.accel(t0 + u), s.accel(t1 - u), 1e-9);
    EXPECT_NEAR(s.V0(u), s.V0(s.t_end() - u), 1e-9);
  }
  EXPECT_NEAR(s.accel(t0 + 0.2e-3), 0.5 * 393.5, 1e-9);
  EXPECT_NEAR(s.V0(0.25e-3), 10.0, 1e-12);
  EXPECT_EQ(s.V0(0.5 * (t0 + t1)), 20.0);
  EXPECT_EQ(s.accel(0.5 * (t0 + t1)), 393.5);
}

TEST(Schedule, Infeasible) {
  try {
    build_schedule(rb, 10, 20, 393.5, 0.5e-3, 1e-3);
    FAIL();
  } catch (const InfeasibleError& e) {
    EXPECT_EQ(e.minimal_count(), static_cast<long>(std::ceil(1e-3 / bloch_period(rb, 393.5))));
  }
  EXPECT_THROW(build_schedule(rb, 0.5, 20, 393.5, 0.5e-3, 0.0), DomainError);
  EXPECT_THROW(build_schedule(rb, 10, 20, -1.0, 0.5e-3, 0.0), DomainError);
}

TEST(Chirp, BoxSlopeAndFinalValue) {
  const auto s = build_schedule(rb, 500, 20, 393.5, 2e-3, 0.0);
  const double slope = 393.5 * rb.wave_number() / pi;
  const double t0 = s.t_accel_start();
  EXPECT_NEAR((s.chirp(t0 + 2e-3) - s.chirp(t0 + 1e-3)) / 1e-3, slope, 1e-6 * slope);
  // 2N times hbar k_L^2 / (pi m)
  const double expect = 2 * 500 * si::hbar * rb.wave_number() * rb.wave_number() / (pi * rb.atom_mass);
  EXPECT_NEAR(s.chirp(s.t_end()), expect, 1e-9 * expect);
  const auto h = hold_schedule(rb, 20, 0.5e-3, 1e-3);
  EXPECT_EQ(h.chirp(0.1e-3), h.chirp(1.2e-3));
  EXPECT_EQ(h.chirp(1.2e-3), 0.0);
}

TEST(Position, BoxPulseClosedForm) {
  const auto s = build_schedule(rb, 20, 20, 393.5, 0.5e-3, 0.0);
  const double dt = 0.3e-3;
  EXPECT_NEAR(s.position(s.t_accel_start() + dt), 0.5 * 393.5 * dt * dt, 1e-12);
}

TEST(Samples, CoverTheSchedule) {
  const auto s = build_schedule(rb, 20, 20, 393.5, 0.5e-3, 0.1e-3);
  const auto v = sample_schedule(s, 11);
  ASSERT_EQ(v.size(), 11u);
  EXPECT_EQ(v.front().t, 0.0);
  EXPECT_NEAR(v.back().t, s.t_end(), 1e-18);
  EXPECT_NEAR(v.back().pL, 40.0, 1e-8);
  EXPECT_THROW(sample_schedule(s, 1), PreconditionError);
}
