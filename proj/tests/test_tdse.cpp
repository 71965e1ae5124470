#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "lmt/tdse.hpp"

using namespace lmt;

namespace {
const SpeciesLattice rb = presets::rb87_d2();

SimConfig plain_grid(double periods, int ppp, double dt) {
  SimConfig c;
  c.span = periods * pi;
  c.dx = pi / ppp;
  c.dt = dt;
  c.absorber_strength = 0.0;
  return c;
}

double width2(const WavefunctionGrid& g) {
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double w = std::norm(g.psi[i]);
    m0 += w;
    m1 += w * g.x(i);
    m2 += w * g.x(i) * g.x(i);
  }
  m1 /= m0;
  return m2 / m0 - m1 * m1;
}

double mean_p(const WavefunctionGrid& g) {
  detail::Fft fft(g.size());
  return detail::mean_momentum(g, fft);
}

double distance(const WavefunctionGrid& a, const WavefunctionGrid& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a.psi[i] - b.psi[i]);
  return std::sqrt(s * a.dx);
}
}  // namespace

TEST(InitState, WidthNormAndMomentum) {
  const auto c = plain_grid(64, 16, 1e-3);
  const auto g = init_state(MomentumDistribution::gaussian(0.1), c);
  EXPECT_NEAR(g.norm(), 1.0, 1e-10);
  EXPECT_NEAR(std::sqrt(width2(g)), 1.0 / (2.0 * 0.1), 0.01 * 5.0);
  EXPECT_NEAR(mean_p(g), 0.0, 1e-12);
}

TEST(InitState, RejectsSmallGrid) {
  EXPECT_THROW(init_state(MomentumDistribution::gaussian(0.1), plain_grid(16, 16, 1e-3)), ConfigError);
}

TEST(Config, Validation) {
  auto c = plain_grid(64, 8, 1e-3);
  EXPECT_THROW(c.validate(), ConfigError);
  c = plain_grid(64, 16, 1e-3);
  c.bin_half_width = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = plain_grid(64, 16, 0.0);
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Propagate, FreeDispersion) {
  const auto c = plain_grid(64, 16, 0.01);
  const double T = 25.0;
  const auto h = hold_schedule(rb, 0.0, 0.0, T * rb.recoil_time());
  const auto g0 = init_state(MomentumDistribution::gaussian(0.1), c);
  // <p^2> from the grid; with m = 1/2 the packet spreads as x + 2 p t
  detail::Fft fft(g0.size());
  std::copy(g0.psi.begin(), g0.psi.end(), fft.data());
  fft.forward();
  double p2 = 0.0, w = 0.0;
  for (std::size_t k = 0; k < g0.size(); ++k) {
    const double p = detail::grid_momentum(k, g0.size(), c.span);
    p2 += std::norm(fft.data()[k]) * p * p;
    w += std::norm(fft.data()[k]);
  }
  p2 /= w;
  const auto r = propagate(g0, h, c);
  const double expect = width2(g0) + 4.0 * p2 * T * T;
  EXPECT_NEAR(width2(r.state) / expect, 1.0, 1e-6);
}

TEST(Propagate, StaticLatticeIsUnitary) {
  const auto c = plain_grid(64, 16, 2e-3);
  const auto h = hold_schedule(rb, 20.0, 0.0, 1e4 * 2e-3 * rb.recoil_time());
  const auto r = propagate(init_state(MomentumDistribution::gaussian(0.1), c), h, c);
  EXPECT_GE(r.steps, 10000);
  EXPECT_LT(std::abs(r.state.norm() - 1.0), 1e-10);
  EXPECT_EQ(r.state.absorbed, 0.0);
}

TEST(Propagate, EhrenfestDrift) {
  const auto s = build_schedule(rb, 1, 0.0, 393.5, 0.0, 0.0);
  auto c = default_sim(s, GridOptions{64, 0, 2048, 0.1});
  c.absorber_strength = 0.0;
  const auto r = propagate(init_state(MomentumDistribution::gaussian(0.1), c), s, c);
  // one Bloch period moves the packet by -2 hbar k_L
  EXPECT_NEAR(mean_p(r.state) / -2.0, 1.0, 1e-8);
}

TEST(Propagate, SecondOrderInTime) {
  const auto s = build_schedule(rb, 2, 5.0, 393.5, 0.02e-3, 0.0);
  auto c = default_sim(s, GridOptions{64, 0, 2048, 0.1});
  c.absorber_strength = 0.0;
  const auto g0 = init_state(MomentumDistribution::gaussian(0.1), c);
  std::vector<WavefunctionGrid> out;
  for (double dt : {2e-3, 1e-3, 0.5e-3}) {
    c.dt = dt;
    out.push_back(propagate(g0, s, c).state);
  }
  const double e1 = distance(out[0], out[1]);
  const double e2 = distance(out[1], out[2]);
  EXPECT_NEAR(e1 / e2, 4.0, 0.5);
}

TEST(Propagate, PhaseBound) {
  const auto s = build_schedule(rb, 2, 5.0, 393.5, 0.02e-3, 0.0);
  auto c = default_sim(s, GridOptions{64, 0, 2048, 0.1});
  c.dt = 1.0;
  EXPECT_THROW(propagate(init_state(MomentumDistribution::gaussian(0.1), c), s, c), ConfigError);
}

TEST(Propagate, FramesAgree) {
  const auto s = build_schedule(rb, 5, 20.0, 393.5, 0.1e-3, 0.05e-3);
  auto c = default_sim(s, GridOptions{64, 0, 2048, 0.1});
  const auto phi = MomentumDistribution::gaussian(0.1);
  const auto lat = run_tdse(s, phi, c);
  c.frame = Frame::Reduced;
  const auto red = run_tdse(s, phi, c);
  EXPECT_NEAR(lat.report.total_loss, red.report.total_loss, 1e-4);
  for (int j = -2; j <= 2; ++j) EXPECT_NEAR(lat.report.bin(j), red.report.bin(j), 1e-4) << j;
}

TEST(Absorber, RemovesOutgoingPacket) {
  auto c = plain_grid(128, 16, 0.01);
  c.absorber_strength = 1.0 / (8.0 * c.dt);
  // the packet wavelength must be short against the absorber layer, or it reflects
  const auto h = hold_schedule(rb, 0.0, 0.0, 300.0 * rb.recoil_time());
  const auto r = propagate(init_state(MomentumDistribution::gaussian(0.05, 0.6), c), h, c);
  // about 0.1% reflects at p = 0.6; atoms escaping the tilted lattice are much faster
  EXPECT_LT(r.state.norm(), 2e-3);
  EXPECT_NEAR(r.state.norm() + r.state.absorbed, 1.0, 1e-10);
  double centre = 0.0;
  for (std::size_t i = 0; i < r.state.size(); ++i)
    if (std::abs(r.state.x(i)) < 0.25 * c.span) centre += std::norm(r.state.psi[i]) * c.dx;
  EXPECT_LT(centre, 2e-3);
}

TEST(Diagnostics, NoAccelerationStaysInZeroBin) {
  const auto h = hold_schedule(rb, 20.0, 2e-3, 0.1e-3);
  auto c = default_sim(h, GridOptions{64, 0, 2048, 0.1});
  c.dt = 2e-3;
  const auto run = run_tdse(h, MomentumDistribution::gaussian(0.1), c);
  // the finite load and unload ramps leave a residue of order 1e-5
  EXPECT_GT(run.report.survival, 1.0 - 1e-4);
  EXPECT_LT(run.report.absorbed, 1e-4);
  EXPECT_LT(run.report.nonadiabatic, 1e-4);
  EXPECT_NEAR(run.report.sum(), 1.0, 1e-6);
}

TEST(Diagnostics, BoxPulseExcitesNeighbourBins) {
  const auto phi = MomentumDistribution::gaussian(0.1);
  const auto box = build_schedule(rb, 10, 20.0, 393.5, 2e-3, 0.0);
  const auto smooth = build_schedule(rb, 10, 20.0, 393.5, 2e-3, 0.2e-3);
  const GridOptions g{64, 0, 512, 0.1};
  const auto rb_box = run_tdse(box, phi, default_sim(box, g)).report;
  const auto rb_smooth = run_tdse(smooth, phi, default_sim(smooth, g)).report;
  const double n_box = rb_box.bin(-1) + rb_box.bin(1);
  const double n_smooth = rb_smooth.bin(-1) + rb_smooth.bin(1);
  EXPECT_GE(n_box, 2.0 * n_smooth);
}

TEST(Diagnostics, RequiresUnload) {
  const auto s = build_schedule(rb, 1, 20.0, 393.5, 0.0, 0.0);
  const auto c = default_sim(s, GridOptions{64, 0, 2048, 0.1});
  EXPECT_THROW(diagnostics(init_state(MomentumDistribution::gaussian(0.1), c), s, c), PreconditionError);
}

TEST(LatticeShift, OffsetLimits) {
  EXPECT_EQ(lattice_shift_offset(0.0, 20.0), 0.0);
  EXPECT_NEAR(lattice_shift_offset(1e-8, 20.0), 0.5e-8 / 20.0, 1e-20);
  EXPECT_THROW(lattice_shift_offset(30.0, 20.0), DomainError);
}

TEST(LatticeShift, NoAccelerationIsPlainPropagation) {
  const auto h = hold_schedule(rb, 20.0, 0.05e-3, 0.05e-3);
  auto c = default_sim(h, GridOptions{64, 0, 2048, 0.1});
  const auto g0 = init_state(MomentumDistribution::gaussian(0.1), c);
  const auto a = propagate(g0, h, c);
  const auto b = lattice_shift_propagate(g0, h, c);
  EXPECT_EQ(distance(a.state, b.state), 0.0);
  const auto ramped = build_schedule(rb, 10, 20.0, 393.5, 0.05e-3, 0.1e-3);
  EXPECT_THROW(lattice_shift_propagate(g0, ramped, c), PreconditionError);
}

TEST(Snapshot, RoundTrip) {
  const auto c = plain_grid(64, 16, 1e-3);
  auto g = init_state(MomentumDistribution::gaussian(0.1, 0.1), c);
  g.t = 1.25e-3;
  const auto path = (std::filesystem::temp_directory_path() / "lmt_snapshot_test.psi").string();
  write_snapshot(path, g);
  const auto r = read_snapshot(path);
  std::remove(path.c_str());
  ASSERT_EQ(r.size(), g.size());
  EXPECT_EQ(r.dx, g.dx);
  EXPECT_EQ(r.x0, g.x0);
  EXPECT_EQ(r.t, g.t);
  EXPECT_EQ(distance(r, g), 0.0);
  EXPECT_THROW(read_snapshot("/nonexistent/file.psi"), Error);
}
