#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "lmt/wsspectrum.hpp"

using namespace lmt;

namespace {
const SpeciesLattice rb = presets::rb87_d2();
const FloquetSettings st = default_floquet(rb);

double largest_singular_value(const Eigen::MatrixXcd& U) {
  return Eigen::JacobiSVD<Eigen::MatrixXcd>(U).singularValues()(0);
}

// coarse sweep shared by the trace tests
const WsTrace& coarse_trace() {
  static const WsTrace tr = ws_sweep(rb, 20.0, linear_grid(150.0, 700.0, 2.0), st);
  return tr;
}
}  // namespace

TEST(Floquet, FreeParticleIsPureTranslation) {
  const auto U = floquet_bloch_matrix(0.0, rb.tilt(300.0), st);
  const auto lv = ws_eigensystem(U, two_pi / rb.tilt(300.0));
  // a shift of a diagonal phase matrix is nilpotent: all eigenvalues vanish
  for (const auto& l : lv) EXPECT_LT(std::abs(l.lambda), 1e-6);
  // every column keeps unit norm except the one that falls off the top
  int lost = 0;
  for (Eigen::Index k = 0; k < U.cols(); ++k) {
    const double nrm = U.col(k).norm();
    if (nrm < 1e-12) ++lost;
    else EXPECT_NEAR(nrm, 1.0, 1e-12);
  }
  EXPECT_EQ(lost, 1);
}

TEST(Floquet, Contraction) {
  for (double V0 : {5.0, 20.0, 60.0})
    for (double a : {30.0, 393.5, 700.0})
      EXPECT_LE(largest_singular_value(floquet_bloch_matrix(rb, V0, a, st)), 1.0 + 1e-12) << V0 << " " << a;
}

TEST(Floquet, ConvergedUnderDoubling) {
  FloquetSettings s = st;
  s.n_trunc = 32;
  s.steps = 2048;
  const auto a = ws_point_tilt(20.0, rb.tilt(393.5), s);
  s.n_trunc = 64;
  s.steps = 4096;
  const auto b = ws_point_tilt(20.0, rb.tilt(393.5), s);
  for (int k = 0; k <= 2; ++k)
    EXPECT_LT(std::abs(numeric::wrap_signed(a.ladders[k].E - b.ladders[k].E, a.tilt)), 1e-8) << k;
}

TEST(Eigensystem, Definitions) {
  const double TB = 2.5;
  Eigen::MatrixXcd U = Eigen::MatrixXcd::Zero(2, 2);
  U(0, 0) = 1.0;
  U(1, 1) = std::exp(-1.0);
  const auto lv = ws_eigensystem(U, TB);
  ASSERT_EQ(lv.size(), 2u);
  EXPECT_NEAR(lv[0].E, 0.0, 1e-15);
  EXPECT_NEAR(lv[0].Gamma, 0.0, 1e-15);
  EXPECT_NEAR(lv[1].Gamma, 2.0 / TB, 1e-14);
  Eigen::MatrixXcd bad = Eigen::MatrixXcd::Identity(1, 1) * 1.1;
  EXPECT_THROW(ws_eigensystem(bad, TB), ContractionError);
}

TEST(Eigensystem, LadderHierarchySpansDecades) {
  FloquetSettings s = st;
  s.alpha_max = 3;
  const auto p = ws_point(rb, 20.0, 300.0, s);
  double lo = 1e300, hi = 0.0;
  int resolved = 0;
  for (const auto& l : p.ladders)
    if (l.Gamma > 0.0) {
      ++resolved;
      lo = std::min(lo, l.Gamma);
      hi = std::max(hi, l.Gamma);
    }
  EXPECT_GE(resolved, 3);
  EXPECT_GE(hi / lo, 1e4);
}

TEST(Approx, LimitsAndLadderSpacing) {
  EXPECT_EQ(approx_ws_energy(20.0, 0.0, 1, 0), band_average(20.0, 1));
  EXPECT_NEAR(approx_ws_energy(20.0, 1e-9, 0, 0), band_average(20.0, 0), 1e-9);
  const double t = rb.tilt(250.0);
  EXPECT_NEAR(approx_ws_energy(20.0, t, 1, 3) - approx_ws_energy(20.0, t, 1, 2), t, 1e-12);
  EXPECT_THROW(tilt_angle(1.0, 10.0), DomainError);
}

TEST(Approx, AgreesWithExactAtModerateTilt) {
  const auto p = ws_point(rb, 20.0, 100.0, st);
  const double ref = approx_ws_energy(rb, 20.0, 100.0, 0, 0);
  EXPECT_LT(std::abs(numeric::wrap_signed(p.ladders[0].E - ref, p.tilt)), 0.05);
}

TEST(Sorting, ByLinewidth) {
  FloquetSettings s = st;
  s.alpha_max = 1;
  std::vector<ComplexLevel> lv{{0.3, 1e-6, {}}, {0.9, 1e-3, {}}};
  const auto p = sort_ladders(lv, 20.0, 2.0, s);
  EXPECT_EQ(p.regime, 1);
  EXPECT_EQ(p.ladders[0].Gamma, 1e-6);
  EXPECT_EQ(p.ladders[1].Gamma, 1e-3);
}

TEST(Sorting, BelowFloorUsesApproximation) {
  const auto p = ws_point(rb, 20.0, 1.0, st);
  EXPECT_EQ(p.regime, 3);
  EXPECT_EQ(p.provenance, Provenance::Approx);
  for (const auto& l : p.ladders) EXPECT_EQ(l.Gamma, 0.0);
}

TEST(Sorting, DegenerateLinewidthsMatchApproximateEnergies) {
  const auto tr = ws_sweep(rb, 20.0, linear_grid(76.0, 84.0, 1.0), st);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    for (int a = 0; a <= 1; ++a) {
      const double ref = approx_ws_energy(rb, 20.0, tr.aL(i), a, 0);
      EXPECT_LT(std::abs(tr.E(a, i) - ref), 0.1) << tr.aL(i) << " alpha " << a;
    }
    if (i > 0) {
      EXPECT_LT(std::abs(tr.E(0, i) - tr.E(0, i - 1)), 0.05);
    }
  }
}

TEST(Trace, ResonancePeaks) {
  const auto& tr = coarse_trace();
  const auto res = find_tunneling_resonances(tr);
  // the first ladder resonance and its two-site partner
  const auto near = [&](double a) {
    return std::any_of(res.begin(), res.end(), [&](const Resonance& r) { return std::abs(r.aL - a) < 5.0; });
  };
  EXPECT_TRUE(near(340.0));
  EXPECT_TRUE(near(170.0));
  for (const auto& r : res) EXPECT_GT(r.Gamma0, 3.0 * r.baseline);
}

TEST(Trace, ExcitedLadderIsBroader) {
  const auto& tr = coarse_trace();
  std::size_t broader = 0, total = 0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (tr.Gamma(0, i) < 1e-12) continue;
    ++total;
    broader += tr.Gamma(1, i) > tr.Gamma(0, i);
  }
  ASSERT_GT(total, 100u);
  EXPECT_GT(static_cast<double>(broader) / total, 0.9);
}

TEST(Trace, FlatBandWindowHasNoCrossings) {
  const auto tr = ws_sweep(rb, 60.0, linear_grid(150.0, 160.0, 1.0), st);
  EXPECT_TRUE(find_tunneling_resonances(tr).empty());
}

TEST(Trace, SyntheticSinglePeak) {
  WsTrace tr;
  tr.V0 = 20.0;
  tr.alpha_max = 1;
  for (int i = 0; i < 41; ++i) {
    WsPoint p;
    p.aL = 300.0 + i;
    p.tilt = 10.0;
    p.ladders = {{0, 0, -5.0, 1e-6 * (1.0 + 0.001 * i)}, {1, 0, 3.0, 1e-2}};
    if (i == 20) p.ladders[0].Gamma = 1e-4;
    tr.points.push_back(p);
  }
  const auto res = find_tunneling_resonances(tr);
  ASSERT_EQ(res.size(), 1u);
  EXPECT_EQ(res[0].aL, 320.0);
  EXPECT_FALSE(res[0].matched);
}

TEST(TwoLevel, Limits) {
  const auto a = two_level_model(0.0, 0.0, 0.7);
  EXPECT_NEAR(a.plus.real(), 0.7, 1e-15);
  EXPECT_NEAR(a.minus.real(), -0.7, 1e-15);
  const auto b = two_level_model(0.4, 0.1, 0.0);
  const cplx e1(0.4, -0.2), e2(-0.4, 0.0);
  EXPECT_TRUE((std::abs(b.plus - e1) < 1e-14 && std::abs(b.minus - e2) < 1e-14) ||
              (std::abs(b.plus - e2) < 1e-14 && std::abs(b.minus - e1) < 1e-14));
}

TEST(TwoLevel, MinimumGap) {
  const double g = 0.1, V = 0.2;
  double best = 1e300, at = 0.0;
  for (int i = -400; i <= 400; ++i) {
    const double e = i * 1e-3;
    const auto t = two_level_model(e, g, V);
    const double gap = std::abs((t.plus - t.minus).real());
    if (gap < best) {
      best = gap;
      at = e;
    }
  }
  EXPECT_NEAR(best, 2.0 * std::sqrt(V * V - g * g), 1e-12);
  EXPECT_NEAR(at, 0.0, 1e-12);
}

namespace {
CrossingType classify_synthetic(double gamma, double V) {
  std::vector<double> u, eps;
  for (int i = -6; i <= 6; ++i) {
    u.push_back(i * 0.5);
    eps.push_back(0.03 * i * 0.5);
  }
  const auto sw = two_level_sweep(eps, gamma, V);
  std::vector<cplx> D;
  for (const auto& t : sw) D.push_back(t.plus - t.minus);
  return fit_two_level(u, D).type;
}
}  // namespace

TEST(TwoLevel, Classification) {
  EXPECT_EQ(classify_synthetic(0.01, 0.05), CrossingType::I);
  EXPECT_EQ(classify_synthetic(0.05, 0.01), CrossingType::II);
  EXPECT_EQ(classify_synthetic(0.0, 0.02), CrossingType::I);
}

TEST(Derivative, DeepLatticeHarmonic) {
  const double V0 = 40.0;
  const double d = dE00_dV0(rb, V0, 100.0, st);
  const double harmonic = -0.5 + 0.5 / std::sqrt(V0);
  EXPECT_NEAR(d, harmonic, 0.1 * std::abs(harmonic));
}

TEST(Derivative, ShallowLatticeSmall) {
  FloquetSettings s = st;
  s.tilt_floor = 0.0;
  const double d = dE00_dV0(0.05, 0.5, s);
  EXPECT_LT(d, 0.0);
  EXPECT_GT(d, -0.1);
}

TEST(Derivative, SmoothAwayFromResonances) {
  std::vector<double> d;
  for (double a = 380.0; a <= 392.0; a += 2.0) d.push_back(dE00_dV0(rb, 20.0, a, st));
  for (std::size_t i = 2; i < d.size(); ++i) {
    const double prev = std::abs(d[i - 1] - d[i - 2]);
    EXPECT_LE(std::abs(d[i] - d[i - 1]), 5.0 * prev + 1e-4);
  }
}
