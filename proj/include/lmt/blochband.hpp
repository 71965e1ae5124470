#pragma once

// Bloch bands of the untilted lattice V0 cos^2(k_L x), with the average
// ac Stark shift V0/2 removed. Quasi-momentum kappa is in units of k_L,
// energies in E_r.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <tuple>
#include <vector>

#include "lmt/error.hpp"
#include "lmt/numeric.hpp"
#include "lmt/physconfig.hpp"
#include "lmt/pulses.hpp"

namespace lmt {

struct BandSettings {
  int n_trunc = 32;       // plane waves 2n + kappa, n in [-n_trunc, n_trunc]
  int n_trunc_cap = 512;
  double tolerance = 1e-10;
};

// Folds kappa into [-1, 1).
inline double fold_quasimomentum(double kappa) { return numeric::wrap(kappa + 1.0, 2.0) - 1.0; }

namespace detail {

inline Eigen::VectorXd band_eigenvalues(double V0, double kappa, int n_trunc) {
  const int n = 2 * n_trunc + 1;
  Eigen::VectorXd diag(n);
  for (int i = 0; i < n; ++i) {
    const double q = 2.0 * (i - n_trunc) + kappa;
    diag(i) = q * q;
  }
  Eigen::VectorXd sub = Eigen::VectorXd::Constant(n - 1, 0.25 * V0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace detail

// Lowest n_bands energies at kappa. Convergence is certified by doubling the
// plane-wave truncation until no band moves by more than the tolerance.
inline std::vector<double> bloch_spectrum(double V0, double kappa, int n_bands,
                                          const BandSettings& st = {}) {
  if (n_bands < 1) throw PreconditionError("need at least one band");
  if (st.n_trunc < n_bands + 8) throw PreconditionError("plane-wave truncation too small for the band count");
  if (V0 < 0.0) throw DomainError("lattice depth must be non-negative");
  kappa = fold_quasimomentum(kappa);
  int n = st.n_trunc;
  Eigen::VectorXd prev = detail::band_eigenvalues(V0, kappa, n);
  for (;;) {
    if (2 * n > st.n_trunc_cap)
      throw ConvergenceError("band structure did not converge", std::numeric_limits<double>::quiet_NaN());
    const Eigen::VectorXd next = detail::band_eigenvalues(V0, kappa, 2 * n);
    double shift = 0.0;
    for (int a = 0; a < n_bands; ++a) shift = std::max(shift, std::abs(next(a) - prev(a)));
    if (shift < st.tolerance) {
      std::vector<double> out(n_bands);
      for (int a = 0; a < n_bands; ++a) out[a] = next(a);
      return out;
    }
    if (4 * n > st.n_trunc_cap) throw ConvergenceError("band structure did not converge", shift);
    prev = next;
    n *= 2;
  }
}

// Single-band evaluation without the doubling check. For inner loops where
// the truncation has already been certified at this depth.
inline double band_energy(double V0, double kappa, int alpha, int n_trunc = 16) {
  return detail::band_eigenvalues(V0, fold_quasimomentum(kappa), n_trunc)(alpha);
}

// Truncation adequate for bands up to alpha at depth V0, certified once.
inline int certified_truncation(double V0, int alpha, double tol = 1e-12) {
  for (int n = std::max(16, alpha + 8); n <= 512; n *= 2) {
    double shift = 0.0;
    for (double k : {0.0, 0.5, 1.0}) {
      const auto a = detail::band_eigenvalues(V0, k, n);
      const auto b = detail::band_eigenvalues(V0, k, 2 * n);
      shift = std::max(shift, std::abs(a(alpha) - b(alpha)));
    }
    if (shift < tol) return n;
  }
  throw ConvergenceError("no certified truncation", 0.0);
}

// <E_alpha> over the Brillouin zone. Parity lets us integrate over [0, 1];
// composite Gauss-Legendre, doubled until two estimates agree to 1e-11.
inline double band_average_uncached(double V0, int alpha) {
  if (alpha < 0) throw PreconditionError("band index must be non-negative");
  if (V0 < 0.0) throw DomainError("lattice depth must be non-negative");
  const int nt = certified_truncation(V0, alpha);
  static const numeric::GaussRule rule = numeric::gauss_legendre(20);
  const auto f = [&](double k) { return band_energy(V0, k, alpha, nt); };
  double prev = numeric::gauss_composite(f, 0.0, 1.0, 4, rule);
  for (int panels = 8; panels <= 1024; panels *= 2) {
    const double next = numeric::gauss_composite(f, 0.0, 1.0, panels, rule);
    if (std::abs(next - prev) < 1e-11) return next;
    prev = next;
  }
  throw ConvergenceError("band average did not converge", 0.0);
}

// Memo for band averages. Concurrent readers, one writer at a time.
class BandCache {
 public:
  double average(double V0, int alpha) {
    const auto key = std::make_tuple(V0, alpha);
    {
      std::shared_lock lock(mutex_);
      if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    }
    const double value = band_average_uncached(V0, alpha);
    std::unique_lock lock(mutex_);
    memo_.emplace(key, value);
    return value;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return memo_.size();
  }

  static BandCache& global() {
    static BandCache cache;
    return cache;
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::tuple<double, int>, double> memo_;
};

inline double band_average(double V0, int alpha) { return BandCache::global().average(V0, alpha); }

// Gap between bands 0 and 1 at the zone edge.
inline double edge_gap(double V0) {
  const auto e = bloch_spectrum(V0, 1.0, 2);
  return e[1] - e[0];
}

// Landau-Zener probability for a gap dE (E_r) traversed at acceleration a_L.
inline double landau_zener_probability(const SpeciesLattice& cfg, double dE, double aL) {
  if (dE < 0.0) throw DomainError("gap must be non-negative");
  if (!(aL > 0.0)) throw DomainError("acceleration must be positive");
  const double tilt = cfg.tilt(aL);
  return std::exp(-pi * pi * dE * dE / (8.0 * tilt));
}

// Same with the default gap: bands 0/1 at the zone edge of depth V0.
inline double landau_zener_edge(const SpeciesLattice& cfg, double V0, double aL) {
  return landau_zener_probability(cfg, edge_gap(V0), aL);
}

// Effective LZ linewidth (E_r): the per-period loss rate -ln(1-P)/T_B.
inline double lz_linewidth_from_probability(double tilt, double P) {
  if (P < 0.0 || P > 1.0) throw DomainError("probability outside [0, 1]");
  if (P >= 1.0) throw DomainError("linewidth is infinite for unit transition probability");
  return -tilt / two_pi * std::log1p(-P);
}

inline double lz_effective_linewidth(const SpeciesLattice& cfg, double dE, double aL) {
  return lz_linewidth_from_probability(cfg.tilt(aL), landau_zener_probability(cfg, dE, aL));
}

// Phase of an atom that follows the lowest band adiabatically while the
// lattice sweeps its quasi-momentum, kappa(t) = kappa0 - p_L(t), between
// times t0 and t1 (seconds). Returns radians.
inline double adiabatic_bloch_phase(const PulseSchedule& s, double kappa0, double t0, double t1) {
  if (t1 < t0) throw PreconditionError("phase window reversed");
  const SpeciesLattice& cfg = s.cfg;
  const double V0max = std::max(s.V0_peak, 0.0);
  const int nt = certified_truncation(V0max, 0);
  static const numeric::GaussRule rule = numeric::gauss_legendre(16);

  // Breakpoints where kappa passes a half-integer: the folded band is smooth
  // between them even at V0 = 0, where the zone edge is a kink.
  std::vector<double> cuts{t0};
  for (double c : {s.t_accel_start(), s.t_accel_start() + s.tau_ramp, s.t_accel_end() - s.tau_ramp,
                   s.t_accel_end()})
    if (c > t0 && c < t1) cuts.push_back(c);
  const double p0 = s.momentum(t0);
  const double p1 = s.momentum(t1);
  if (p1 > p0) {
    for (double m = std::floor(2.0 * (kappa0 - p1)) + 1.0; m < 2.0 * (kappa0 - p0); m += 1.0) {
      const double target = kappa0 - 0.5 * m;  // p_L value
      const auto g = [&](double t) { return s.momentum(t) - target; };
      double lo = t0, hi = t1;
      if (g(lo) >= 0.0 || g(hi) <= 0.0) continue;
      cuts.push_back(numeric::bisect_secant(g, lo, hi, 1e-15 * (t1 + 1e-300), 0.0));
    }
  }
  cuts.push_back(t1);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const double tr = cfg.recoil_time();
  double phase = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i];
    const double b = cuts[i + 1];
    if (b <= a) continue;
    const auto f = [&](double t) { return band_energy(s.V0(t), kappa0 - s.momentum(t), 0, nt); };
    // Loading and unloading windows vary slowly but over many recoil times;
    // a few panels keep the rule accurate.
    const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / (0.05 * (s.t_end() + 1e-300)))));
    phase += numeric::gauss_composite(f, a, b, panels, rule) / tr;
  }
  return phase;
}

inline double adiabatic_bloch_phase(const PulseSchedule& s, double kappa0) {
  return adiabatic_bloch_phase(s, kappa0, 0.0, s.t_end());
}

}  // namespace lmt
