#pragma once

// Complex Wannier-Stark spectra from the one-period Floquet-Bloch operator.
//
// Recoil units throughout. The tilt Delta = d m a_L / E_r is the ladder
// spacing; the momentum offset of the lattice grows as F t with F = Delta/pi,
// so one Bloch period T_B = 2 pi / Delta sweeps it by exactly 2.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lmt/blochband.hpp"
#include "lmt/error.hpp"
#include "lmt/numeric.hpp"
#include "lmt/physconfig.hpp"

namespace lmt {

using cplx = std::complex<double>;

enum class Propagator { Midpoint, Magnus4 };
enum class Provenance { Exact, Approx };

inline const char* to_string(Provenance p) { return p == Provenance::Exact ? "exact" : "approx"; }

struct FloquetSettings {
  int n_trunc = 16;          // momenta 2n, n in [-n_trunc, n_trunc]
  int steps = 256;           // J, time steps per Bloch period
  Propagator scheme = Propagator::Magnus4;
  double eps_prec = 1e-13;   // E_r, linewidth resolution floor
  int alpha_max = 3;
  double tilt_floor = 0.0;   // below this tilt the approximate formula is used

  void validate() const {
    if (n_trunc < 4) throw PreconditionError("momentum truncation too small");
    if (steps < 8) throw PreconditionError("too few time steps per Bloch period");
    if (alpha_max < 0) throw PreconditionError("alpha_max must be non-negative");
  }
};

// Default settings with the acceleration floor a_min = 20 m/s^2 expressed as
// a tilt for the given species.
inline FloquetSettings default_floquet(const SpeciesLattice& cfg, double a_min = 20.0) {
  FloquetSettings s;
  s.tilt_floor = cfg.tilt(a_min);
  return s;
}

struct ComplexLevel {
  double E = 0.0;      // folded into [0, Delta)
  double Gamma = 0.0;  // >= 0, +inf for the truncated direction
  cplx lambda{};
};

struct WsLevel {
  int alpha = 0;
  int site = 0;
  double E = 0.0;
  double Gamma = 0.0;
};

namespace detail {

// exp(-i h T) applied in place to U = Ur + i Ui, T real-symmetric
// tridiagonal with diagonal d and constant off-diagonal c.
struct TridiagExp {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  Eigen::VectorXd sub;
  Eigen::MatrixXd Wr, Wi;

  void apply(const Eigen::VectorXd& d, double c, double h, Eigen::MatrixXd& Ur, Eigen::MatrixXd& Ui) {
    const Eigen::Index n = d.size();
    if (sub.size() != n - 1) sub.resize(n - 1);
    sub.setConstant(c);
    es.computeFromTridiagonal(d, sub, Eigen::ComputeEigenvectors);
    const Eigen::MatrixXd& Q = es.eigenvectors();
    const Eigen::VectorXd& w = es.eigenvalues();
    Wr.noalias() = Q.transpose() * Ur;
    Wi.noalias() = Q.transpose() * Ui;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double cs = std::cos(h * w(i));
      const double sn = -std::sin(h * w(i));
      for (Eigen::Index k = 0; k < n; ++k) {
        const double a = Wr(i, k);
        const double b = Wi(i, k);
        Wr(i, k) = a * cs - b * sn;
        Wi(i, k) = a * sn + b * cs;
      }
    }
    Ur.noalias() = Q * Wr;
    Ui.noalias() = Q * Wi;
  }
};

}  // namespace detail

// Floquet-Bloch operator at kappa = 0 for depth V0 and tilt Delta (E_r):
// S * prod_j exp(-i H(t_j) dt), with S|2n> = |2(n-1)>.
// The lattice is written with a well at x = 0 (coupling -V0/4). Putting a
// maximum there instead would offset every ladder by Delta/2, since the
// site energies are the tilt at the well centres.
inline Eigen::MatrixXcd floquet_bloch_matrix(double V0, double tilt, const FloquetSettings& st) {
  st.validate();
  if (!(tilt > 0.0)) throw DomainError("Floquet operator needs a positive tilt");
  const int N = st.n_trunc;
  const int n = 2 * N + 1;
  const double F = tilt / pi;
  const double TB = two_pi / tilt;
  const double dt = TB / st.steps;
  const double c = -0.25 * V0;

  Eigen::MatrixXd Ur = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd Ui = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd d(n);
  detail::TridiagExp step;
  const auto kinetic = [&](double t, int i) {
    const double p = 2.0 * (i - N) - F * t;
    return p * p;
  };

  if (st.scheme == Propagator::Midpoint) {
    for (int j = 0; j < st.steps; ++j) {
      const double tm = (j + 0.5) * dt;
      for (int i = 0; i < n; ++i) d(i) = kinetic(tm, i);
      step.apply(d, c, dt, Ur, Ui);
    }
  } else {
    // Fourth-order commutator-free Magnus: two exponentials per step built
    // from the generator at the two Gauss nodes.
    const double r3 = std::sqrt(3.0);
    const double c1 = 0.5 - r3 / 6.0;
    const double c2 = 0.5 + r3 / 6.0;
    const double a1 = 0.25 + r3 / 6.0;
    const double a2 = 0.25 - r3 / 6.0;
    for (int j = 0; j < st.steps; ++j) {
      const double t0 = j * dt;
      for (int i = 0; i < n; ++i) d(i) = 2.0 * (a1 * kinetic(t0 + c1 * dt, i) + a2 * kinetic(t0 + c2 * dt, i));
      step.apply(d, c, 0.5 * dt, Ur, Ui);
      for (int i = 0; i < n; ++i) d(i) = 2.0 * (a2 * kinetic(t0 + c1 * dt, i) + a1 * kinetic(t0 + c2 * dt, i));
      step.apply(d, c, 0.5 * dt, Ur, Ui);
    }
  }

  // The step product is unitary up to roundoff that grows with the step
  // count; Newton-Schulz steps pull it back onto the unitary group.
  Eigen::MatrixXcd P(n, n);
  P.real() = Ur;
  P.imag() = Ui;
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
  for (int it = 0; it < 2; ++it) P = 0.5 * P * (3.0 * I - P.adjoint() * P);

  // Momentum shift: row i-1 receives row i; the n = -N row falls off.
  Eigen::MatrixXcd U(n, n);
  for (int i = 0; i < n - 1; ++i)
    for (int k = 0; k < n; ++k) U(i, k) = P(i + 1, k);
  for (int k = 0; k < n; ++k) U(n - 1, k) = 0.0;
  return U;
}

inline Eigen::MatrixXcd floquet_bloch_matrix(const SpeciesLattice& cfg, double V0, double aL,
                                             const FloquetSettings& st) {
  if (!(aL > 0.0)) throw DomainError("Floquet operator needs a positive acceleration");
  return floquet_bloch_matrix(V0, cfg.tilt(aL), st);
}

// Complex quasi-energies E - i Gamma/2 from the Floquet eigenvalues,
// ascending in Gamma.
inline std::vector<ComplexLevel> ws_eigensystem(const Eigen::MatrixXcd& U, double TB) {
  if (!U.allFinite()) throw PreconditionError("Floquet matrix is not finite");
  if (!(TB > 0.0)) throw DomainError("Bloch period must be positive");
  const double tilt = two_pi / TB;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(U, false);
  if (ces.info() != Eigen::Success) throw ConvergenceError("Floquet diagonalization failed", 0.0);
  std::vector<ComplexLevel> out;
  out.reserve(U.rows());
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    const cplx lambda = ces.eigenvalues()(i);
    const double mod = std::abs(lambda);
    if (mod > 1.0 + 1e-10) throw ContractionError("Floquet eigenvalue outside the unit disk");
    ComplexLevel lv;
    lv.lambda = lambda;
    if (mod < 1e-300) {
      lv.E = 0.0;
      lv.Gamma = std::numeric_limits<double>::infinity();
    } else {
      lv.E = numeric::wrap(-std::arg(lambda) / TB, tilt);
      double g = -2.0 * std::log(mod) / TB;
      if (g < 0.0) {
        if (g < -1e-12) throw ContractionError("negative linewidth below the roundoff floor");
        g = 0.0;
      }
      lv.Gamma = g;
    }
    out.push_back(lv);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ComplexLevel& a, const ComplexLevel& b) { return a.Gamma < b.Gamma; });
  return out;
}

// Lattice-minimum displacement angle theta = arcsin(Delta / (pi V0)).
inline double tilt_angle(double V0, double tilt) {
  const double s = tilt / (pi * V0);
  if (!(V0 > 0.0) || !(s < 1.0)) throw DomainError("lattice cannot hold against the tilt");
  return std::asin(s);
}

// Energy change from the shifted minimum: potential cost minus tilt gain.
inline double tilt_energy(double V0, double tilt) {
  const double th = tilt_angle(V0, tilt);
  const double s = std::sin(th);
  return 0.5 * V0 * s * s - tilt / two_pi * th;
}

// Approximate real WS energy <E_alpha> + E_dx + l Delta, recoil units.
inline double approx_ws_energy(double V0, double tilt, int alpha, int site) {
  const double base = band_average(V0, alpha);
  if (tilt == 0.0) return base;
  return base + tilt_energy(V0, tilt) + site * tilt;
}

inline double approx_ws_energy(const SpeciesLattice& cfg, double V0, double aL, int alpha, int site) {
  return approx_ws_energy(V0, cfg.tilt(aL), alpha, site);
}

struct WsPoint {
  double aL = 0.0;
  double tilt = 0.0;
  int regime = 1;  // 1: by linewidth, 2: energy-matched, 3: approximate formula
  Provenance provenance = Provenance::Exact;
  std::vector<WsLevel> ladders;  // alpha = 0..alpha_max, site 0
};

// Assigns ladder indices to the lowest-linewidth levels.
inline WsPoint sort_ladders(const std::vector<ComplexLevel>& levels, double V0, double tilt,
                            const FloquetSettings& st) {
  const int na = st.alpha_max + 1;
  WsPoint pt;
  pt.tilt = tilt;
  pt.ladders.resize(na);
  for (int a = 0; a < na; ++a) pt.ladders[a].alpha = a;

  if (tilt < st.tilt_floor) {
    pt.regime = 3;
    pt.provenance = Provenance::Approx;
    for (int a = 0; a < na; ++a) {
      pt.ladders[a].E = numeric::wrap(approx_ws_energy(V0, tilt, a, 0), tilt);
      pt.ladders[a].Gamma = 0.0;
    }
    return pt;
  }
  if (static_cast<int>(levels.size()) < na) throw PreconditionError("fewer levels than ladders requested");

  // levels arrive sorted by Gamma. Find the unresolved prefix: levels whose
  // linewidth is not separated from the previous one by 10 eps_prec.
  const double sep = 10.0 * st.eps_prec;
  int cluster = 0;
  for (int i = 1; i < na; ++i)
    if (levels[i].Gamma - levels[i - 1].Gamma <= sep) cluster = i + 1;

  for (int a = 0; a < na; ++a) {
    pt.ladders[a].E = levels[a].E;
    pt.ladders[a].Gamma = levels[a].Gamma;
  }
  if (cluster == 0) return pt;

  pt.regime = 2;
  std::vector<double> target(cluster);
  for (int a = 0; a < cluster; ++a) target[a] = numeric::wrap(approx_ws_energy(V0, tilt, a, 0), tilt);
  std::vector<std::vector<double>> cost(cluster, std::vector<double>(cluster));
  for (int a = 0; a < cluster; ++a)
    for (int j = 0; j < cluster; ++j) cost[a][j] = std::abs(numeric::wrap_signed(levels[j].E - target[a], tilt));
  const double tol = 1e-9 * tilt;
  for (int a = 0; a < cluster; ++a) {
    std::vector<double> row = cost[a];
    std::sort(row.begin(), row.end());
    if (cluster > 1 && row[0] < tol && row[1] < tol)
      throw AmbiguityError("two levels match one approximate target", row[0], row[1]);
  }
  const auto pick = numeric::hungarian(cost);
  for (int a = 0; a < cluster; ++a) {
    pt.ladders[a].E = levels[pick[a]].E;
    pt.ladders[a].Gamma = levels[pick[a]].Gamma;
  }
  return pt;
}

// One acceleration point: diagonalize (or fall back) and sort.
inline WsPoint ws_point(const SpeciesLattice& cfg, double V0, double aL, const FloquetSettings& st) {
  const double tilt = cfg.tilt(aL);
  WsPoint pt;
  if (tilt < st.tilt_floor) {
    pt = sort_ladders({}, V0, tilt, st);
  } else {
    const auto U = floquet_bloch_matrix(V0, tilt, st);
    pt = sort_ladders(ws_eigensystem(U, two_pi / tilt), V0, tilt, st);
  }
  pt.aL = aL;
  return pt;
}

// Recoil-unit variant keyed by tilt.
inline WsPoint ws_point_tilt(double V0, double tilt, const FloquetSettings& st) {
  if (tilt < st.tilt_floor) return sort_ladders({}, V0, tilt, st);
  const auto U = floquet_bloch_matrix(V0, tilt, st);
  return sort_ladders(ws_eigensystem(U, two_pi / tilt), V0, tilt, st);
}

struct ConvergenceReport {
  FloquetSettings settings;  // the coarser of the last compared pair
  double energy_drift = 0.0;
  double gamma_drift = 0.0;  // relative, over levels above the floor
};

// Doubles n_trunc and J until the lowest ladders move by < 1e-8 E_r and
// linewidths above the floor by < 5 %.
inline ConvergenceReport certify_floquet(double V0, double tilt, FloquetSettings st, int max_doublings = 3) {
  auto run = [&](const FloquetSettings& s) { return ws_point_tilt(V0, tilt, s); };
  WsPoint prev = run(st);
  for (int k = 0; k < max_doublings; ++k) {
    FloquetSettings next = st;
    next.n_trunc *= 2;
    next.steps *= 2;
    const WsPoint cur = run(next);
    ConvergenceReport rep{st, 0.0, 0.0};
    for (std::size_t a = 0; a < cur.ladders.size(); ++a) {
      rep.energy_drift = std::max(rep.energy_drift,
                                  std::abs(numeric::wrap_signed(cur.ladders[a].E - prev.ladders[a].E, tilt)));
      const double g = cur.ladders[a].Gamma;
      if (g > 100.0 * st.eps_prec)
        rep.gamma_drift = std::max(rep.gamma_drift, std::abs(prev.ladders[a].Gamma - g) / g);
    }
    if (rep.energy_drift < 1e-8 && rep.gamma_drift < 0.05) return rep;
    st = next;
    prev = cur;
  }
  throw ConvergenceError("Floquet spectrum did not converge under doubling", 0.0);
}

struct WsTrace {
  double V0 = 0.0;
  int alpha_max = 0;
  std::vector<WsPoint> points;  // ladders carry unfolded site-0 energies
  std::vector<std::string> issues;

  std::size_t size() const { return points.size(); }
  double aL(std::size_t i) const { return points[i].aL; }
  double E(int alpha, std::size_t i) const { return points[i].ladders[alpha].E; }
  double Gamma(int alpha, std::size_t i) const { return points[i].ladders[alpha].Gamma; }
  // Unfolded energy of ladder alpha at site l.
  double E(int alpha, int site, std::size_t i) const { return E(alpha, i) + site * points[i].tilt; }
};

namespace detail {

// Runs f(i) for i in [0, n) over `workers` threads, static contiguous blocks.
template <class F>
void parallel_for(std::size_t n, int workers, const F& f) {
  workers = std::max(1, workers);
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, w, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Chooses the representative of x mod period nearest to ref.
inline double unfold_near(double x, double period, double ref) {
  return ref + numeric::wrap_signed(x - ref, period);
}

}  // namespace detail

// Sweeps the acceleration grid, then unfolds energies and vetoes mis-sorted
// energy-matched points by continuity.
inline WsTrace ws_sweep(const SpeciesLattice& cfg, double V0, const std::vector<double>& grid,
                        const FloquetSettings& st, int workers = 1) {
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw PreconditionError("acceleration grid must increase strictly");
  // band averages first so the threads only read the cache
  for (int a = 0; a <= st.alpha_max; ++a) band_average(V0, a);

  WsTrace tr;
  tr.V0 = V0;
  tr.alpha_max = st.alpha_max;
  tr.points.resize(grid.size());
  detail::parallel_for(grid.size(), workers, [&](std::size_t i) { tr.points[i] = ws_point(cfg, V0, grid[i], st); });

  const int na = st.alpha_max + 1;
  for (std::size_t i = 0; i < tr.points.size(); ++i) {
    WsPoint& p = tr.points[i];
    std::vector<double> ref(na);
    for (int a = 0; a < na; ++a) {
      if (i >= 2) {
        const WsPoint& p1 = tr.points[i - 1];
        const WsPoint& p2 = tr.points[i - 2];
        const double slope = (p1.ladders[a].E - p2.ladders[a].E) / (p1.aL - p2.aL);
        ref[a] = p1.ladders[a].E + slope * (p.aL - p1.aL);
      } else if (i == 1) {
        ref[a] = tr.points[0].ladders[a].E;
      } else {
        try {
          ref[a] = approx_ws_energy(V0, p.tilt, a, 0);
        } catch (const DomainError&) {
          ref[a] = p.ladders[a].E;
        }
      }
    }
    if (p.regime == 2 && i >= 1) {
      // continuity veto: does a different labeling of the matched cluster fit
      // the extrapolated energies better?
      std::vector<std::vector<double>> cost(na, std::vector<double>(na));
      for (int a = 0; a < na; ++a)
        for (int b = 0; b < na; ++b)
          cost[a][b] = std::abs(numeric::wrap_signed(p.ladders[b].E - ref[a], p.tilt));
      const auto pick = numeric::hungarian(cost);
      bool moved = false;
      for (int a = 0; a < na; ++a) moved = moved || pick[a] != a;
      if (moved) {
        // only accept a relabeling among levels that are unresolved in Gamma
        bool floor_only = true;
        for (int a = 0; a < na; ++a)
          if (pick[a] != a && p.ladders[pick[a]].Gamma > 100.0 * st.eps_prec) floor_only = false;
        if (floor_only) {
          const auto old = p.ladders;
          for (int a = 0; a < na; ++a) {
            p.ladders[a] = old[pick[a]];
            p.ladders[a].alpha = a;
          }
          tr.issues.push_back("relabeled by continuity at a_L = " + std::to_string(p.aL));
        } else {
          tr.issues.push_back("continuity conflict at a_L = " + std::to_string(p.aL));
        }
      }
    }
    for (int a = 0; a < na; ++a) p.ladders[a].E = detail::unfold_near(p.ladders[a].E, p.tilt, ref[a]);
  }
  return tr;
}

inline std::vector<double> linear_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw PreconditionError("bad grid");
  const long n = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> g(n);
  for (long i = 0; i < n; ++i) g[i] = lo + i * step;
  return g;
}

// ---------------------------------------------------------------------------
// Resonances and crossings

struct Resonance {
  double aL = 0.0;
  std::size_t index = 0;
  double Gamma0 = 0.0;
  double baseline = 0.0;
  bool matched = false;   // partner found inside the requested (alpha, site) window
  int alpha = -1;         // partner ladder
  int site = 0;
  double crossing_aL = 0.0;
  bool matched_beyond = false;  // partner only found at a farther site or higher ladder
};

struct ResonanceOptions {
  double prominence = 3.0;        // peak / local baseline
  double window = 15.0;           // m/s^2 on each side for the baseline
  double floor = 1e-12;           // E_r, ignore peaks below this
  int max_alpha = 2;
  int max_site = 2;
  int tolerance_steps = 1;
  int extended_site = 6;  // fallback search range, for reporting unmatched peaks
};

struct Crossing {
  double aL = 0.0;  // first grid point after the sign change
  std::size_t index = 0;
  int alpha = 0;
  int site = 0;
};

// Sign changes of E_{0,0} - E_{alpha,l} between neighbouring grid points.
inline std::vector<Crossing> find_crossings(const WsTrace& tr, int max_alpha, int max_site) {
  std::vector<Crossing> out;
  for (int a = 1; a <= std::min(max_alpha, tr.alpha_max); ++a)
    for (int l = -max_site; l <= max_site; ++l)
      for (std::size_t i = 1; i < tr.size(); ++i) {
        const double d0 = tr.E(0, i - 1) - tr.E(a, l, i - 1);
        const double d1 = tr.E(0, i) - tr.E(a, l, i);
        // ignore wrap-around jumps of a full ladder spacing
        if ((d0 > 0.0) != (d1 > 0.0) && std::abs(d1 - d0) < 0.5 * tr.points[i].tilt)
          out.push_back({tr.aL(i), i, a, l});
      }
  std::sort(out.begin(), out.end(), [](const Crossing& x, const Crossing& y) { return x.index < y.index; });
  return out;
}

inline std::vector<Resonance> find_tunneling_resonances(const WsTrace& tr, const ResonanceOptions& opt = {}) {
  std::vector<Resonance> out;
  const std::size_t n = tr.size();
  if (n < 3) return out;
  const auto crossings = find_crossings(tr, opt.max_alpha, opt.max_site);
  std::vector<Crossing> extended;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double g = tr.Gamma(0, i);
    if (!(g > opt.floor)) continue;
    if (!(g > tr.Gamma(0, i - 1) && g >= tr.Gamma(0, i + 1))) continue;
    double left = g, right = g;
    for (std::size_t j = i; j-- > 0 && tr.aL(i) - tr.aL(j) <= opt.window;) left = std::min(left, tr.Gamma(0, j));
    for (std::size_t j = i + 1; j < n && tr.aL(j) - tr.aL(i) <= opt.window; ++j)
      right = std::min(right, tr.Gamma(0, j));
    const double base = std::max(left, right);
    if (!(g > opt.prominence * base)) continue;
    Resonance r{tr.aL(i), i, g, base};
    const auto nearest = [&](const std::vector<Crossing>& cs) -> const Crossing* {
      const Crossing* hit = nullptr;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : cs) {
        const double dist = std::abs(static_cast<double>(c.index) - 0.5 - static_cast<double>(i));
        if (dist <= opt.tolerance_steps + 0.5 && dist < best) {
          best = dist;
          hit = &c;
        }
      }
      return hit;
    };
    const Crossing* hit = nearest(crossings);
    if (!hit) {
      if (extended.empty()) extended = find_crossings(tr, tr.alpha_max, opt.extended_site);
      hit = nearest(extended);
      r.matched_beyond = hit != nullptr;
    } else {
      r.matched = true;
    }
    if (hit) {
      r.alpha = hit->alpha;
      r.site = hit->site;
      r.crossing_aL = 0.5 * (tr.aL(hit->index - 1) + tr.aL(hit->index));
    }
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-level non-hermitian model and crossing classification

struct TwoLevel {
  cplx plus, minus;
};

// E_{+/-} = -i gamma +/- sqrt((eps - i gamma)^2 + V^2).
inline TwoLevel two_level_model(double eps, double gamma, double V) {
  if (gamma < 0.0) throw DomainError("gamma must be non-negative");
  const cplx r = std::sqrt(cplx(eps, -gamma) * cplx(eps, -gamma) + V * V);
  const cplx m(0.0, -gamma);
  return {m + r, m - r};
}

// Branch-tracked sweep: each branch continues from its previous value.
inline std::vector<TwoLevel> two_level_sweep(const std::vector<double>& eps, double gamma, double V) {
  std::vector<TwoLevel> out;
  out.reserve(eps.size());
  for (double e : eps) {
    TwoLevel t = two_level_model(e, gamma, V);
    if (!out.empty()) {
      const TwoLevel& p = out.back();
      if (std::abs(t.plus - p.plus) + std::abs(t.minus - p.minus) >
          std::abs(t.minus - p.plus) + std::abs(t.plus - p.minus))
        std::swap(t.plus, t.minus);
    }
    out.push_back(t);
  }
  return out;
}

enum class CrossingType { I, II };
inline const char* to_string(CrossingType t) { return t == CrossingType::I ? "I" : "II"; }

struct CrossingFit {
  CrossingType type = CrossingType::I;
  double slope = 0.0;   // s, detuning per unit abscissa
  double center = 0.0;  // abscissa of eps = 0
  double gamma = 0.0;
  double V2 = 0.0;      // V^2
  double residual = 0.0;
};

// Least-squares fit of (D/2)^2 = s^2 u^2 - 2 i gamma s u + (V^2 - gamma^2),
// D the complex energy difference, to samples at abscissae u. The square is
// symmetric under exchange of the two levels, so labels may swap mid-window.
inline CrossingFit fit_two_level(const std::vector<double>& u, const std::vector<cplx>& D) {
  const std::size_t n = u.size();
  if (n < 7 || D.size() != n) throw PreconditionError("crossing fit needs at least 7 samples");
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd br(n), bi(n);
  for (std::size_t k = 0; k < n; ++k) {
    A(k, 0) = u[k] * u[k];
    A(k, 1) = u[k];
    A(k, 2) = 1.0;
    const cplx q = 0.25 * D[k] * D[k];
    br(k) = q.real();
    bi(k) = q.imag();
  }
  const auto qr = A.colPivHouseholderQr();
  const Eigen::Vector3d cr = qr.solve(br);
  const Eigen::Vector3d ci = qr.solve(bi);
  CrossingFit f;
  f.residual = std::sqrt(((A * cr - br).squaredNorm() + (A * ci - bi).squaredNorm()) / n);
  const double s2 = cr(0);
  if (!(s2 > 0.0)) throw ConvergenceError("crossing fit has no real detuning slope", f.residual);
  const double s = std::sqrt(s2);
  f.slope = s;
  f.center = -cr(1) / (2.0 * s2);
  f.gamma = std::abs(ci(1)) / (2.0 * s);
  f.V2 = cr(2) - s2 * f.center * f.center + f.gamma * f.gamma;
  f.type = f.V2 > f.gamma * f.gamma ? CrossingType::I : CrossingType::II;
  return f;
}

inline CrossingFit classify_crossing(const WsTrace& tr, double aL_star, int alpha, int site,
                                     int half_window = 5) {
  if (alpha < 1 || alpha > tr.alpha_max) throw PreconditionError("partner ladder out of range");
  std::size_t c = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tr.size(); ++i)
    if (std::abs(tr.aL(i) - aL_star) < best) {
      best = std::abs(tr.aL(i) - aL_star);
      c = i;
    }
  if (c < static_cast<std::size_t>(half_window) || c + half_window >= tr.size())
    throw PreconditionError("crossing window runs off the trace");
  std::vector<double> u;
  std::vector<cplx> D;
  for (std::size_t i = c - half_window; i <= c + half_window; ++i) {
    u.push_back(tr.aL(i) - aL_star);
    const cplx e0(tr.E(0, i), -0.5 * tr.Gamma(0, i));
    const cplx e1(tr.E(alpha, site, i), -0.5 * tr.Gamma(alpha, i));
    D.push_back(e0 - e1);
  }
  CrossingFit f = fit_two_level(u, D);
  f.center += aL_star;
  return f;
}

// ---------------------------------------------------------------------------
// Depth sensitivity

// Ground-ladder energy E_{0,0} (folded) at one point.
inline double ground_energy(double V0, double tilt, const FloquetSettings& st) {
  return ws_point_tilt(V0, tilt, st).ladders[0].E;
}

// dE_{0,0}/dV0 by central differences, checked against half the step.
inline double dE00_dV0(double V0, double tilt, const FloquetSettings& st, double rel_step = 1e-3) {
  const double h = rel_step * V0;
  if (!(V0 - h > 0.0)) throw DomainError("depth step leaves the valid region");
  const auto diff = [&](double d) {
    const double ep = ground_energy(V0 + d, tilt, st);
    const double em = ground_energy(V0 - d, tilt, st);
    return numeric::wrap_signed(ep - em, tilt) / (2.0 * d);
  };
  const double coarse = diff(h);
  const double fine = diff(0.5 * h);
  if (std::abs(coarse - fine) > 0.01 * std::max(std::abs(fine), 1e-6))
    throw ConvergenceError("depth derivative is step-size dependent", std::abs(coarse - fine));
  return (4.0 * fine - coarse) / 3.0;
}

inline double dE00_dV0(const SpeciesLattice& cfg, double V0, double aL, const FloquetSettings& st,
                       double rel_step = 1e-3) {
  return dE00_dV0(V0, cfg.tilt(aL), st, rel_step);
}

}  // namespace lmt
