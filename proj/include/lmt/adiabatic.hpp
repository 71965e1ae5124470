#pragma once

// Adiabatic Wannier-Stark model of an LMT Bloch pulse: loading amplitudes,
// survival and phase along a schedule, phase-noise budgets, spontaneous
// emission and the case-study calculators.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "lmt/blochband.hpp"
#include "lmt/error.hpp"
#include "lmt/numeric.hpp"
#include "lmt/physconfig.hpp"
#include "lmt/pulses.hpp"
#include "lmt/wsspectrum.hpp"

namespace lmt {

// ---------------------------------------------------------------------------
// Initial momentum distribution

struct MomentumDistribution {
  std::function<cplx(double)> amplitude;  // p in units of hbar k_L

  cplx operator()(double p) const { return amplitude(p); }

  // Gaussian of rms width sigma (amplitude ~ exp(-(p-p0)^2 / 4 sigma^2)),
  // normalized on the first Brillouin zone.
  static MomentumDistribution gaussian(double sigma, double p0 = 0.0) {
    if (!(sigma > 0.0)) throw DomainError("momentum width must be positive");
    const auto raw = [=](double p) { return std::exp(-(p - p0) * (p - p0) / (4.0 * sigma * sigma)); };
    static const numeric::GaussRule rule = numeric::gauss_legendre(20);
    const double norm = numeric::gauss_composite([&](double p) { return raw(p) * raw(p); }, -1.0, 1.0, 64, rule);
    const double scale = 1.0 / std::sqrt(norm);
    return {[=](double p) { return cplx(std::abs(p) <= 1.0 ? scale * raw(p) : 0.0, 0.0); }};
  }

  // Throws unless the amplitude has vanished at the zone edges.
  void validate(double tol = 1e-6) const {
    double peak = 0.0;
    for (int i = -50; i <= 50; ++i) peak = std::max(peak, std::abs(amplitude(i / 50.0)));
    const double edge = std::max(std::abs(amplitude(-1.0)), std::abs(amplitude(1.0)));
    if (!(peak > 0.0)) throw PreconditionError("momentum distribution is empty");
    if (edge > tol * peak) throw PreconditionError("momentum distribution leaks out of the first Brillouin zone");
  }

  double norm() const {
    static const numeric::GaussRule rule = numeric::gauss_legendre(20);
    return numeric::gauss_composite([&](double p) { return std::norm(amplitude(p)); }, -1.0, 1.0, 64, rule);
  }
};

struct LoadingResult {
  int first_site = 0;            // site index of g.front()
  std::vector<cplx> g;
  double weight = 0.0;           // sum |g_l|^2
};

struct LoadingOptions {
  int p_panels = 32;
  int t_panels = 8;
  double truncation = 1e-8;      // allowed missing weight
  int max_site = 400;
};

// g_l = (1/sqrt 2) int dp phi(p) exp(-i int_0^tau_load E_0(V0(t), p) dt) e^{i pi p l}.
// The 1/sqrt 2 makes sum |g_l|^2 = int |phi|^2 (Parseval on a zone of width 2).
inline LoadingResult loading_coefficients(const PulseSchedule& s, const MomentumDistribution& phi,
                                          const LoadingOptions& opt = {}) {
  phi.validate();
  static const numeric::GaussRule prule = numeric::gauss_legendre(20);
  static const numeric::GaussRule trule = numeric::gauss_legendre(16);
  const int nt = certified_truncation(std::max(s.V0_peak, 0.0), 0);
  const double tr = s.cfg.recoil_time();

  // p nodes and weights on [-1, 1]
  std::vector<double> pn, pw;
  const double hp = 2.0 / opt.p_panels;
  for (int k = 0; k < opt.p_panels; ++k)
    for (std::size_t i = 0; i < prule.nodes.size(); ++i) {
      pn.push_back(-1.0 + (k + 0.5) * hp + 0.5 * hp * prule.nodes[i]);
      pw.push_back(0.5 * hp * prule.weights[i]);
    }
  // t nodes on [0, tau_load], recoil units
  std::vector<double> tn, tw;
  if (s.tau_load > 0.0) {
    const double ht = s.tau_load / opt.t_panels;
    for (int k = 0; k < opt.t_panels; ++k)
      for (std::size_t i = 0; i < trule.nodes.size(); ++i) {
        tn.push_back((k + 0.5) * ht + 0.5 * ht * trule.nodes[i]);
        tw.push_back(0.5 * ht * trule.weights[i] / tr);
      }
  }
  std::vector<cplx> f(pn.size());
  for (std::size_t k = 0; k < pn.size(); ++k) {
    double theta = 0.0;
    for (std::size_t j = 0; j < tn.size(); ++j) theta += tw[j] * band_energy(s.V0(tn[j]), pn[k], 0, nt);
    f[k] = pw[k] * phi(pn[k]) * std::exp(cplx(0.0, -theta)) / std::sqrt(2.0);
  }
  const auto coefficient = [&](int l) {
    cplx sum = 0.0;
    for (std::size_t k = 0; k < pn.size(); ++k) sum += f[k] * std::exp(cplx(0.0, pi * pn[k] * l));
    return sum;
  };
  const double total = phi.norm();
  LoadingResult out;
  std::vector<cplx> pos{coefficient(0)}, neg;
  double weight = std::norm(pos[0]);
  int L = 0;
  while (total - weight > opt.truncation * total && L < opt.max_site) {
    ++L;
    pos.push_back(coefficient(L));
    neg.push_back(coefficient(-L));
    weight += std::norm(pos.back()) + std::norm(neg.back());
  }
  out.first_site = -L;
  for (auto it = neg.rbegin(); it != neg.rend(); ++it) out.g.push_back(*it);
  for (const auto& c : pos) out.g.push_back(c);
  out.weight = weight;
  return out;
}

// ---------------------------------------------------------------------------
// Chebyshev table of <E_0>(V0) for the untilted load and unload windows

class BandAverageTable {
 public:
  BandAverageTable() = default;
  BandAverageTable(double V0_max, int nodes = 40) : hi_(V0_max) {
    if (V0_max < 0.0) throw DomainError("lattice depth must be non-negative");
    if (V0_max == 0.0) {
      coef_ = {2.0 * band_average(0.0, 0)};
      return;
    }
    std::vector<double> f(nodes);
    for (int k = 0; k < nodes; ++k) {
      const double x = std::cos(pi * (k + 0.5) / nodes);
      f[k] = band_average_uncached(0.5 * hi_ * (x + 1.0), 0);
    }
    coef_.assign(nodes, 0.0);
    for (int j = 0; j < nodes; ++j) {
      double sum = 0.0;
      for (int k = 0; k < nodes; ++k) sum += f[k] * std::cos(pi * j * (k + 0.5) / nodes);
      coef_[j] = 2.0 * sum / nodes;
    }
  }

  double operator()(double V0) const {
    if (coef_.size() == 1) return 0.5 * coef_[0];
    if (V0 < -1e-12 || V0 > hi_ * (1.0 + 1e-12)) throw ExtrapolationError("depth outside the band-average table");
    const double x = 2.0 * std::clamp(V0, 0.0, hi_) / hi_ - 1.0;
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t j = coef_.size(); j-- > 1;) {
      const double b0 = 2.0 * x * b1 - b2 + coef_[j];
      b2 = b1;
      b1 = b0;
    }
    return x * b1 - b2 + 0.5 * coef_[0];
  }

  double max_depth() const { return hi_; }

 private:
  double hi_ = 0.0;
  std::vector<double> coef_;
};

// ---------------------------------------------------------------------------
// Interpolated ground-ladder table in acceleration at fixed depth

struct WsTableOptions {
  double initial_step = 4.0;     // m/s^2
  double min_step = 0.01;        // m/s^2
  double gamma_tol = 0.05;       // relative disagreement that triggers refinement
  double gamma_significance = 1e-12;  // E_r, linewidths below are not refined on
  double energy_tol = 1e-4;      // E_r
  int max_passes = 14;
  int workers = 1;
};

class WsTable {
 public:
  WsTable() = default;

  WsTable(const SpeciesLattice& cfg, double V0, double a_max, const FloquetSettings& st,
          const WsTableOptions& opt = {})
      : cfg_(cfg), V0_(V0), a_max_(a_max), st_(st) {
    if (!(a_max > 0.0)) throw DomainError("table needs a positive maximum acceleration");
    a_floor_ = cfg.acceleration_from_tilt(st.tilt_floor);
    band_average(V0, 0);
    for (int a = 0; a <= st.alpha_max; ++a) band_average(V0, a);

    std::vector<double> grid;
    if (a_max <= a_floor_) {
      rebuild({}, {}, {});
      return;
    }
    const int n0 = std::max(2, static_cast<int>(std::ceil((a_max - a_floor_) / opt.initial_step)) + 1);
    for (int i = 0; i < n0; ++i) grid.push_back(a_floor_ + (a_max - a_floor_) * i / (n0 - 1));
    std::vector<WsPoint> pts(grid.size());
    detail::parallel_for(grid.size(), opt.workers, [&](std::size_t i) { pts[i] = ws_point(cfg, V0, grid[i], st); });
    std::vector<double> g(grid.size()), e(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) g[i] = pts[i].ladders[0].Gamma;
    // unfold site-0 energies by continuity, anchored on the approximate formula
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double ref;
      if (i == 0) {
        ref = approx_or(pts[i].tilt, pts[i].ladders[0].E);
      } else if (i == 1) {
        ref = e[0];
      } else {
        ref = e[i - 1] + (e[i - 1] - e[i - 2]) * (grid[i] - grid[i - 1]) / (grid[i - 1] - grid[i - 2]);
      }
      e[i] = detail::unfold_near(pts[i].ladders[0].E, pts[i].tilt, ref);
    }
    rebuild(grid, g, e);

    // Only intervals that have not yet passed the midpoint test are probed
    // again; a passing interval stays settled.
    std::vector<char> settled(a_.size() - 1, 0);
    for (int pass = 0; pass < opt.max_passes; ++pass) {
      std::vector<std::size_t> open;
      std::vector<double> mids;
      for (std::size_t i = 0; i + 1 < a_.size(); ++i)
        if (!settled[i] && a_[i + 1] - a_[i] > 2.0 * opt.min_step) {
          open.push_back(i);
          mids.push_back(0.5 * (a_[i] + a_[i + 1]));
        }
      if (mids.empty()) break;
      std::vector<WsPoint> mp(mids.size());
      detail::parallel_for(mids.size(), opt.workers, [&](std::size_t i) { mp[i] = ws_point(cfg, V0, mids[i], st); });
      std::vector<double> na, ng, ne;
      std::vector<char> ns;
      std::size_t m = 0;
      bool refined = false;
      for (std::size_t i = 0; i < a_.size(); ++i) {
        na.push_back(a_[i]);
        ng.push_back(gamma_[i]);
        ne.push_back(energy_[i]);
        if (i + 1 == a_.size()) break;
        if (m >= open.size() || open[m] != i) {
          ns.push_back(settled[i]);
          continue;
        }
        const double gd = mp[m].ladders[0].Gamma;
        const double gi = gamma(mids[m]);
        const double ei = energy_interp(mids[m]);
        const double ed = detail::unfold_near(mp[m].ladders[0].E, mp[m].tilt, ei);
        const bool bad_gamma = std::max(gd, gi) > opt.gamma_significance &&
                               std::abs(gi - gd) > opt.gamma_tol * std::max(gd, 1e-300);
        const bool bad_energy = std::abs(ei - ed) > opt.energy_tol;
        if (bad_gamma || bad_energy) {
          na.push_back(mids[m]);
          ng.push_back(gd);
          ne.push_back(ed);
          ns.push_back(0);
          ns.push_back(0);
          refined = true;
        } else {
          ns.push_back(1);
        }
        ++m;
      }
      if (!refined) break;
      rebuild(na, ng, ne);
      settled = std::move(ns);
    }
  }

  double V0() const { return V0_; }
  double a_max() const { return a_max_; }
  double a_floor() const { return a_floor_; }
  std::size_t nodes() const { return a_.size(); }
  const std::vector<double>& accelerations() const { return a_; }
  const SpeciesLattice& cfg() const { return cfg_; }

  // Gamma_0 (E_r) at acceleration a.
  double gamma(double a) const {
    check(a);
    if (a_.size() < 2 || a <= a_floor_) return 0.0;
    const double v = std::exp(log_gamma_(a));
    return v < 1e-17 ? 0.0 : v;
  }

  // Unfolded E_{0,0} (E_r) at acceleration a.
  double energy(double a) const {
    check(a);
    if (a_.size() < 2 || a <= a_floor_) return approx_or(cfg_.tilt(a), 0.0);
    return energy_interp(a);
  }

 private:
  double approx_or(double tilt, double fallback) const {
    try {
      return approx_ws_energy(V0_, tilt, 0, 0);
    } catch (const DomainError&) {
      return fallback;
    }
  }
  void check(double a) const {
    if (a < 0.0 || a > a_max_ * (1.0 + 1e-12)) throw ExtrapolationError("acceleration outside the WS table");
  }
  double energy_interp(double a) const { return numeric::linear_interp(a_, energy_, a); }

  void rebuild(std::vector<double> a, std::vector<double> g, std::vector<double> e) {
    std::vector<std::size_t> idx(a.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return a[x] < a[y]; });
    a_.clear();
    gamma_.clear();
    energy_.clear();
    for (auto i : idx) {
      a_.push_back(a[i]);
      gamma_.push_back(g[i]);
      energy_.push_back(e[i]);
    }
    if (a_.size() >= 2) {
      std::vector<double> lg(gamma_.size());
      for (std::size_t i = 0; i < lg.size(); ++i) lg[i] = std::log(std::max(gamma_[i], 1e-18));
      log_gamma_ = numeric::Pchip(a_, lg);
    }
  }

  SpeciesLattice cfg_;
  double V0_ = 0.0;
  double a_max_ = 0.0;
  double a_floor_ = 0.0;
  FloquetSettings st_;
  std::vector<double> a_, gamma_, energy_;
  numeric::Pchip log_gamma_;
};

// ---------------------------------------------------------------------------
// Evolution along a schedule

struct AdiabaticResult {
  double survival = 1.0;
  double gamma_integral = 0.0;  // int Gamma_0 dt / hbar
  double phase = 0.0;           // rad, unwrapped
  std::vector<double> t, gamma0, energy00;  // optional traces (s, E_r, E_r)
  LoadingResult loading;
  double loss() const { return -std::expm1(-gamma_integral); }
};

namespace detail {

// Breakpoints (seconds) between which every waveform and table interpolant
// is smooth. Sigmoid windows are split uniformly in the logistic argument,
// and ramp windows additionally at the times the table nodes are crossed.
inline std::vector<double> schedule_breakpoints(const PulseSchedule& s, const WsTable* table) {
  std::vector<double> cuts{0.0, s.t_end()};
  const auto sigmoid_cuts = [&](double start, double width) {
    if (width <= 0.0) return;
    const double w = s.shape_h * width;
    const double c = start + 0.5 * width;
    cuts.push_back(start);
    cuts.push_back(start + width);
    for (int k = -24; k <= 24; ++k) cuts.push_back(c + k * w);
  };
  sigmoid_cuts(0.0, s.tau_load);
  sigmoid_cuts(s.t_accel_end(), s.tau_load);
  cuts.push_back(s.t_accel_start());
  cuts.push_back(s.t_accel_end());
  if (s.tau_ramp > 0.0) {
    const double t0 = s.t_accel_start();
    const double t1 = s.t_accel_end();
    sigmoid_cuts(t0, s.tau_ramp);
    sigmoid_cuts(t1 - s.tau_ramp, s.tau_ramp);
    if (table) {
      const double w = s.shape_h * s.tau_ramp;
      std::vector<double> nodes = table->accelerations();
      nodes.push_back(table->a_floor());
      for (double a : nodes) {
        const double sg = a / s.aL_peak;
        if (!(sg > 0.0 && sg < 1.0)) continue;
        const double logit = std::log(sg / (1.0 - sg));
        if (std::abs(logit) >= 0.5 / s.shape_h) continue;
        cuts.push_back(t0 + 0.5 * s.tau_ramp + w * logit);
        cuts.push_back(t1 - 0.5 * s.tau_ramp - w * logit);
      }
    }
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> out;
  for (double c : cuts) {
    if (c < 0.0 || c > s.t_end()) continue;
    if (out.empty() || c - out.back() > 1e-15 * s.t_end()) out.push_back(c);
  }
  return out;
}

}  // namespace detail

struct EvolutionOptions {
  int gauss_points = 8;
  int trace_points = 0;  // >0 records sampled traces
  bool with_loading = false;
  MomentumDistribution distribution{};
};

// Integrates Gamma_0 and E_{0,0} along the schedule between t_from and t_to
// (seconds). Untilted stretches use the band average at the instantaneous
// depth with no loss.
inline AdiabaticResult adiabatic_window(const PulseSchedule& s, const WsTable& table,
                                        const BandAverageTable& bands, double t_from, double t_to,
                                        const EvolutionOptions& opt = {}) {
  if (t_to < t_from) throw PreconditionError("evolution window reversed");
  if (s.aL_peak > 0.0 && std::abs(s.V0_peak - table.V0()) > 1e-12 * std::max(1.0, s.V0_peak))
    throw PreconditionError("table depth does not match the schedule");
  if (s.aL_peak > table.a_max() * (1.0 + 1e-12)) throw ExtrapolationError("schedule exceeds the WS table");
  const numeric::GaussRule rule = numeric::gauss_legendre(opt.gauss_points);
  const double tr = s.cfg.recoil_time();
  const auto cuts = detail::schedule_breakpoints(s, &table);

  const auto rates = [&](double t, double& g, double& e) {
    const double a = s.accel(t);
    if (a > 0.0) {
      g = table.gamma(a);
      e = table.energy(a);
    } else {
      g = 0.0;
      e = bands(std::clamp(s.V0(t), 0.0, bands.max_depth()));
    }
  };

  AdiabaticResult res;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = std::max(cuts[i], t_from);
    const double b = std::min(cuts[i + 1], t_to);
    if (!(b > a)) continue;
    double gi = 0.0, ei = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      const double t = 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes[k];
      double g, e;
      rates(t, g, e);
      gi += rule.weights[k] * g;
      ei += rule.weights[k] * e;
    }
    res.gamma_integral += 0.5 * (b - a) / tr * gi;
    res.phase += 0.5 * (b - a) / tr * ei;
  }
  res.survival = std::exp(-res.gamma_integral);
  if (opt.trace_points > 1) {
    for (int k = 0; k < opt.trace_points; ++k) {
      const double t = t_from + (t_to - t_from) * k / (opt.trace_points - 1);
      double g, e;
      rates(t, g, e);
      res.t.push_back(t);
      res.gamma0.push_back(g);
      res.energy00.push_back(e);
    }
  }
  if (opt.with_loading && opt.distribution.amplitude) res.loading = loading_coefficients(s, opt.distribution);
  return res;
}

inline AdiabaticResult adiabatic_evolution(const PulseSchedule& s, const WsTable& table,
                                           const BandAverageTable& bands, const EvolutionOptions& opt = {}) {
  return adiabatic_window(s, table, bands, 0.0, s.t_end(), opt);
}

// Convenience: builds the tables for one schedule.
inline AdiabaticResult adiabatic_evolution(const PulseSchedule& s, const FloquetSettings& st,
                                           const EvolutionOptions& opt = {}) {
  const WsTable table(s.cfg, s.V0_peak, std::max(s.aL_peak, 1e-9), st);
  const BandAverageTable bands(s.V0_peak);
  return adiabatic_evolution(s, table, bands, opt);
}

inline double pulse_loss(const WsTable& table, const BandAverageTable& bands, double count, double aL,
                         double tau_ramp, double tau_load = 2e-3) {
  const auto s = build_schedule(table.cfg(), count, table.V0(), aL, tau_load, tau_ramp);
  return adiabatic_evolution(s, table, bands).loss();
}

// Loss predicted from Bloch bands and the Landau-Zener rate, integrated
// along the same schedule.
inline double lz_pulse_loss(const PulseSchedule& s, int gauss_points = 8) {
  const double gap = edge_gap(s.V0_peak);
  const numeric::GaussRule rule = numeric::gauss_legendre(gauss_points);
  const double tr = s.cfg.recoil_time();
  const auto cuts = detail::schedule_breakpoints(s, nullptr);
  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    double sum = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      const double t = 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes[k];
      const double acc = s.accel(t);
      if (acc > 0.0) sum += rule.weights[k] * lz_effective_linewidth(s.cfg, gap, acc);
    }
    integral += 0.5 * (b - a) / tr * sum;
  }
  return -std::expm1(-integral);
}

// ---------------------------------------------------------------------------
// Phase noise from lattice-depth fluctuations

struct NoiseBudget {
  double dphi = 0.0;         // rad
  double count = 0.0;
  double dV_over_V = 0.0;
  double sensitivity = 0.0;  // 2 pi |dE00/dV0| V0 / Delta
  double derivative = 0.0;   // dE00/dV0
};

inline double phase_sensitivity(double derivative, double V0, double tilt) {
  return two_pi * std::abs(derivative) * V0 / tilt;
}

inline NoiseBudget phase_uncertainty(const SpeciesLattice& cfg, double V0, double aL, double count,
                                     double dV_over_V, const FloquetSettings& st) {
  NoiseBudget b;
  b.count = count;
  b.dV_over_V = dV_over_V;
  b.derivative = dE00_dV0(cfg, V0, aL, st);
  b.sensitivity = phase_sensitivity(b.derivative, V0, cfg.tilt(aL));
  b.dphi = b.sensitivity * count * dV_over_V;
  return b;
}

// Inverse: the relative depth stability that keeps the phase below dphi.
inline NoiseBudget required_stability(const SpeciesLattice& cfg, double V0, double aL, double count,
                                      double dphi, const FloquetSettings& st) {
  NoiseBudget b = phase_uncertainty(cfg, V0, aL, count, 1.0, st);
  b.dV_over_V = dphi / (b.sensitivity * count);
  b.dphi = dphi;
  return b;
}

// Same budget with the adiabatic Bloch model, i.e. d<E_0>/dV0.
inline double bloch_sensitivity(double V0, double tilt, double rel_step = 1e-3) {
  const double h = rel_step * V0;
  const double d = (band_average_uncached(V0 + h, 0) - band_average_uncached(V0 - h, 0)) / (2.0 * h);
  return phase_sensitivity(d, V0, tilt);
}

// Single-lattice geometry: tilt jitter dtheta, arm separation z.
struct MorelCase {
  static double depth_fluctuation(double dtheta, double z_over_w0) {
    if (!(z_over_w0 > 0.0)) throw DomainError("z/w0 must be positive");
    return 0.5 * dtheta * dtheta * z_over_w0 * z_over_w0;
  }
  static double tilt_bound(double dV_over_V, double z_over_w0) {
    if (!(z_over_w0 > 0.0)) throw DomainError("z/w0 must be positive");
    if (dV_over_V < 0.0) throw DomainError("depth fluctuation must be non-negative");
    return std::sqrt(2.0 * dV_over_V) / z_over_w0;
  }
  // z/w0 implied by a pair (dV/V0, dtheta).
  static double implied_ratio(double dV_over_V, double dtheta) {
    if (!(dtheta > 0.0)) throw DomainError("tilt must be positive");
    return std::sqrt(2.0 * dV_over_V) / dtheta;
  }
};

struct PandaResult {
  double lattice_wavelength = 0.0;
  double count = 0.0;
  double dV_over_V = 0.0;
  double dphi = 0.0;
  double sensitivity = 0.0;
};

// Atoms held against gravity in a shallow cavity lattice.
// dV/V0 = dtheta z / w0; N from the hold time.
inline PandaResult case_panda(const SpeciesLattice& cs, double V0, double g, double z_over_w0,
                              double dtheta, double hold_time, const FloquetSettings& st) {
  PandaResult r;
  r.lattice_wavelength = cs.lattice_wavelength;
  r.count = oscillation_count(cs, g, hold_time);
  r.dV_over_V = dtheta * z_over_w0;
  const auto b = phase_uncertainty(cs, V0, g, r.count, r.dV_over_V, st);
  r.sensitivity = b.sensitivity;
  r.dphi = b.dphi;
  return r;
}

// ---------------------------------------------------------------------------
// Spontaneous emission

struct SpontaneousResult {
  double rate = 0.0;  // 1/s
  double loss = 0.0;
};

// hbar Gamma_sp = (2 w0^3 / 3 pi c^2) sqrt(V0^3 E_r) / (2 I0), harmonic
// average of a blue-detuned lattice; depth given in E_r, T in seconds.
inline SpontaneousResult spontaneous_emission(const SpeciesLattice& cfg, const LaserSystem& laser,
                                              double V0, double T) {
  laser.validate();
  if (V0 < 0.0 || T < 0.0) throw DomainError("depth and duration must be non-negative");
  const double I0 = laser.intensity();
  if (!(I0 > 0.0)) throw DomainError("laser intensity must be positive");
  const double w0 = cfg.resonance_frequency;
  const double Er = cfg.recoil_energy();
  const double V = cfg.from_recoil_energy(V0);
  const double hG = 2.0 * w0 * w0 * w0 / (3.0 * pi * si::c * si::c) * std::sqrt(V * V * V * Er) / (2.0 * I0);
  SpontaneousResult r;
  r.rate = hG / si::hbar;
  r.loss = -std::expm1(-r.rate * T);
  return r;
}

// ---------------------------------------------------------------------------
// Magic depth

// Depth in [lo, hi] (E_r) where E_{alpha,0} is maximal. At a_L = 0 the
// band average is used; otherwise the exact WS energy, unfolded next to
// the approximate formula.
inline double magic_depth(const SpeciesLattice& cfg, int alpha, double aL, const FloquetSettings& st,
                          double lo = 1.0, double hi = 30.0, double tol = 0.01) {
  if (alpha < 1) throw PreconditionError("magic depth needs an excited ladder");
  FloquetSettings s = st;
  s.alpha_max = std::max(s.alpha_max, alpha);
  std::function<double(double)> f;
  if (aL <= 0.0) {
    f = [alpha](double V0) { return band_average_uncached(V0, alpha); };
  } else {
    const double tilt = cfg.tilt(aL);
    f = [=](double V0) {
      const WsPoint p = ws_point_tilt(V0, tilt, s);
      const double ref = approx_ws_energy(V0, tilt, alpha, 0);
      return detail::unfold_near(p.ladders[alpha].E, tilt, ref);
    };
  }
  const double x = numeric::golden_section_max(f, lo, hi, tol);
  const double edge = 5.0 * tol;
  if (x - lo < edge || hi - x < edge) throw DomainError("no interior maximum in the depth bracket");
  const double fx = f(x);
  if (!(fx >= f(lo) && fx >= f(hi))) throw DomainError("no interior maximum in the depth bracket");
  return x;
}

}  // namespace lmt
