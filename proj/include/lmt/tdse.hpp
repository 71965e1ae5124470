#pragma once

// Split-step Fourier integration of the 1D Schroedinger equation for an atom
// in the accelerated lattice, H = p^2 + V0(t) cos^2(x) + F(t) x in recoil
// units (x in 1/k_L, p in hbar k_L, t in hbar/E_r, F = tilt/pi). Atoms that
// tunnel out run down the tilt into an absorbing layer at the grid edge.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "lmt/adiabatic.hpp"
#include "lmt/error.hpp"
#include "lmt/numeric.hpp"
#include "lmt/physconfig.hpp"
#include "lmt/pulses.hpp"

namespace lmt {

enum class Frame { Lattice, Reduced };

struct SimConfig {
  double span = 0.0;              // 1/k_L
  double dx = 0.0;                // 1/k_L
  double dt = 0.0;                // hbar/E_r, upper bound; segments round it down
  double absorber_fraction = 0.1; // of the span, on each side
  double absorber_strength = 0.0; // mask per step is cos^(strength*dt); 0 disables
  Frame frame = Frame::Lattice;
  double bin_half_width = 1.0;    // hbar k_L
  int max_bin = 2;                // bins |j| > max_bin count as atoms in flight
  bool lattice_shift = false;
  int series_points = 0;

  std::size_t points() const { return static_cast<std::size_t>(std::llround(span / dx)); }

  void validate() const {
    if (!(span > 0.0) || !(dx > 0.0)) throw ConfigError("grid span and spacing must be positive");
    if (std::abs(span / dx - std::round(span / dx)) > 1e-9 * span / dx)
      throw ConfigError("grid span must be a whole number of grid steps");
    if (dx > pi / 16.0 * (1.0 + 1e-12)) throw ConfigError("grid must resolve the lattice with 16 points per period");
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    if (absorber_fraction < 0.0 || absorber_fraction >= 0.5) throw ConfigError("absorber fraction outside [0, 0.5)");
    if (absorber_strength < 0.0) throw ConfigError("absorber strength must be non-negative");
    if (!(bin_half_width > 0.0)) throw ConfigError("bin half-width must be positive");
    if (bin_half_width > 1.0 + 1e-12) throw ConfigError("momentum bins overlap");
    if (max_bin < 0) throw ConfigError("bin range must be non-negative");
  }
};

struct GridOptions {
  double periods = 128.0;
  int points_per_period = 0;      // 0 picks from the fastest escaping momentum
  double steps_per_period = 2048; // Bloch periods at the peak acceleration
  double absorber_fraction = 0.1;
};

// Default grid, step and absorber for a schedule.
inline SimConfig default_sim(const PulseSchedule& s, const GridOptions& g = {}) {
  if (!(g.periods >= 8.0)) throw ConfigError("grid must span at least 8 lattice periods");
  SimConfig c;
  const double force = s.aL_peak > 0.0 ? s.cfg.tilt(s.aL_peak) / pi : 0.0;
  int ppp = g.points_per_period;
  if (ppp <= 0) {
    // An escaped atom reaching the edge has p^2 = F L / 2; keep it below Nyquist.
    const double p_edge = std::sqrt(force * 0.5 * g.periods * pi);
    ppp = 16;
    while (ppp < p_edge + 4.0) ppp *= 2;
  }
  if (ppp < 16) throw ConfigError("grid must resolve the lattice with 16 points per period");
  c.dx = pi / ppp;
  c.span = g.periods * pi;
  const double vmax = std::max(s.V0_peak, 0.0) + force * 0.5 * c.span;
  const double phase_dt = 0.5 * (pi / 4.0) / std::max(vmax, 1e-300);
  if (s.aL_peak > 0.0) {
    const double TB = two_pi / s.cfg.tilt(s.aL_peak);
    c.dt = std::min(TB / g.steps_per_period, phase_dt);
  } else {
    c.dt = std::min(phase_dt, 1e-3);
  }
  c.absorber_fraction = g.absorber_fraction;
  c.absorber_strength = 1.0 / (8.0 * c.dt);  // cos^(1/8) per step at the default step
  return c;
}

struct WavefunctionGrid {
  double x0 = 0.0;  // first grid point
  double dx = 0.0;
  std::vector<cplx> psi;
  double absorbed = 0.0;
  double t = 0.0;                  // seconds
  Frame frame = Frame::Lattice;
  double frame_momentum = 0.0;     // p_L carried by the reduced-frame gauge

  std::size_t size() const { return psi.size(); }
  double span() const { return dx * static_cast<double>(psi.size()); }
  double x(std::size_t i) const { return x0 + dx * static_cast<double>(i); }
  double norm() const {
    double s = 0.0;
    for (const auto& z : psi) s += std::norm(z);
    return s * dx;
  }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// In-place complex FFT on an owned buffer. Plans are made with
// FFTW_ESTIMATE so results do not depend on timing measurements.
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n) {
    buf_ = static_cast<cplx*>(fftw_malloc(sizeof(cplx) * n));
    if (!buf_) throw Error("fft buffer allocation failed");
    std::lock_guard lock(fftw_planner_mutex());
    auto* p = reinterpret_cast<fftw_complex*>(buf_);
    fwd_ = fftw_plan_dft_1d(static_cast<int>(n), p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(static_cast<int>(n), p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  ~Fft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }
  cplx* data() { return buf_; }
  std::size_t size() const { return n_; }
  void forward() { fftw_execute(fwd_); }
  void backward() { fftw_execute(bwd_); }

 private:
  std::size_t n_;
  cplx* buf_ = nullptr;
  fftw_plan fwd_{}, bwd_{};
};

// Grid momentum of FFT index k (standard ordering).
inline double grid_momentum(std::size_t k, std::size_t n, double span) {
  const long kk = k < (n + 1) / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
  return two_pi * static_cast<double>(kk) / span;
}

// Kinetic momentum of a grid mode given the frame momentum A: the mode
// represents p - A modulo the grid period 2 p_max.
inline double kinetic_momentum(std::size_t k, std::size_t n, double span, double A) {
  const double pmax = pi * static_cast<double>(n) / span;
  return numeric::wrap_signed(grid_momentum(k, n, span) - A, 2.0 * pmax);
}

}  // namespace detail

// psi(x) as the Fourier synthesis of phi(p) over the zone, centred on x = 0.
inline WavefunctionGrid init_state(const MomentumDistribution& phi, const SimConfig& c) {
  c.validate();
  phi.validate();
  const std::size_t n = c.points();
  WavefunctionGrid g;
  g.dx = c.dx;
  g.x0 = -0.5 * c.span;
  g.psi.assign(n, cplx(0.0));
  g.frame = c.frame;
  detail::Fft fft(n);
  const double dp = two_pi / c.span;
  for (std::size_t k = 0; k < n; ++k) {
    const double p = detail::grid_momentum(k, n, c.span);
    // shift so index 0 sits at x0: e^{i p (x0 + j dx)}
    fft.data()[k] = phi(p) * std::exp(cplx(0.0, p * g.x0)) * dp / std::sqrt(two_pi);
  }
  fft.backward();
  std::copy(fft.data(), fft.data() + n, g.psi.begin());
  const double nrm = g.norm();
  if (std::abs(nrm - 1.0) > 1e-6) throw ConfigError("grid does not resolve the momentum distribution");
  for (auto& z : g.psi) z /= std::sqrt(nrm);
  double outside = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(g.x(i)) > 0.25 * c.span) outside += std::norm(g.psi[i]) * g.dx;
  if (outside > 1e-8) throw ConfigError("grid too small for the initial wavepacket");
  return g;
}

struct LossReport {
  double absorbed = 0.0;
  double in_flight = 0.0;     // |j| > max_bin, still on the grid
  double tunneling = 0.0;     // absorbed + in flight
  double survival = 0.0;      // j = 0
  double nonadiabatic = 0.0;  // 0 < |j| <= max_bin
  double unbinned = 0.0;      // between bins when the half-width is < 1
  double total_loss = 0.0;    // 1 - survival
  int max_bin = 0;
  std::vector<double> bins;   // j = -max_bin .. max_bin

  double bin(int j) const { return bins.at(static_cast<std::size_t>(j + max_bin)); }
  double sum() const { return absorbed + in_flight + survival + nonadiabatic + unbinned; }
};

namespace detail {

inline LossReport bin_state(const WavefunctionGrid& g, const SimConfig& c, Fft& fft) {
  const std::size_t n = g.size();
  std::copy(g.psi.begin(), g.psi.end(), fft.data());
  fft.forward();
  LossReport r;
  r.max_bin = c.max_bin;
  r.bins.assign(2 * c.max_bin + 1, 0.0);
  r.absorbed = g.absorbed;
  const double scale = g.dx / static_cast<double>(n);
  const double span = g.span();
  const double A = g.frame == Frame::Reduced ? g.frame_momentum : 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = std::norm(fft.data()[k]) * scale;
    const double p = kinetic_momentum(k, n, span, A);
    const long j = static_cast<long>(std::floor(0.5 * (p + 1.0)));
    if (std::abs(p - 2.0 * j) >= c.bin_half_width) {
      r.unbinned += w;
    } else if (std::abs(j) > c.max_bin) {
      r.in_flight += w;
    } else {
      r.bins[static_cast<std::size_t>(j + c.max_bin)] += w;
    }
  }
  r.survival = r.bins[static_cast<std::size_t>(c.max_bin)];
  for (int j = -c.max_bin; j <= c.max_bin; ++j)
    if (j != 0) r.nonadiabatic += r.bins[static_cast<std::size_t>(j + c.max_bin)];
  r.tunneling = r.absorbed + r.in_flight;
  r.total_loss = 1.0 - r.survival;
  return r;
}

inline double mean_momentum(const WavefunctionGrid& g, Fft& fft) {
  const std::size_t n = g.size();
  std::copy(g.psi.begin(), g.psi.end(), fft.data());
  fft.forward();
  const double A = g.frame == Frame::Reduced ? g.frame_momentum : 0.0;
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = std::norm(fft.data()[k]);
    num += w * kinetic_momentum(k, n, g.span(), A);
    den += w;
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace detail

// Momentum-bin loss decomposition of an unloaded state. Bins are centred on
// 2 j hbar k_L in the lattice frame.
inline LossReport diagnostics(const WavefunctionGrid& g, const PulseSchedule& s, const SimConfig& c) {
  c.validate();
  if (s.tau_load <= 0.0 || s.accel(s.t_end()) != 0.0)
    throw PreconditionError("diagnostics need a schedule that unloads the lattice");
  detail::Fft fft(g.size());
  auto r = detail::bin_state(g, c, fft);
  if (std::abs(r.sum() - 1.0) > 1e-6) throw ConvergenceError("loss report does not sum to one", r.sum() - 1.0);
  return r;
}

struct SeriesSample {
  double t = 0.0;  // s
  double norm = 0.0;
  double absorbed = 0.0;
  double mean_p = 0.0;
  std::vector<double> bins;
};

struct PropagationResult {
  WavefunctionGrid state;
  std::vector<SeriesSample> series;
  long steps = 0;
  double max_norm_defect = 0.0;  // max |norm + absorbed - 1| at the checkpoints
};

// Position of the potential minima relative to the untilted lattice for a
// force F at depth V0: cos^2(x - s) keeps them in place.
inline double lattice_shift_offset(double force, double V0) {
  if (force == 0.0) return 0.0;
  if (!(V0 > 0.0) || std::abs(force) > V0) throw DomainError("tilt too strong for a lattice shift");
  return 0.5 * std::asin(force / V0);
}

// Integrates the schedule from the state's time to the end. Steps never
// straddle a waveform joint, so a box pulse switches exactly on a step edge.
inline PropagationResult propagate(WavefunctionGrid state, const PulseSchedule& s, const SimConfig& c) {
  c.validate();
  const std::size_t n = state.size();
  if (n != c.points() || std::abs(state.dx - c.dx) > 1e-12 * c.dx)
    throw PreconditionError("state does not live on the configured grid");
  if (state.frame != c.frame) throw PreconditionError("state and configuration use different frames");
  const SpeciesLattice& cfg = s.cfg;
  const double tr = cfg.recoil_time();
  const bool reduced = c.frame == Frame::Reduced;

  // phase bound on the largest potential the grid can see
  const double fmax = s.aL_peak > 0.0 ? cfg.tilt(s.aL_peak) / pi : 0.0;
  const double vmax = std::max(s.V0_peak, 0.0) + (reduced ? 0.0 : fmax * 0.5 * c.span);
  if (vmax * c.dt >= pi / 4.0) throw ConfigError("time step violates the potential phase bound");

  std::vector<double> joints{state.t, s.t_accel_start(), s.t_accel_end(), s.t_end()};
  if (s.tau_ramp > 0.0) {
    joints.push_back(s.t_accel_start() + s.tau_ramp);
    joints.push_back(s.t_accel_end() - s.tau_ramp);
  }
  if (s.tau_load > 0.0) {
    joints.push_back(0.5 * s.tau_load);
    joints.push_back(s.t_accel_end() + 0.5 * s.tau_load);
  }
  std::sort(joints.begin(), joints.end());
  std::vector<double> nodes;
  for (double j : joints)
    if (j >= state.t && (nodes.empty() || j - nodes.back() > 1e-15 * s.t_end())) nodes.push_back(j);

  std::vector<double> xs(n), cos2(n), logmask(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) xs[i] = state.x(i);
  const double inner = 0.5 * c.span * (1.0 - 2.0 * c.absorber_fraction);
  const double outer = 0.5 * c.span;
  bool have_absorber = c.absorber_strength > 0.0 && c.absorber_fraction > 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs(xs[i]);
    if (!have_absorber || d <= inner) continue;
    const double u = std::min((d - inner) / (outer - inner), 1.0);
    logmask[i] = c.absorber_strength * std::log(std::max(std::cos(0.5 * pi * u), 1e-300));
  }

  detail::Fft fft(n);
  detail::Fft aux(n);
  cplx* buf = fft.data();
  std::copy(state.psi.begin(), state.psi.end(), buf);

  // Potential phase cache, keyed on everything that enters it. The lattice
  // term repeats every `period` points and the tilt term factorizes into
  // block and offset phases, so a refresh costs O(period + n / block) sincos.
  const std::size_t period = static_cast<std::size_t>(std::llround(pi / c.dx));
  const bool periodic = std::abs(period * c.dx - pi) < 1e-9 * pi && n % period == 0;
  constexpr std::size_t block = 64;
  std::vector<cplx> vphase(n), lat(n), tilt_block(n / block + 1), tilt_off(block);
  double key_v = NAN, key_f = NAN, key_s = NAN, key_w = NAN;
  double shift_base = NAN;
  const auto apply_potential = [&](double V0, double F, double weight) {
    const double shift = c.lattice_shift && F > 0.0 ? lattice_shift_offset(F, V0) : 0.0;
    if (shift != shift_base) {
      shift_base = shift;
      for (std::size_t i = 0; i < n; ++i) {
        const double cx = std::cos(xs[i] - shift);
        cos2[i] = cx * cx;
      }
      key_v = NAN;
    }
    const double Fx = reduced ? 0.0 : F;
    if (!(V0 == key_v && Fx == key_f && shift == key_s && weight == key_w)) {
      if (periodic) {
        for (std::size_t i = 0; i < period; ++i) lat[i] = std::polar(1.0, -weight * V0 * cos2[i]);
        for (std::size_t i = period; i < n; ++i) lat[i] = lat[i - period];
      } else {
        for (std::size_t i = 0; i < n; ++i) lat[i] = std::polar(1.0, -weight * V0 * cos2[i]);
      }
      if (Fx != 0.0) {
        for (std::size_t b = 0; b * block < n; ++b) tilt_block[b] = std::polar(1.0, -weight * Fx * xs[b * block]);
        for (std::size_t j = 0; j < block; ++j) tilt_off[j] = std::polar(1.0, -weight * Fx * c.dx * static_cast<double>(j));
        for (std::size_t i = 0; i < n; ++i) vphase[i] = lat[i] * tilt_block[i / block] * tilt_off[i % block];
      } else {
        std::copy(lat.begin(), lat.end(), vphase.begin());
      }
      key_v = V0;
      key_f = Fx;
      key_s = shift;
      key_w = weight;
    }
    for (std::size_t i = 0; i < n; ++i) buf[i] *= vphase[i];
  };
  // Waveforms at time t seen from inside a segment: a box jump at a joint
  // belongs to the segment on its own side.
  const auto fields = [&](double t, double seg_a, double seg_b, double& V0, double& F) {
    const double eps = 1e-9 * (seg_b - seg_a);
    const double te = t <= seg_a ? seg_a + eps : (t >= seg_b ? seg_b - eps : t);
    V0 = s.V0(te);
    const double a = s.accel(te);
    F = a > 0.0 ? cfg.tilt(a) / pi : 0.0;
  };

  std::vector<cplx> kphase(n);
  double kkey_h = NAN, kkey_a = NAN;
  const auto apply_kinetic = [&](double h, double A) {
    if (!(h == kkey_h && A == kkey_a)) {
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t k = 0; k < n; ++k) {
        const double p = detail::kinetic_momentum(k, n, c.span, A);
        kphase[k] = std::polar(inv_n, -p * p * h);
      }
      kkey_h = h;
      kkey_a = A;
    }
    fft.forward();
    for (std::size_t k = 0; k < n; ++k) buf[k] *= kphase[k];
    fft.backward();
  };

  std::vector<double> mask(n, 1.0);
  double mkey_h = NAN;
  const auto apply_absorber = [&](double h) {
    if (!have_absorber) return;
    if (h != mkey_h) {
      for (std::size_t i = 0; i < n; ++i) mask[i] = std::exp(logmask[i] * h);
      mkey_h = h;
    }
    double lost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i] == 1.0) continue;
      const double before = std::norm(buf[i]);
      buf[i] *= mask[i];
      lost += before - std::norm(buf[i]);
    }
    state.absorbed += lost * c.dx;
  };

  PropagationResult res;
  const auto snapshot_state = [&](double t_s) {
    std::copy(buf, buf + n, state.psi.begin());
    state.t = t_s;
    state.frame_momentum = reduced ? s.momentum(t_s) : 0.0;
  };
  std::vector<double> sample_times;
  if (c.series_points > 0) {
    const int m = std::max(c.series_points, 2);
    for (int i = 0; i < m; ++i) sample_times.push_back(nodes.front() + (nodes.back() - nodes.front()) * i / (m - 1));
  }
  std::size_t next_sample = 0;
  const auto record = [&](double t_s, bool force) {
    if (next_sample >= sample_times.size()) return;
    if (!force && t_s < sample_times[next_sample]) return;
    while (next_sample < sample_times.size() && sample_times[next_sample] <= t_s) ++next_sample;
    snapshot_state(t_s);
    SeriesSample smp;
    smp.t = t_s;
    smp.norm = state.norm();
    smp.absorbed = state.absorbed;
    smp.mean_p = detail::mean_momentum(state, aux);
    smp.bins = detail::bin_state(state, c, aux).bins;
    res.max_norm_defect = std::max(res.max_norm_defect, std::abs(smp.norm + smp.absorbed - 1.0));
    res.series.push_back(std::move(smp));
  };
  record(nodes.front(), true);

  for (std::size_t seg = 0; seg + 1 < nodes.size(); ++seg) {
    const double a = nodes[seg];
    const double b = nodes[seg + 1];
    const double len = (b - a) / tr;
    const long steps = std::max(1L, static_cast<long>(std::ceil(len / c.dt - 1e-9)));
    const double h = len / static_cast<double>(steps);
    const double h_s = (b - a) / static_cast<double>(steps);
    for (long k = 0; k < steps; ++k) {
      const double t0 = a + h_s * static_cast<double>(k);
      const double t1 = k + 1 == steps ? b : a + h_s * static_cast<double>(k + 1);
      double V0, F;
      fields(t0, a, b, V0, F);
      apply_potential(V0, F, 0.5 * h);
      apply_kinetic(h, reduced ? s.momentum(0.5 * (t0 + t1)) : 0.0);
      fields(t1, a, b, V0, F);
      apply_potential(V0, F, 0.5 * h);
      apply_absorber(h);
      ++res.steps;
      record(t1, false);
    }
  }
  snapshot_state(nodes.back());
  const double defect = std::abs(state.norm() + state.absorbed - 1.0);
  res.max_norm_defect = std::max(res.max_norm_defect, defect);
  if (defect > 1e-8) throw ConvergenceError("norm bookkeeping drifted", defect);
  res.state = std::move(state);
  return res;
}

// Box pulse with the lattice phase jumped at each acceleration step so the
// potential minima do not move.
inline PropagationResult lattice_shift_propagate(WavefunctionGrid state, const PulseSchedule& s, SimConfig c) {
  if (s.tau_ramp > 0.0) throw PreconditionError("lattice shift applies to box acceleration profiles");
  if (s.aL_peak > 0.0) lattice_shift_offset(s.cfg.tilt(s.aL_peak) / pi, s.V0_peak);
  c.lattice_shift = true;
  return propagate(std::move(state), s, c);
}

// Load, propagate and bin in one call.
struct TdseRun {
  SimConfig config;
  PropagationResult propagation;
  LossReport report;
};

inline TdseRun run_tdse(const PulseSchedule& s, const MomentumDistribution& phi, SimConfig c) {
  auto state = init_state(phi, c);
  TdseRun out;
  out.propagation = c.lattice_shift ? lattice_shift_propagate(std::move(state), s, c)
                                    : propagate(std::move(state), s, c);
  out.report = diagnostics(out.propagation.state, s, c);
  out.config = c;
  return out;
}

// Binary dump: 8-byte magic, uint64 count, doubles span, dx, x0, t (s),
// then interleaved re/im doubles.
inline void write_snapshot(const std::string& path, const WavefunctionGrid& g) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open snapshot file " + path);
  const char magic[8] = {'L', 'M', 'T', 'P', 'S', 'I', '1', '\0'};
  const std::uint64_t count = g.size();
  const double head[4] = {g.span(), g.dx, g.x0, g.t};
  f.write(magic, 8);
  f.write(reinterpret_cast<const char*>(&count), sizeof count);
  f.write(reinterpret_cast<const char*>(head), sizeof head);
  f.write(reinterpret_cast<const char*>(g.psi.data()), static_cast<std::streamsize>(sizeof(cplx) * g.size()));
  if (!f) throw Error("failed writing snapshot " + path);
}

inline WavefunctionGrid read_snapshot(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open snapshot file " + path);
  char magic[8];
  std::uint64_t count = 0;
  double head[4];
  f.read(magic, 8);
  f.read(reinterpret_cast<char*>(&count), sizeof count);
  f.read(reinterpret_cast<char*>(head), sizeof head);
  if (!f || std::memcmp(magic, "LMTPSI1", 8) != 0) throw Error("not a wavefunction snapshot: " + path);
  WavefunctionGrid g;
  g.dx = head[1];
  g.x0 = head[2];
  g.t = head[3];
  g.psi.resize(count);
  f.read(reinterpret_cast<char*>(g.psi.data()), static_cast<std::streamsize>(sizeof(cplx) * count));
  if (!f) throw Error("truncated snapshot " + path);
  return g;
}

}  // namespace lmt
