#pragma once

// Piecewise sigmoid control waveforms of an LMT Bloch pulse.
//
// Timeline (seconds):
//   [0, tau_load]                       V0 rises, a_L = 0
//   [tau_load, tau_load + T]            V0 held, a_L rises / plateaus / falls
//   [tau_load + T, T + 2 tau_load]      V0 falls, a_L = 0
// Each sigmoid is a logistic of width h*tau centred in its window and
// truncated (not renormalised) at the window edges.

#include <algorithm>
#include <cmath>
#include <vector>

#include "lmt/error.hpp"
#include "lmt/numeric.hpp"
#include "lmt/physconfig.hpp"

namespace lmt {

namespace detail {

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
inline double logistic(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace detail

struct PulseSchedule {
  SpeciesLattice cfg;
  double count = 0.0;      // N, momentum target 2 N hbar k_L
  double V0_peak = 0.0;    // E_r
  double aL_peak = 0.0;    // m/s^2
  double tau_load = 0.0;   // s
  double tau_ramp = 0.0;   // s
  double T_accel = 0.0;    // s
  double shape_h = 0.02;

  double t_accel_start() const { return tau_load; }
  double t_accel_end() const { return tau_load + T_accel; }
  double t_end() const { return T_accel + 2.0 * tau_load; }

  // Lattice depth in E_r.
  double V0(double t) const {
    if (t <= 0.0) return tau_load > 0.0 ? V0_peak * detail::logistic(-0.5 / shape_h) : V0_peak;
    if (t < tau_load) return V0_peak * detail::logistic((t - 0.5 * tau_load) / (shape_h * tau_load));
    if (t <= t_accel_end()) return V0_peak;
    if (tau_load <= 0.0) return 0.0;
    if (t >= t_end()) return V0_peak * detail::logistic(-0.5 / shape_h);
    return V0_peak * detail::logistic(-(t - (T_accel + 1.5 * tau_load)) / (shape_h * tau_load));
  }

  // Lattice acceleration in m/s^2.
  double accel(double t) const {
    const double t0 = t_accel_start();
    const double t1 = t_accel_end();
    if (t < t0 || t > t1 || aL_peak == 0.0) return 0.0;
    if (tau_ramp <= 0.0) return aL_peak;
    const double w = shape_h * tau_ramp;
    if (t < t0 + tau_ramp) return aL_peak * detail::logistic((t - (t0 + 0.5 * tau_ramp)) / w);
    if (t <= t1 - tau_ramp) return aL_peak;
    return aL_peak * detail::logistic(-(t - (t1 - 0.5 * tau_ramp)) / w);
  }

  // Lattice velocity, the closed-form integral of accel (m/s).
  double velocity(double t) const {
    const double t0 = t_accel_start();
    const double t1 = t_accel_end();
    if (t <= t0 || aL_peak == 0.0) return 0.0;
    t = std::min(t, t1);
    if (tau_ramp <= 0.0) return aL_peak * (t - t0);
    const double w = shape_h * tau_ramp;
    const double half = 0.5 / shape_h;  // logistic argument at the window edges
    const double rise = aL_peak * w * (detail::softplus(half) - detail::softplus(-half));
    if (t < t0 + tau_ramp) {
      const double x = (t - (t0 + 0.5 * tau_ramp)) / w;
      return aL_peak * w * (detail::softplus(x) - detail::softplus(-half));
    }
    if (t <= t1 - tau_ramp) return rise + aL_peak * (t - t0 - tau_ramp);
    const double plateau = aL_peak * (T_accel - 2.0 * tau_ramp);
    const double x = (t - (t1 - 0.5 * tau_ramp)) / w;
    return rise + plateau + aL_peak * w * (detail::softplus(half) - detail::softplus(-x));
  }

  // Lattice momentum p_L = m v in units of hbar k_L.
  double momentum(double t) const { return cfg.atom_mass * velocity(t) / (si::hbar * cfg.wave_number()); }

  // Lattice displacement (m), by quadrature of the velocity.
  double position(double t) const {
    const double t0 = t_accel_start();
    if (t <= t0) return 0.0;
    const double t1 = t_accel_end();
    const double inner = std::min(t, t1);
    const auto v = [this](double s) { return velocity(s); };
    const double scale = std::max(std::abs(velocity(t1)) * T_accel, 1e-300);
    double x = 0.0;
    // Split at the segment joints so the integrand is smooth on each piece.
    std::vector<double> cuts{t0};
    if (tau_ramp > 0.0) {
      cuts.push_back(t0 + tau_ramp);
      cuts.push_back(t1 - tau_ramp);
    }
    cuts.push_back(t1);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double a = cuts[i];
      const double b = std::min(cuts[i + 1], inner);
      if (b <= a) break;
      x += numeric::adaptive_simpson(v, a, b, 1e-13 * scale);
    }
    if (t > t1) x += velocity(t1) * (t - t1);
    return x;
  }

  // Two-photon detuning ramp, Delta nu = (k_L / pi) v  (Hz).
  double chirp(double t) const { return cfg.wave_number() / pi * velocity(t); }
  // Two-photon Rabi frequency, Omega = V0 / 2 hbar (rad/s).
  double rabi(double t) const { return cfg.from_recoil_energy(V0(t)) / (2.0 * si::hbar); }

  double final_velocity() const { return velocity(t_accel_end()); }
  double target_velocity() const {
    return 2.0 * count * si::hbar * cfg.wave_number() / cfg.atom_mass;
  }
};

// Sample of every waveform at one instant.
struct PulseSample {
  double t, V0, aL, pL, xL, dnu;
};

inline std::vector<PulseSample> sample_schedule(const PulseSchedule& s, int points) {
  if (points < 2) throw PreconditionError("need at least two waveform samples");
  std::vector<PulseSample> out;
  out.reserve(points);
  for (int i = 0; i < points; ++i) {
    const double t = s.t_end() * i / (points - 1);
    out.push_back({t, s.V0(t), s.accel(t), s.momentum(t), s.position(t), s.chirp(t)});
  }
  return out;
}

// Momentum delivered by the acceleration waveform, by adaptive quadrature of
// a_L(t) for a trial plateau duration T.
inline double integrated_velocity(const PulseSchedule& proto, double T, double tol) {
  PulseSchedule s = proto;
  s.T_accel = T;
  const auto a = [&s](double t) { return s.accel(t); };
  const double t0 = s.t_accel_start();
  const double t1 = s.t_accel_end();
  if (s.tau_ramp <= 0.0) return s.aL_peak * T;
  double v = numeric::adaptive_simpson(a, t0, t0 + s.tau_ramp, tol);
  v += s.aL_peak * (T - 2.0 * s.tau_ramp);
  v += numeric::adaptive_simpson(a, t1 - s.tau_ramp, t1, tol);
  return v;
}

// Builds the schedule and solves the acceleration time T so that the
// integrated acceleration delivers 2 N hbar k_L.
inline PulseSchedule build_schedule(const SpeciesLattice& cfg, double count, double V0_peak,
                                    double aL_peak, double tau_load, double tau_ramp,
                                    double shape_h = 0.02) {
  cfg.validate();
  if (count < 1.0) throw DomainError("an LMT pulse needs at least one Bloch oscillation");
  if (!(aL_peak > 0.0)) throw DomainError("peak acceleration must be positive");
  if (V0_peak < 0.0) throw DomainError("lattice depth must be non-negative");
  if (tau_load < 0.0 || tau_ramp < 0.0) throw DomainError("ramp durations must be non-negative");
  if (!(shape_h > 0.0)) throw DomainError("sigmoid width must be positive");

  PulseSchedule s;
  s.cfg = cfg;
  s.count = count;
  s.V0_peak = V0_peak;
  s.aL_peak = aL_peak;
  s.tau_load = tau_load;
  s.tau_ramp = tau_ramp;
  s.shape_h = shape_h;

  const double TB = bloch_period(cfg, aL_peak);
  // Rise and fall each deliver a*tau_ramp/2, so the plateau must be
  // non-negative: N T_B >= tau_ramp.
  if (count * TB < tau_ramp) {
    const long n_min = static_cast<long>(std::ceil(tau_ramp / TB - 1e-12));
    throw InfeasibleError("ramps deliver more momentum than requested; need N >= " +
                              std::to_string(n_min),
                          n_min);
  }
  const double target = s.target_velocity();
  if (tau_ramp <= 0.0) {
    s.T_accel = target / aL_peak;
    return s;
  }
  const double tol = 1e-13 * target;
  const auto residual = [&](double T) { return integrated_velocity(s, T, tol) - target; };
  const double lo = 2.0 * tau_ramp;
  const double hi = count * TB + 2.0 * tau_ramp;
  s.T_accel = numeric::bisect_secant(residual, lo, hi, 1e-15 * hi, 1e-12 * target);
  return s;
}

// A pulse that loads, holds for `hold` seconds without acceleration, and
// unloads. Used for control experiments.
inline PulseSchedule hold_schedule(const SpeciesLattice& cfg, double V0_peak, double tau_load,
                                   double hold, double shape_h = 0.02) {
  cfg.validate();
  if (hold < 0.0 || tau_load < 0.0) throw DomainError("durations must be non-negative");
  PulseSchedule s;
  s.cfg = cfg;
  s.V0_peak = V0_peak;
  s.tau_load = tau_load;
  s.T_accel = hold;
  s.shape_h = shape_h;
  return s;
}

}  // namespace lmt
