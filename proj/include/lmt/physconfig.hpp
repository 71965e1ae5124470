#pragma once

// Species, lattice geometry and the recoil unit system.
//
// Internally every module works in recoil units: energies in E_r,
// lengths in 1/k_L, times in hbar/E_r, momenta in hbar*k_L. In these units
// hbar = k_L = E_r = 1, the atomic mass is 1/2, the lattice constant is pi
// and the kinetic energy of a plane wave with momentum p is p^2.
// SI values appear only at the API boundary.

#include <cmath>
#include <numbers>
#include <string>

#include "lmt/error.hpp"

namespace lmt {

namespace si {
inline constexpr double hbar = 1.054571817e-34;      // J s
inline constexpr double c = 299792458.0;             // m/s
inline constexpr double atomic_mass = 1.66053906660e-27;  // kg
inline constexpr double g_standard = 9.80665;        // m/s^2
}  // namespace si

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct SpeciesLattice {
  std::string name = "custom";
  double atom_mass = 0.0;              // kg
  double lattice_wavelength = 0.0;     // m
  double transition_wavelength = 0.0;  // m
  double natural_linewidth = 0.0;      // rad/s
  double resonance_frequency = 0.0;    // rad/s
  double detuning = 0.0;               // rad/s, blue detuning positive

  void validate() const {
    if (!(atom_mass > 0.0)) throw DomainError("atom mass must be positive");
    if (!(lattice_wavelength > 0.0)) throw DomainError("lattice wavelength must be positive");
    if (!(transition_wavelength > 0.0))
      throw DomainError("transition wavelength must be positive");
    if (!(natural_linewidth > 0.0)) throw DomainError("natural linewidth must be positive");
    if (!(resonance_frequency > 0.0)) throw DomainError("resonance frequency must be positive");
  }

  double lattice_constant() const { return 0.5 * lattice_wavelength; }
  double wave_number() const { return pi / lattice_constant(); }

  // E_r = hbar^2 k_L^2 / 2m in joule.
  double recoil_energy() const {
    const double k = wave_number();
    return si::hbar * si::hbar * k * k / (2.0 * atom_mass);
  }
  // hbar / E_r in seconds.
  double recoil_time() const { return si::hbar / recoil_energy(); }
  // hbar k_L / m in m/s.
  double recoil_velocity() const { return si::hbar * wave_number() / atom_mass; }

  // Ladder spacing d*m*a_L in units of E_r. This dimensionless tilt is the
  // only way the acceleration enters the recoil-unit Hamiltonian.
  double tilt(double acceleration) const {
    return lattice_constant() * atom_mass * acceleration / recoil_energy();
  }
  double acceleration_from_tilt(double tilt_er) const {
    return tilt_er * recoil_energy() / (lattice_constant() * atom_mass);
  }

  double to_recoil_energy(double joule) const { return joule / recoil_energy(); }
  double from_recoil_energy(double er) const { return er * recoil_energy(); }
  double to_recoil_time(double seconds) const { return seconds / recoil_time(); }
  double from_recoil_time(double t) const { return t * recoil_time(); }
};

struct LaserSystem {
  double power = 0.0;  // W
  double waist = 0.0;  // m

  void validate() const {
    if (!(power > 0.0)) throw DomainError("laser power must be positive");
    if (!(waist > 0.0)) throw DomainError("laser waist must be positive");
  }
  // Peak intensity of a Gaussian beam, I0 = 2P / (pi w^2).
  double intensity() const { return 2.0 * power / (pi * waist * waist); }
};

namespace presets {

// 87Rb on the D2 line; lattice near-resonant and blue detuned.
inline SpeciesLattice rb87_d2(double lattice_wavelength = 780.24e-9) {
  SpeciesLattice s;
  s.name = "rb87";
  s.atom_mass = 86.909180527 * si::atomic_mass;
  s.lattice_wavelength = lattice_wavelength;
  s.transition_wavelength = 780.241209686e-9;
  s.natural_linewidth = two_pi * 6.0666e6;
  s.resonance_frequency = two_pi * 384.2304844685e12;
  s.detuning = two_pi * (si::c / lattice_wavelength - 384.2304844685e12);
  return s;
}

// 133Cs on the D2 line. The default lattice wavelength reproduces the
// oscillation count of a one-minute hold against gravity.
inline SpeciesLattice cs133(double lattice_wavelength = 943e-9) {
  SpeciesLattice s;
  s.name = "cs133";
  s.atom_mass = 132.905451961 * si::atomic_mass;
  s.lattice_wavelength = lattice_wavelength;
  s.transition_wavelength = 852.34727582e-9;
  s.natural_linewidth = two_pi * 5.2227e6;
  s.resonance_frequency = two_pi * 351.72571850e12;
  s.detuning = two_pi * (si::c / lattice_wavelength - 351.72571850e12);
  return s;
}

inline LaserSystem gebbe() { return {1.2, 3.75e-3}; }
inline LaserSystem kim() { return {6.0, 1.0e-3}; }

}  // namespace presets

inline double recoil_energy(const SpeciesLattice& cfg) { return cfg.recoil_energy(); }

// T_B = 2 hbar k_L / (m a_L).
inline double bloch_period(const SpeciesLattice& cfg, double acceleration) {
  if (!(acceleration > 0.0)) throw DomainError("Bloch period needs a positive acceleration");
  return 2.0 * si::hbar * cfg.wave_number() / (cfg.atom_mass * acceleration);
}

// N = m a_L T / (2 hbar k_L).
inline double oscillation_count(const SpeciesLattice& cfg, double acceleration, double duration) {
  if (!(acceleration > 0.0)) throw DomainError("oscillation count needs a positive acceleration");
  if (duration < 0.0) throw DomainError("duration must be non-negative");
  return cfg.atom_mass * acceleration * duration / (2.0 * si::hbar * cfg.wave_number());
}

inline double acceleration_time(const SpeciesLattice& cfg, double acceleration, double count) {
  if (count < 0.0) throw DomainError("oscillation count must be non-negative");
  return count * bloch_period(cfg, acceleration);
}

// Lattice wavelength for which `count` Bloch oscillations fit into `duration`
// at the given acceleration (inverse of oscillation_count in lambda).
inline double wavelength_for_count(double atom_mass, double acceleration, double duration,
                                   double count) {
  if (!(count > 0.0) || !(duration > 0.0) || !(acceleration > 0.0))
    throw DomainError("wavelength inversion needs positive count, duration and acceleration");
  return 4.0 * pi * si::hbar * count / (atom_mass * acceleration * duration);
}

}  // namespace lmt
