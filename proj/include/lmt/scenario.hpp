#pragma once

// Scenario files: INI-style sections with `key = value unit` lines.
//
//   [schedule]
//   count = 500
//   accel = 393.5 m/s2
//   tau_ramp = 1 ms
//
// Lists are comma separated; a unit written once at the end applies to the
// elements that carry none ("depths = 10, 20, 40 Er"). Comments start with
// '#' or ';'. Every key is known in advance and typed by a physical
// dimension, so a missing or mismatched unit is an error, as is any key the
// parser does not know.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lmt/error.hpp"
#include "lmt/physconfig.hpp"
#include "lmt/tdse.hpp"
#include "lmt/wsspectrum.hpp"

namespace lmt {

enum class Dim { None, Length, Mass, Time, Accel, Power, Energy, Rate, Angle, Momentum, Word };

namespace detail {

struct UnitEntry {
  const char* name;
  Dim dim;
  double scale;
};

inline const std::vector<UnitEntry>& unit_table() {
  static const std::vector<UnitEntry> t = {
      {"m", Dim::Length, 1.0},         {"cm", Dim::Length, 1e-2},      {"mm", Dim::Length, 1e-3},
      {"um", Dim::Length, 1e-6},       {"nm", Dim::Length, 1e-9},      {"kg", Dim::Mass, 1.0},
      {"u", Dim::Mass, si::atomic_mass}, {"s", Dim::Time, 1.0},        {"ms", Dim::Time, 1e-3},
      {"us", Dim::Time, 1e-6},         {"ns", Dim::Time, 1e-9},        {"m/s2", Dim::Accel, 1.0},
      {"m/s^2", Dim::Accel, 1.0},      {"g", Dim::Accel, si::g_standard}, {"W", Dim::Power, 1.0},
      {"mW", Dim::Power, 1e-3},        {"Er", Dim::Energy, 1.0},       {"rad/s", Dim::Rate, 1.0},
      {"Hz", Dim::Rate, two_pi},       {"kHz", Dim::Rate, two_pi * 1e3}, {"MHz", Dim::Rate, two_pi * 1e6},
      {"GHz", Dim::Rate, two_pi * 1e9}, {"THz", Dim::Rate, two_pi * 1e12}, {"rad", Dim::Angle, 1.0},
      {"mrad", Dim::Angle, 1e-3},      {"urad", Dim::Angle, 1e-6},     {"hbark", Dim::Momentum, 1.0},
  };
  return t;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// A parsed numeric token in SI (rates in rad/s, energies in E_r).
inline double parse_quantity(const std::string& text, Dim dim, const std::string& where,
                             std::string* unit_out = nullptr) {
  const std::string t = detail::trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError(where + ": expected a number, got '" + t + "'");
  }
  const std::string unit = detail::trim(t.substr(used));
  if (unit_out) *unit_out = unit;
  if (!std::isfinite(v)) throw ConfigError(where + ": value is not finite");
  if (dim == Dim::None) {
    if (!unit.empty()) throw ConfigError(where + ": dimensionless value takes no unit, got '" + unit + "'");
    return v;
  }
  if (unit.empty()) throw ConfigError(where + ": missing unit");
  for (const auto& u : detail::unit_table())
    if (unit == u.name) {
      if (u.dim != dim) throw ConfigError(where + ": unit '" + unit + "' has the wrong dimension");
      return v * u.scale;
    }
  throw ConfigError(where + ": unknown unit '" + unit + "'");
}

inline std::vector<double> parse_list(const std::string& text, Dim dim, const std::string& where) {
  auto items = detail::split(text, ',');
  if (items.empty() || (items.size() == 1 && items[0].empty())) throw ConfigError(where + ": empty list");
  // a trailing unit covers the bare elements
  std::string shared;
  {
    std::string u;
    try {
      std::size_t used = 0;
      std::stod(items.back(), &used);
      u = detail::trim(items.back().substr(used));
    } catch (const std::exception&) {
      throw ConfigError(where + ": expected a number, got '" + items.back() + "'");
    }
    shared = u;
  }
  std::vector<double> out;
  for (auto& it : items) {
    std::size_t used = 0;
    try {
      std::stod(it, &used);
    } catch (const std::exception&) {
      throw ConfigError(where + ": expected a number, got '" + it + "'");
    }
    const bool bare = detail::trim(it.substr(used)).empty();
    out.push_back(parse_quantity(bare && !shared.empty() ? it + " " + shared : it, dim, where));
  }
  return out;
}

struct ScanSpec {
  std::vector<double> depths{20.0};          // E_r
  double accel_min = 150.0;                  // m/s^2
  double accel_max = 700.0;
  double accel_step = 0.5;
  std::vector<double> tau_ramps{1e-3};       // s
  std::vector<std::string> models{"ws", "lz", "spont"};
  double bracket_min = 150.0;                // optimizer bracket, m/s^2
  double bracket_max = 700.0;
  double coarse_step = 2.0;
};

struct TdseSpec {
  GridOptions grid;
  double momentum_width = 0.1;   // hbar k_L, rms
  double momentum_center = 0.0;
  double bin_half_width = 1.0;
  int max_bin = 2;
  Frame frame = Frame::Lattice;
  int series_points = 200;
  bool lattice_shift = false;
  bool snapshot = false;
};

struct Scenario {
  std::string origin = "<defaults>";
  SpeciesLattice species = presets::rb87_d2();
  LaserSystem laser = presets::gebbe();

  // lattice
  double depth = 20.0;           // E_r
  int floquet_trunc = 16;
  int floquet_steps = 256;
  int alpha_max = 3;
  double floor_accel = 20.0;     // m/s^2, below it WS energies use the approximate formula

  // schedule
  double count = 500.0;
  double accel = 393.5;          // m/s^2
  double tau_load = 2e-3;        // s
  double tau_ramp = 1e-3;        // s
  double shape_h = 0.02;
  double phase_budget = 1e-3;    // rad
  double relative_depth_noise = 1e-6;
  double hold = 60.0;            // s
  double gravity = 9.8;          // m/s^2

  // beam geometry for the case studies
  double z_over_w0 = 0.0;        // 0 selects the built-in calibration
  double tilt_jitter = 16.5e-3;  // rad

  ScanSpec scan;
  TdseSpec tdse;

  // canonical "section.key" -> value text, for hashing and the run summary
  std::map<std::string, std::string> entries;

  FloquetSettings floquet() const {
    FloquetSettings st = default_floquet(species, floor_accel);
    st.n_trunc = floquet_trunc;
    st.steps = floquet_steps;
    st.alpha_max = alpha_max;
    return st;
  }

  std::vector<double> accel_grid() const { return linear_grid(scan.accel_min, scan.accel_max, scan.accel_step); }

  MomentumDistribution distribution() const {
    return MomentumDistribution::gaussian(tdse.momentum_width, tdse.momentum_center);
  }

  // Canonical text of every effective setting; the hash covers it.
  std::string canonical() const {
    std::ostringstream o;
    const auto put = [&](const std::string& k, double v) { o << k << '=' << detail::format_double(v) << '\n'; };
    o << "species.name=" << species.name << '\n';
    put("species.mass", species.atom_mass);
    put("species.lattice_wavelength", species.lattice_wavelength);
    put("species.transition_wavelength", species.transition_wavelength);
    put("species.linewidth", species.natural_linewidth);
    put("species.resonance_frequency", species.resonance_frequency);
    put("species.detuning", species.detuning);
    put("laser.power", laser.power);
    put("laser.waist", laser.waist);
    put("laser.z_over_w0", z_over_w0);
    put("laser.tilt_jitter", tilt_jitter);
    put("lattice.depth", depth);
    put("lattice.floquet_trunc", floquet_trunc);
    put("lattice.floquet_steps", floquet_steps);
    put("lattice.alpha_max", alpha_max);
    put("lattice.floor_accel", floor_accel);
    put("schedule.count", count);
    put("schedule.accel", accel);
    put("schedule.tau_load", tau_load);
    put("schedule.tau_ramp", tau_ramp);
    put("schedule.shape_h", shape_h);
    put("schedule.phase_budget", phase_budget);
    put("schedule.relative_depth_noise", relative_depth_noise);
    put("schedule.hold", hold);
    put("schedule.gravity", gravity);
    for (double d : scan.depths) put("scan.depths", d);
    put("scan.accel_min", scan.accel_min);
    put("scan.accel_max", scan.accel_max);
    put("scan.accel_step", scan.accel_step);
    for (double t : scan.tau_ramps) put("scan.tau_ramps", t);
    for (const auto& m : scan.models) o << "scan.models=" << m << '\n';
    put("scan.bracket_min", scan.bracket_min);
    put("scan.bracket_max", scan.bracket_max);
    put("scan.coarse_step", scan.coarse_step);
    put("tdse.periods", tdse.grid.periods);
    put("tdse.points_per_period", tdse.grid.points_per_period);
    put("tdse.steps_per_period", tdse.grid.steps_per_period);
    put("tdse.absorber_fraction", tdse.grid.absorber_fraction);
    put("tdse.momentum_width", tdse.momentum_width);
    put("tdse.momentum_center", tdse.momentum_center);
    put("tdse.bin_half_width", tdse.bin_half_width);
    put("tdse.max_bin", tdse.max_bin);
    o << "tdse.frame=" << (tdse.frame == Frame::Lattice ? "lattice" : "reduced") << '\n';
    put("tdse.series_points", tdse.series_points);
    put("tdse.lattice_shift", tdse.lattice_shift);
    put("tdse.snapshot", tdse.snapshot);
    return o.str();
  }

  // FNV-1a over the canonical text, as 16 hex digits.
  std::string settings_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : canonical()) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  void validate() const {
    species.validate();
    laser.validate();
    if (depth < 0.0) throw ConfigError("lattice depth must be non-negative");
    if (floquet_trunc < 4 || floquet_steps < 8 || alpha_max < 0) throw ConfigError("Floquet settings out of range");
    if (!(count >= 1.0)) throw ConfigError("count must be at least 1");
    if (!(accel > 0.0)) throw ConfigError("acceleration must be positive");
    if (tau_load < 0.0 || tau_ramp < 0.0) throw ConfigError("ramp times must be non-negative");
    if (!(shape_h > 0.0)) throw ConfigError("shape_h must be positive");
    if (scan.depths.empty() || scan.tau_ramps.empty()) throw ConfigError("scan grids must be non-empty");
    const auto increasing = [](const std::vector<double>& v) {
      return std::adjacent_find(v.begin(), v.end(), [](double a, double b) { return !(b > a); }) == v.end();
    };
    if (!increasing(scan.depths)) throw ConfigError("scan depths must increase strictly");
    if (!increasing(scan.tau_ramps)) throw ConfigError("scan ramp times must increase strictly");
    if (!(scan.accel_max >= scan.accel_min) || !(scan.accel_step > 0.0) || !(scan.accel_min > 0.0))
      throw ConfigError("scan acceleration axis is invalid");
    if (!(scan.bracket_max > scan.bracket_min) || !(scan.coarse_step > 0.0))
      throw ConfigError("optimizer bracket is invalid");
    for (const auto& m : scan.models)
      if (m != "ws" && m != "lz" && m != "tdse" && m != "spont" && m != "sens")
        throw ConfigError("unknown model '" + m + "'");
  }
};

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError(where + ": expected a boolean, got '" + v + "'");
}

inline int parse_int(const std::string& v, const std::string& where) {
  const double x = parse_quantity(v, Dim::None, where);
  if (x != std::floor(x) || std::abs(x) > 1e9) throw ConfigError(where + ": expected an integer");
  return static_cast<int>(x);
}

}  // namespace detail

inline Scenario parse_scenario(const std::string& text, const std::string& origin = "<string>") {
  Scenario sc;
  sc.origin = origin;
  std::map<std::string, std::pair<std::string, int>> kv;  // "section.key" -> (value, line)
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  static const std::vector<std::string> sections{"species", "lattice", "laser", "schedule", "scan", "tdse"};
  while (std::getline(in, line)) {
    ++lineno;
    const auto cut = line.find_first_of("#;");
    if (cut != std::string::npos) line = line.substr(0, cut);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (std::find(sections.begin(), sections.end(), section) == sections.end())
        throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside any section");
    const std::string key = section + "." + detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (kv.count(key)) throw ConfigError(where + ": duplicate key " + key);
    kv[key] = {value, lineno};
  }

  const auto where = [&](const std::string& key) { return origin + ":" + std::to_string(kv.at(key).second) + " " + key; };
  const auto take = [&](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    if (it == kv.end()) return nullptr;
    sc.entries[key] = it->second.first;
    return &it->second.first;
  };
  const auto num = [&](const std::string& key, Dim dim, double& target) {
    if (auto v = take(key)) target = parse_quantity(*v, dim, where(key));
  };
  const auto integer = [&](const std::string& key, int& target) {
    if (auto v = take(key)) target = detail::parse_int(*v, where(key));
  };
  const auto flag = [&](const std::string& key, bool& target) {
    if (auto v = take(key)) target = detail::parse_bool(*v, where(key));
  };

  // species: preset first, then overrides
  if (auto v = take("species.preset")) {
    if (*v == "rb87") sc.species = presets::rb87_d2();
    else if (*v == "cs133") sc.species = presets::cs133();
    else throw ConfigError(where("species.preset") + ": unknown preset '" + *v + "'");
  }
  const double lambda0 = sc.species.lattice_wavelength;
  num("species.mass", Dim::Mass, sc.species.atom_mass);
  num("species.lattice_wavelength", Dim::Length, sc.species.lattice_wavelength);
  num("species.transition_wavelength", Dim::Length, sc.species.transition_wavelength);
  num("species.linewidth", Dim::Rate, sc.species.natural_linewidth);
  num("species.resonance_frequency", Dim::Rate, sc.species.resonance_frequency);
  if (kv.count("species.detuning")) {
    num("species.detuning", Dim::Rate, sc.species.detuning);
  } else if (sc.species.lattice_wavelength != lambda0 || kv.count("species.resonance_frequency")) {
    sc.species.detuning = two_pi * si::c / sc.species.lattice_wavelength - sc.species.resonance_frequency;
  }
  if (auto v = take("species.name")) sc.species.name = *v;

  if (auto v = take("laser.preset")) {
    if (*v == "gebbe") sc.laser = presets::gebbe();
    else if (*v == "kim") sc.laser = presets::kim();
    else throw ConfigError(where("laser.preset") + ": unknown preset '" + *v + "'");
  }
  num("laser.power", Dim::Power, sc.laser.power);
  num("laser.waist", Dim::Length, sc.laser.waist);
  num("laser.z_over_w0", Dim::None, sc.z_over_w0);
  num("laser.tilt_jitter", Dim::Angle, sc.tilt_jitter);

  num("lattice.depth", Dim::Energy, sc.depth);
  integer("lattice.floquet_trunc", sc.floquet_trunc);
  integer("lattice.floquet_steps", sc.floquet_steps);
  integer("lattice.alpha_max", sc.alpha_max);
  num("lattice.floor_accel", Dim::Accel, sc.floor_accel);

  num("schedule.count", Dim::None, sc.count);
  num("schedule.accel", Dim::Accel, sc.accel);
  num("schedule.tau_load", Dim::Time, sc.tau_load);
  num("schedule.tau_ramp", Dim::Time, sc.tau_ramp);
  num("schedule.shape_h", Dim::None, sc.shape_h);
  num("schedule.phase_budget", Dim::Angle, sc.phase_budget);
  num("schedule.relative_depth_noise", Dim::None, sc.relative_depth_noise);
  num("schedule.hold", Dim::Time, sc.hold);
  num("schedule.gravity", Dim::Accel, sc.gravity);

  if (auto v = take("scan.depths")) sc.scan.depths = parse_list(*v, Dim::Energy, where("scan.depths"));
  num("scan.accel_min", Dim::Accel, sc.scan.accel_min);
  num("scan.accel_max", Dim::Accel, sc.scan.accel_max);
  num("scan.accel_step", Dim::Accel, sc.scan.accel_step);
  if (auto v = take("scan.tau_ramps")) sc.scan.tau_ramps = parse_list(*v, Dim::Time, where("scan.tau_ramps"));
  if (auto v = take("scan.models")) {
    sc.scan.models.clear();
    for (auto& m : detail::split(*v, ',')) sc.scan.models.push_back(m);
  }
  num("scan.bracket_min", Dim::Accel, sc.scan.bracket_min);
  num("scan.bracket_max", Dim::Accel, sc.scan.bracket_max);
  num("scan.coarse_step", Dim::Accel, sc.scan.coarse_step);

  num("tdse.periods", Dim::None, sc.tdse.grid.periods);
  integer("tdse.points_per_period", sc.tdse.grid.points_per_period);
  num("tdse.steps_per_period", Dim::None, sc.tdse.grid.steps_per_period);
  num("tdse.absorber_fraction", Dim::None, sc.tdse.grid.absorber_fraction);
  num("tdse.momentum_width", Dim::Momentum, sc.tdse.momentum_width);
  num("tdse.momentum_center", Dim::Momentum, sc.tdse.momentum_center);
  num("tdse.bin_half_width", Dim::Momentum, sc.tdse.bin_half_width);
  integer("tdse.max_bin", sc.tdse.max_bin);
  if (auto v = take("tdse.frame")) {
    if (*v == "lattice") sc.tdse.frame = Frame::Lattice;
    else if (*v == "reduced") sc.tdse.frame = Frame::Reduced;
    else throw ConfigError(where("tdse.frame") + ": expected lattice or reduced");
  }
  integer("tdse.series_points", sc.tdse.series_points);
  flag("tdse.lattice_shift", sc.tdse.lattice_shift);
  flag("tdse.snapshot", sc.tdse.snapshot);

  for (const auto& [key, val] : kv)
    if (!sc.entries.count(key)) throw ConfigError(origin + ":" + std::to_string(val.second) + ": unknown key " + key);
  try {
    sc.validate();
  } catch (const DomainError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open scenario file " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace lmt
