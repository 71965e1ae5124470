#pragma once

// Parameter scans comparing the loss models, and the optimal-acceleration
// search. Every row is a pure function of its parameters, so the output is
// the same for any worker count.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lmt/adiabatic.hpp"
#include "lmt/error.hpp"
#include "lmt/io.hpp"
#include "lmt/numeric.hpp"
#include "lmt/pulses.hpp"
#include "lmt/scenario.hpp"
#include "lmt/tdse.hpp"
#include "lmt/wsspectrum.hpp"

namespace lmt {

enum class Model { Ws, Lz, Tdse, Spont, Sens };

inline Model parse_model(const std::string& s) {
  if (s == "ws") return Model::Ws;
  if (s == "lz") return Model::Lz;
  if (s == "tdse") return Model::Tdse;
  if (s == "spont") return Model::Spont;
  if (s == "sens") return Model::Sens;
  throw ConfigError("unknown model '" + s + "'");
}

struct ScanRequest {
  SpeciesLattice cfg = presets::rb87_d2();
  LaserSystem laser = presets::gebbe();
  FloquetSettings floquet = default_floquet(presets::rb87_d2());
  std::vector<double> depths;     // E_r
  std::vector<double> accels;     // m/s^2
  std::vector<double> tau_ramps;  // s
  double count = 500.0;
  double tau_load = 2e-3;
  double shape_h = 0.02;
  std::vector<Model> models{Model::Ws, Model::Lz, Model::Spont};
  long tdse_budget = 0;           // rows (in order) that also get a TDSE run
  TdseSpec tdse;
  int workers = 1;

  bool has(Model m) const { return std::find(models.begin(), models.end(), m) != models.end(); }

  void validate() const {
    const auto increasing = [](const std::vector<double>& v) {
      if (v.empty()) return false;
      for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1])) return false;
      return true;
    };
    if (!increasing(depths)) throw ConfigError("depth grid must be non-empty and strictly increasing");
    if (!increasing(accels)) throw ConfigError("acceleration grid must be non-empty and strictly increasing");
    if (!increasing(tau_ramps)) throw ConfigError("ramp-time grid must be non-empty and strictly increasing");
    if (accels.front() <= 0.0) throw ConfigError("accelerations must be positive");
    if (!(count >= 1.0)) throw ConfigError("count must be at least 1");
    if (tdse_budget < 0) throw ConfigError("tdse budget must be non-negative");
  }

  std::size_t rows() const { return depths.size() * tau_ramps.size() * accels.size(); }
};

inline ScanRequest scan_request(const Scenario& sc, int workers, long tdse_budget) {
  ScanRequest r;
  r.cfg = sc.species;
  r.laser = sc.laser;
  r.floquet = sc.floquet();
  r.depths = sc.scan.depths;
  r.accels = sc.accel_grid();
  r.tau_ramps = sc.scan.tau_ramps;
  r.count = sc.count;
  r.tau_load = sc.tau_load;
  r.shape_h = sc.shape_h;
  r.models.clear();
  for (const auto& m : sc.scan.models) r.models.push_back(parse_model(m));
  r.tdse_budget = tdse_budget;
  r.tdse = sc.tdse;
  r.workers = workers;
  return r;
}

struct ComparisonRow {
  double V0 = 0.0;
  double aL = 0.0;
  double tau_ramp = 0.0;
  double count = 0.0;
  std::optional<double> T_accel;
  std::optional<double> loss_ws;
  std::optional<double> loss_lz;
  std::optional<double> loss_tdse;
  std::optional<double> loss_spont;
  std::optional<double> phase;        // rad
  std::optional<double> sensitivity;
  std::string error;                  // empty when every requested model ran
};

inline std::vector<std::string> comparison_header() {
  return {"V0_Er", "aL_m_s2", "tau_ramp_s", "count", "T_accel_s", "loss_ws", "loss_lz",
          "loss_tdse", "loss_spont", "phase_rad", "sensitivity", "error"};
}

inline std::vector<io::Cell> comparison_cells(const ComparisonRow& r) {
  return {r.V0, r.aL, r.tau_ramp, r.count, io::opt(r.T_accel), io::opt(r.loss_ws), io::opt(r.loss_lz),
          io::opt(r.loss_tdse), io::opt(r.loss_spont), io::opt(r.phase), io::opt(r.sensitivity), r.error};
}

namespace detail {

inline void append_error(std::string& e, const std::string& tag, const std::string& what) {
  if (!e.empty()) e += "; ";
  e += tag + ": " + what;
}

}  // namespace detail

inline std::vector<ComparisonRow> run_scan(const ScanRequest& req) {
  req.validate();
  std::vector<ComparisonRow> rows;
  rows.reserve(req.rows());
  for (double V0 : req.depths)
    for (double tr : req.tau_ramps)
      for (double a : req.accels) {
        ComparisonRow r;
        r.V0 = V0;
        r.aL = a;
        r.tau_ramp = tr;
        r.count = req.count;
        rows.push_back(r);
      }

  // WS tables per depth, shared read-only by the workers
  const bool need_ws = req.has(Model::Ws);
  std::map<double, std::shared_ptr<const WsTable>> tables;
  std::map<double, std::shared_ptr<const BandAverageTable>> bands;
  std::map<double, std::string> table_errors;
  if (need_ws) {
    WsTableOptions topt;
    topt.workers = req.workers;
    for (double V0 : req.depths) {
      try {
        tables[V0] = std::make_shared<WsTable>(req.cfg, V0, req.accels.back() * (1.0 + 1e-9), req.floquet, topt);
        bands[V0] = std::make_shared<BandAverageTable>(V0);
      } catch (const Error& e) {
        table_errors[V0] = e.what();
      }
    }
  }

  detail::parallel_for(rows.size(), req.workers, [&](std::size_t i) {
    ComparisonRow& r = rows[i];
    PulseSchedule s;
    try {
      s = build_schedule(req.cfg, req.count, r.V0, r.aL, req.tau_load, r.tau_ramp, req.shape_h);
      r.T_accel = s.T_accel;
    } catch (const Error& e) {
      detail::append_error(r.error, "schedule", e.what());
      return;
    }
    if (need_ws) {
      if (auto it = table_errors.find(r.V0); it != table_errors.end()) {
        detail::append_error(r.error, "ws", it->second);
      } else {
        try {
          const auto res = adiabatic_evolution(s, *tables.at(r.V0), *bands.at(r.V0));
          r.loss_ws = res.loss();
          r.phase = res.phase;
        } catch (const Error& e) {
          detail::append_error(r.error, "ws", e.what());
        }
      }
    }
    if (req.has(Model::Lz)) {
      try {
        r.loss_lz = lz_pulse_loss(s);
      } catch (const Error& e) {
        detail::append_error(r.error, "lz", e.what());
      }
    }
    if (req.has(Model::Spont)) {
      try {
        r.loss_spont = spontaneous_emission(req.cfg, req.laser, r.V0, s.T_accel).loss;
      } catch (const Error& e) {
        detail::append_error(r.error, "spont", e.what());
      }
    }
    if (req.has(Model::Sens)) {
      try {
        r.sensitivity = phase_sensitivity(dE00_dV0(req.cfg, r.V0, r.aL, req.floquet), r.V0, req.cfg.tilt(r.aL));
      } catch (const Error& e) {
        detail::append_error(r.error, "sens", e.what());
      }
    }
    if (req.has(Model::Tdse) && static_cast<long>(i) < req.tdse_budget) {
      try {
        GridOptions g = req.tdse.grid;
        SimConfig c = default_sim(s, g);
        c.frame = req.tdse.frame;
        c.bin_half_width = req.tdse.bin_half_width;
        c.max_bin = req.tdse.max_bin;
        c.lattice_shift = req.tdse.lattice_shift;
        const auto run = run_tdse(s, MomentumDistribution::gaussian(req.tdse.momentum_width, req.tdse.momentum_center), c);
        r.loss_tdse = run.report.total_loss;
      } catch (const Error& e) {
        detail::append_error(r.error, "tdse", e.what());
      }
    }
  });
  return rows;
}

inline void write_scan_csv(const std::filesystem::path& path, const std::vector<ComparisonRow>& rows) {
  io::CsvWriter w(path, comparison_header());
  for (const auto& r : rows) w.row(comparison_cells(r));
}

struct OptimumResult {
  double a_star = 0.0;
  double loss = 0.0;
  std::vector<double> grid;
  std::vector<double> losses;
  std::optional<double> resonance_below;  // nearest Gamma_0 peak on each side
  std::optional<double> resonance_above;
};

// Coarse grid over [lo, hi], then golden-section refinement between the
// neighbours of the best grid point.
inline OptimumResult find_optimum(const std::function<double(double)>& loss, double lo, double hi,
                                  double coarse_step, double tol = 0.05, int workers = 1) {
  if (!(hi > lo) || !(coarse_step > 0.0)) throw PreconditionError("bad optimizer bracket");
  OptimumResult r;
  r.grid = linear_grid(lo, hi, coarse_step);
  if (r.grid.back() < hi - 1e-9 * hi) r.grid.push_back(hi);
  if (r.grid.size() < 3) throw PreconditionError("bracket needs at least three coarse points");
  r.losses.assign(r.grid.size(), 0.0);
  detail::parallel_for(r.grid.size(), workers, [&](std::size_t i) { r.losses[i] = loss(r.grid[i]); });
  const auto best = static_cast<std::size_t>(std::min_element(r.losses.begin(), r.losses.end()) - r.losses.begin());
  if (best == 0 || best + 1 == r.grid.size()) throw DomainError("bracket contains no interior minimum");
  r.a_star = numeric::golden_section_min(loss, r.grid[best - 1], r.grid[best + 1], tol);
  r.loss = loss(r.a_star);
  if (r.loss > r.losses[best]) {
    r.a_star = r.grid[best];
    r.loss = r.losses[best];
  }
  return r;
}

inline OptimumResult find_optimum(const WsTable& table, const BandAverageTable& bands, double count,
                                  double tau_ramp, double tau_load, double lo, double hi, double coarse_step,
                                  double tol = 0.05, int workers = 1) {
  const auto loss = [&](double a) { return pulse_loss(table, bands, count, a, tau_ramp, tau_load); };
  auto r = find_optimum(loss, lo, hi, coarse_step, tol, workers);
  const auto& nodes = table.accelerations();
  for (std::size_t i = 1; i + 1 < nodes.size(); ++i) {
    const double g = table.gamma(nodes[i]);
    if (!(g > 1e-12 && g > table.gamma(nodes[i - 1]) && g > table.gamma(nodes[i + 1]))) continue;
    if (nodes[i] < r.a_star) r.resonance_below = nodes[i];
    if (nodes[i] > r.a_star && !r.resonance_above) r.resonance_above = nodes[i];
  }
  return r;
}

}  // namespace lmt
