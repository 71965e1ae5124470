// Command-line front end. Every subcommand reads the scenario, writes
// <out>/<command>.csv and a <out>/<command>.json run summary.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lmt/lmt.hpp"

namespace fs = std::filesystem;
using namespace lmt;

namespace {

struct Globals {
  std::string scenario;
  std::string out = "out";
  int workers = 1;
  long tdse_budget = 0;
};

struct Context {
  Scenario sc;
  fs::path out;
  int workers;
  long tdse_budget;

  fs::path file(const std::string& name) const { return out / name; }
};

Context make_context(const Globals& g) {
  Context c{g.scenario.empty() ? Scenario{} : load_scenario(g.scenario), fs::path(g.out), g.workers, g.tdse_budget};
  if (g.workers < 1) throw ConfigError("worker count must be at least 1");
  fs::create_directories(c.out);
  return c;
}

io::RunSummary summary(const Context& c, const std::string& cmd) {
  io::RunSummary s(cmd, c.sc.settings_hash());
  s.note("scenario", c.sc.origin);
  s.note("workers", c.workers);
  return s;
}

void cmd_bands(const Context& c) {
  auto s = summary(c, "bands");
  const auto& sc = c.sc;
  const int nb = sc.alpha_max + 1;
  std::vector<std::string> head{"kappa"};
  for (int a = 0; a < nb; ++a) head.push_back("E" + std::to_string(a) + "_Er");
  io::CsvWriter w(c.file("bands.csv"), head);
  BandSettings bs;
  bs.n_trunc = std::max(32, nb + 8);
  for (int i = 0; i <= 512; ++i) {
    const double k = -1.0 + 2.0 * i / 512.0;
    const auto e = bloch_spectrum(sc.depth, k, nb, bs);
    std::vector<io::Cell> row{k};
    for (double v : e) row.emplace_back(v);
    w.row(row);
  }
  for (int a = 0; a < nb; ++a) s.golden("band_average_" + std::to_string(a), band_average(sc.depth, a));
  s.golden("edge_gap", edge_gap(sc.depth));
  s.write(c.file("bands.json"));
}

WsTrace sweep(const Context& c) {
  return ws_sweep(c.sc.species, c.sc.depth, c.sc.accel_grid(), c.sc.floquet(), c.workers);
}

void cmd_spectrum(const Context& c) {
  auto s = summary(c, "spectrum");
  const auto tr = sweep(c);
  io::CsvWriter w(c.file("spectrum.csv"), {"aL_m_s2", "alpha", "site", "E_Er", "Gamma_Er", "provenance"});
  for (std::size_t i = 0; i < tr.size(); ++i)
    for (int a = 0; a <= tr.alpha_max; ++a)
      for (int l = -2; l <= 2; ++l)
        w.row({tr.aL(i), static_cast<long>(a), static_cast<long>(l), tr.E(a, l, i), tr.Gamma(a, i),
               std::string(to_string(tr.points[i].provenance))});
  s.golden("points", static_cast<double>(tr.size()));
  s.note("issues", tr.issues);
  s.write(c.file("spectrum.json"));
}

void cmd_crossings(const Context& c) {
  auto s = summary(c, "crossings");
  const auto tr = sweep(c);
  const auto res = find_tunneling_resonances(tr);
  io::CsvWriter w(c.file("crossings.csv"), {"aL_star_m_s2", "Gamma0_Er", "baseline_Er", "alpha_partner",
                                           "site_partner", "crossing_aL_m_s2", "matched", "type"});
  long unmatched = 0;
  for (const auto& r : res) {
    io::Cell type = std::monostate{};
    if (r.matched || r.matched_beyond) {
      try {
        type = std::string(to_string(classify_crossing(tr, r.crossing_aL, r.alpha, r.site).type));
      } catch (const Error&) {
      }
    }
    if (!r.matched) ++unmatched;
    w.row({r.aL, r.Gamma0, r.baseline, r.matched || r.matched_beyond ? io::Cell(static_cast<long>(r.alpha)) : io::Cell{},
           r.matched || r.matched_beyond ? io::Cell(static_cast<long>(r.site)) : io::Cell{},
           r.matched || r.matched_beyond ? io::Cell(r.crossing_aL) : io::Cell{},
           std::string(r.matched ? "yes" : (r.matched_beyond ? "beyond" : "no")), type});
  }
  s.golden("resonances", static_cast<double>(res.size()));
  s.golden("unmatched", static_cast<double>(unmatched));
  s.write(c.file("crossings.json"));
}

PulseSchedule schedule(const Scenario& sc, double aL, double tau_ramp) {
  return build_schedule(sc.species, sc.count, sc.depth, aL, sc.tau_load, tau_ramp, sc.shape_h);
}

void cmd_pulse_loss(const Context& c) {
  auto s = summary(c, "pulse-loss");
  const auto& sc = c.sc;
  const auto grid = sc.accel_grid();
  WsTableOptions topt;
  topt.workers = c.workers;
  const WsTable table(sc.species, sc.depth, std::max(grid.back(), sc.accel) * (1.0 + 1e-9), sc.floquet(), topt);
  const BandAverageTable bands(sc.depth);
  struct Row {
    double T = 0, ws = 0, lz = 0, phase = 0;
    std::string err;
  };
  std::vector<Row> rows(grid.size());
  detail::parallel_for(grid.size(), c.workers, [&](std::size_t i) {
    try {
      const auto s = schedule(sc, grid[i], sc.tau_ramp);
      const auto r = adiabatic_evolution(s, table, bands);
      rows[i] = {s.T_accel, r.loss(), lz_pulse_loss(s), r.phase, ""};
    } catch (const Error& e) {
      rows[i].err = e.what();
    }
  });
  io::CsvWriter w(c.file("pulse-loss.csv"), {"aL_m_s2", "T_accel_s", "loss_ws", "loss_lz", "phase_rad", "error"});
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& r = rows[i];
    if (r.err.empty())
      w.row({grid[i], r.T, r.ws, r.lz, r.phase, std::string()});
    else
      w.row({grid[i], io::Cell{}, io::Cell{}, io::Cell{}, io::Cell{}, r.err});
  }
  const auto s0 = schedule(sc, sc.accel, sc.tau_ramp);
  EvolutionOptions eo;
  eo.with_loading = true;
  eo.distribution = sc.distribution();
  const auto r0 = adiabatic_evolution(s0, table, bands, eo);
  s.golden("T_accel_s", s0.T_accel);
  s.golden("loss_ws", r0.loss());
  s.golden("loss_lz", lz_pulse_loss(s0));
  s.golden("phase_rad", r0.phase);
  s.golden("loading_weight", r0.loading.weight);
  s.golden("final_chirp_Hz", s0.chirp(s0.t_end()));
  s.write(c.file("pulse-loss.json"));
}

void cmd_waveforms(const Context& c) {
  auto s = summary(c, "waveforms");
  const auto s0 = schedule(c.sc, c.sc.accel, c.sc.tau_ramp);
  io::CsvWriter w(c.file("waveforms.csv"), {"t_s", "V0_Er", "aL_m_s2", "pL_hbark", "xL_m", "dnu_Hz"});
  for (const auto& p : sample_schedule(s0, 2001)) w.row({p.t, p.V0, p.aL, p.pL, p.xL, p.dnu});
  s.golden("T_accel_s", s0.T_accel);
  s.golden("final_velocity_m_s", s0.final_velocity());
  s.golden("final_chirp_Hz", s0.chirp(s0.t_end()));
  s.write(c.file("waveforms.json"));
}

void cmd_tdse(const Context& c) {
  auto s = summary(c, "tdse");
  const auto& sc = c.sc;
  const auto s0 = schedule(sc, sc.accel, sc.tau_ramp);
  SimConfig cfg = default_sim(s0, sc.tdse.grid);
  cfg.frame = sc.tdse.frame;
  cfg.bin_half_width = sc.tdse.bin_half_width;
  cfg.max_bin = sc.tdse.max_bin;
  cfg.lattice_shift = sc.tdse.lattice_shift;
  cfg.series_points = sc.tdse.series_points;
  const auto run = run_tdse(s0, sc.distribution(), cfg);
  std::vector<std::string> head{"t_s", "norm", "absorbed", "mean_p_hbark"};
  for (int j = -cfg.max_bin; j <= cfg.max_bin; ++j) head.push_back("bin_" + std::to_string(j));
  io::CsvWriter w(c.file("tdse.csv"), head);
  for (const auto& smp : run.propagation.series) {
    std::vector<io::Cell> row{smp.t, smp.norm, smp.absorbed, smp.mean_p};
    for (double b : smp.bins) row.emplace_back(b);
    w.row(row);
  }
  if (sc.tdse.snapshot) write_snapshot(c.file("tdse_final.psi").string(), run.propagation.state);
  const auto& r = run.report;
  s.golden("absorbed", r.absorbed);
  s.golden("in_flight", r.in_flight);
  s.golden("tunneling", r.tunneling);
  s.golden("survival", r.survival);
  s.golden("nonadiabatic", r.nonadiabatic);
  s.golden("total_loss", r.total_loss);
  nlohmann::json bins = nlohmann::json::object();
  for (int j = -r.max_bin; j <= r.max_bin; ++j) bins[std::to_string(j)] = r.bin(j);
  s.note("bins", bins);
  s.note("grid", {{"points", cfg.points()}, {"dx", cfg.dx}, {"span", cfg.span}, {"dt", cfg.dt}});
  s.note("steps", run.propagation.steps);
  s.note("norm_defect", run.propagation.max_norm_defect);
  s.write(c.file("tdse.json"));
}

void cmd_phase_noise(const Context& c) {
  auto s = summary(c, "phase-noise");
  const auto& sc = c.sc;
  const auto grid = sc.accel_grid();
  const auto st = sc.floquet();
  std::vector<NoiseBudget> b(grid.size());
  std::vector<std::string> err(grid.size());
  detail::parallel_for(grid.size(), c.workers, [&](std::size_t i) {
    try {
      b[i] = required_stability(sc.species, sc.depth, grid[i], sc.count, sc.phase_budget, st);
    } catch (const Error& e) {
      err[i] = e.what();
    }
  });
  io::CsvWriter w(c.file("phase-noise.csv"), {"aL_m_s2", "dE00_dV0", "sensitivity", "dV_over_V_required",
                                             "dphi_at_noise_rad", "error"});
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (err[i].empty())
      w.row({grid[i], b[i].derivative, b[i].sensitivity, b[i].dV_over_V,
             b[i].sensitivity * sc.count * sc.relative_depth_noise, std::string()});
    else
      w.row({grid[i], io::Cell{}, io::Cell{}, io::Cell{}, io::Cell{}, err[i]});
  }
  const auto op = required_stability(sc.species, sc.depth, sc.accel, sc.count, sc.phase_budget, st);
  s.golden("sensitivity", op.sensitivity);
  s.golden("dE00_dV0", op.derivative);
  s.golden("dV_over_V_required", op.dV_over_V);
  s.golden("bloch_sensitivity", bloch_sensitivity(sc.depth, sc.species.tilt(sc.accel)));
  s.write(c.file("phase-noise.json"));
}

void cmd_spont(const Context& c) {
  auto s = summary(c, "spont");
  const auto& sc = c.sc;
  const auto grid = sc.accel_grid();
  WsTableOptions topt;
  topt.workers = c.workers;
  const WsTable table(sc.species, sc.depth, std::max(grid.back(), sc.accel) * (1.0 + 1e-9), sc.floquet(), topt);
  const BandAverageTable bands(sc.depth);
  io::CsvWriter w(c.file("spont.csv"), {"aL_m_s2", "T_accel_s", "rate_per_s", "loss_spont", "loss_tunneling",
                                       "ratio", "error"});
  const auto row = [&](double a) -> std::vector<io::Cell> {
    try {
      const auto s = schedule(sc, a, sc.tau_ramp);
      const auto sp = spontaneous_emission(sc.species, sc.laser, sc.depth, s.T_accel);
      const double lt = adiabatic_evolution(s, table, bands).loss();
      return {a, s.T_accel, sp.rate, sp.loss, lt, sp.loss / lt, std::string()};
    } catch (const Error& e) {
      return {a, io::Cell{}, io::Cell{}, io::Cell{}, io::Cell{}, io::Cell{}, std::string(e.what())};
    }
  };
  std::vector<std::vector<io::Cell>> rows(grid.size());
  detail::parallel_for(grid.size(), c.workers, [&](std::size_t i) { rows[i] = row(grid[i]); });
  for (const auto& r : rows) w.row(r);
  const auto s0 = schedule(sc, sc.accel, sc.tau_ramp);
  const double lt = adiabatic_evolution(s0, table, bands).loss();
  const auto sp = spontaneous_emission(sc.species, sc.laser, sc.depth, s0.T_accel);
  s.golden("loss_spont", sp.loss);
  s.golden("loss_tunneling", lt);
  s.golden("ratio", sp.loss / lt);
  s.golden("ratio_gebbe", spontaneous_emission(sc.species, presets::gebbe(), sc.depth, s0.T_accel).loss / lt);
  s.golden("ratio_kim", spontaneous_emission(sc.species, presets::kim(), sc.depth, s0.T_accel).loss / lt);
  s.write(c.file("spont.json"));
}

void cmd_magic(const Context& c, std::vector<double> accels) {
  auto s = summary(c, "magic-depth");
  const auto& sc = c.sc;
  if (accels.empty()) accels = {0.0, sc.accel};
  const auto st = sc.floquet();
  io::CsvWriter w(c.file("magic-depth.csv"), {"alpha", "aL_m_s2", "V0_star_Er", "error"});
  for (double a : accels) {
    try {
      const double v = magic_depth(sc.species, 1, a, st);
      w.row({1L, a, v, std::string()});
      char name[64];
      std::snprintf(name, sizeof name, "V0_star_a%g", a);
      s.golden(name, v);
    } catch (const Error& e) {
      w.row({1L, a, io::Cell{}, std::string(e.what())});
    }
  }
  s.write(c.file("magic-depth.json"));
}

// Cavity geometry unknown; z/w0 chosen so that 300 urad of tilt
// jitter gives about 0.9 rad at V0 = 20.
constexpr double panda_default_ratio = 6.1e-4;
constexpr double panda_default_tilt = 300e-6;
// Single-lattice geometry: the ratio implied by 1.51e-6 <-> 16.5 mrad.
inline double morel_default_ratio() { return MorelCase::implied_ratio(1.51e-6, 16.5e-3); }

void cmd_case(const Context& c, const std::string& which) {
  auto s = summary(c, "case-" + which);
  const auto& sc = c.sc;
  const fs::path csv = c.file("case-" + which + ".csv");
  if (which == "morel") {
    const double ratio = sc.z_over_w0 > 0.0 ? sc.z_over_w0 : morel_default_ratio();
    const double dV = MorelCase::depth_fluctuation(sc.tilt_jitter, ratio);
    // tightening the phase budget tenfold tightens dV tenfold
    const double tight = MorelCase::tilt_bound(dV / 10.0, ratio);
    io::CsvWriter w(csv, {"z_over_w0", "dtheta_rad", "dV_over_V", "dtheta_tenfold_rad"});
    w.row({ratio, sc.tilt_jitter, dV, tight});
    s.golden("z_over_w0", ratio);
    s.golden("dV_over_V", dV);
    s.golden("dtheta_tenfold_rad", tight);
  } else if (which == "panda") {
    const double ratio = sc.z_over_w0 > 0.0 ? sc.z_over_w0 : panda_default_ratio;
    const double lambda = wavelength_for_count(presets::cs133().atom_mass, sc.gravity, sc.hold, 92435.0);
    const SpeciesLattice cs = sc.species.name == "cs133" ? sc.species : presets::cs133(lambda);
    const double dtheta = sc.entries.count("laser.tilt_jitter") ? sc.tilt_jitter : panda_default_tilt;
    const auto r = case_panda(cs, sc.depth, sc.gravity, ratio, dtheta, sc.hold, default_floquet(cs, 1.0));
    io::CsvWriter w(csv, {"lattice_wavelength_m", "count", "z_over_w0", "dtheta_rad", "dV_over_V", "sensitivity",
                          "dphi_rad"});
    w.row({cs.lattice_wavelength, r.count, ratio, dtheta, r.dV_over_V, r.sensitivity, r.dphi});
    s.golden("lattice_wavelength_m", cs.lattice_wavelength);
    s.golden("wavelength_for_92435_m", lambda);
    s.golden("count", r.count);
    s.golden("dphi_rad", r.dphi);
  } else if (which == "canuel") {
    // gradiometer budget of 1 urad unless the scenario sets one
    const double dphi = sc.entries.count("schedule.phase_budget") ? sc.phase_budget : 1e-6;
    const auto b = required_stability(sc.species, sc.depth, sc.accel, sc.count, dphi, sc.floquet());
    io::CsvWriter w(csv, {"V0_Er", "aL_m_s2", "count", "dphi_rad", "sensitivity", "dV_over_V_required"});
    w.row({sc.depth, sc.accel, sc.count, dphi, b.sensitivity, b.dV_over_V});
    s.golden("dV_over_V_required", b.dV_over_V);
    s.golden("sensitivity", b.sensitivity);
  } else {
    throw ConfigError("unknown case '" + which + "' (morel, panda, canuel)");
  }
  s.write(c.file("case-" + which + ".json"));
}

void cmd_scan(const Context& c) {
  auto s = summary(c, "scan");
  const auto req = scan_request(c.sc, c.workers, c.tdse_budget);
  const auto rows = run_scan(req);
  write_scan_csv(c.file("scan.csv"), rows);
  long errors = 0;
  for (const auto& r : rows) errors += !r.error.empty();
  s.golden("rows", static_cast<double>(rows.size()));
  s.golden("rows_with_errors", static_cast<double>(errors));
  s.note("tdse_budget", c.tdse_budget);
  s.write(c.file("scan.json"));
}

void cmd_optimize(const Context& c) {
  auto s = summary(c, "optimize");
  const auto& sc = c.sc;
  io::CsvWriter w(c.file("optimize.csv"), {"V0_Er", "aL_star_m_s2", "loss", "resonance_below_m_s2",
                                          "resonance_above_m_s2", "error"});
  WsTableOptions topt;
  topt.workers = c.workers;
  for (double V0 : sc.scan.depths) {
    try {
      const WsTable table(sc.species, V0, sc.scan.bracket_max * (1.0 + 1e-9), sc.floquet(), topt);
      const BandAverageTable bands(V0);
      const auto r = find_optimum(table, bands, sc.count, sc.tau_ramp, sc.tau_load, sc.scan.bracket_min,
                                  sc.scan.bracket_max, sc.scan.coarse_step, 0.05, c.workers);
      w.row({V0, r.a_star, r.loss, io::opt(r.resonance_below), io::opt(r.resonance_above), std::string()});
      char name[64];
      std::snprintf(name, sizeof name, "aL_star_V%g", V0);
      s.golden(name, r.a_star);
      std::snprintf(name, sizeof name, "loss_V%g", V0);
      s.golden(name, r.loss);
    } catch (const Error& e) {
      w.row({V0, io::Cell{}, io::Cell{}, io::Cell{}, io::Cell{}, std::string(e.what())});
    }
  }
  s.write(c.file("optimize.json"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bloch-oscillation LMT pulse design on Wannier-Stark spectra"};
  app.fallthrough();  // global flags may follow the subcommand
  app.require_subcommand(1);
  Globals g;
  app.add_option("-s,--scenario", g.scenario, "scenario file (defaults apply when omitted)")->check(CLI::ExistingFile);
  app.add_option("-o,--out", g.out, "output directory");
  app.add_option("-j,--workers", g.workers, "worker threads");
  app.add_option("--tdse-budget", g.tdse_budget, "scan rows that also get a TDSE run");

  std::string case_name;
  std::vector<double> magic_accels;
  struct Sub {
    const char* name;
    const char* help;
  };
  auto* bands = app.add_subcommand("bands", "Bloch bands over the zone at the scenario depth");
  auto* spectrum = app.add_subcommand("spectrum", "complex Wannier-Stark ladders over the acceleration grid");
  auto* crossings = app.add_subcommand("crossings", "tunneling resonances and their ladder crossings");
  auto* pulse_loss = app.add_subcommand("pulse-loss", "adiabatic and Landau-Zener pulse losses");
  auto* waveforms = app.add_subcommand("waveforms", "sampled control waveforms of the scenario pulse");
  auto* tdse = app.add_subcommand("tdse", "split-step TDSE of the scenario pulse");
  auto* phase = app.add_subcommand("phase-noise", "depth-noise phase sensitivity");
  auto* spont = app.add_subcommand("spont", "spontaneous-emission versus tunneling losses");
  auto* magic = app.add_subcommand("magic-depth", "depth where the first excited ladder is stationary");
  magic->add_option("--accel", magic_accels, "accelerations in m/s^2 (default 0 and the schedule value)");
  auto* cs = app.add_subcommand("case", "error-budget case studies");
  cs->add_option("name", case_name, "morel, panda or canuel")->required()->check(CLI::IsMember({"morel", "panda", "canuel"}));
  auto* scan = app.add_subcommand("scan", "loss-model comparison over the scan grid");
  auto* optimize = app.add_subcommand("optimize", "loss-optimal acceleration per scan depth");

  CLI11_PARSE(app, argc, argv);
  try {
    const Context c = make_context(g);
    if (bands->parsed()) cmd_bands(c);
    else if (spectrum->parsed()) cmd_spectrum(c);
    else if (crossings->parsed()) cmd_crossings(c);
    else if (pulse_loss->parsed()) cmd_pulse_loss(c);
    else if (waveforms->parsed()) cmd_waveforms(c);
    else if (tdse->parsed()) cmd_tdse(c);
    else if (phase->parsed()) cmd_phase_noise(c);
    else if (spont->parsed()) cmd_spont(c);
    else if (magic->parsed()) cmd_magic(c, magic_accels);
    else if (cs->parsed()) cmd_case(c, case_name);
    else if (scan->parsed()) cmd_scan(c);
    else if (optimize->parsed()) cmd_optimize(c);
  } catch (const lmt::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
