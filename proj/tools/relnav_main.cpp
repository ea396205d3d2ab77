// relnav: scenario runner for the relative-navigation toolkit.
//
//   relnav run    — single closed-loop run, writes per-epoch CSV + JSON
//   relnav mc     — Monte Carlo batch with servicer navigation noise
//   relnav sweep  — process-noise floor sweep with/without adaptation
//   relnav verify — numerical self-checks against quadrature references
//
// Output directory: --out flag, else $RELNAV_OUT_DIR, else ./out.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "oracles/oracles.hpp"
#include "relnav/attdyn.hpp"
#include "relnav/orbitmech.hpp"
#include "relnav/procnoise.hpp"
#include "relnav/sim.hpp"

namespace {

using relnav::attmath::Vec3;

constexpr double kDegToRad = M_PI / 180.0;

// ---------------------------------------------------------------------------
// Scenario files: flat key-value text with [section] headers and '#'
// comments. Values present in the file override the preset the run starts
// from; command-line flags override both.
//
//   name = close_range
//   [servicer]
//   a_m = 7078135        e = 0.001          inc_deg = 98.2
//   raan_deg = 189.9     argp_deg = 0       mean_anomaly_deg = 0
//   [roe]
//   da_m = 0   dlambda_m = -8   dex_m = 0   dey_m = 0   dix_m = 0   diy_m = 0
//   [attitude]
//   q0_wxyz = 0.7071 0.7071 0 0
//   omega0_deg_s = 1 0 0
//   inertia_diag = 2.69 3.46 3.11
//   [run]
//   n_orbits = 2   truth_dt_s = 1   meas_dt_s = 5   seed = 20260816
//   model_consistent_truth = 0
//   [truth_noise]
//   accel_sigma = 5e-8   torque_sigma = 1e-7
//   [emulator]
//   preset = synthetic | lightbox_roe1 | lightbox_roe2

std::map<std::string, std::string> parse_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);

  std::map<std::string, std::string> kv;
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);

    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": malformed section header");
      }
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected key = value");
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto trim = [](std::string& s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    trim(key);
    trim(value);
    if (key.empty() || value.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": empty key or value");
    }
    kv[section.empty() ? key : section + "." + key] = value;
  }
  return kv;
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("scenario key '" + key + "': bad number '" +
                             value + "'");
  }
  if (pos != value.size() || !std::isfinite(d)) {
    throw std::runtime_error("scenario key '" + key + "': bad number '" +
                             value + "'");
  }
  return d;
}

Vec3 to_vec3(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  Vec3 v;
  if (!(in >> v.x() >> v.y() >> v.z())) {
    throw std::runtime_error("scenario key '" + key +
                             "': expected three numbers");
  }
  std::string rest;
  if (in >> rest) {
    throw std::runtime_error("scenario key '" + key +
                             "': expected exactly three numbers");
  }
  return v;
}

void apply_scenario_file(relnav::sim::Scenario& sc, const std::string& path) {
  Eigen::Matrix<double, 6, 1> roe_m = sc.roe0.vec() * sc.servicer0.a;
  const auto kv = parse_key_values(path);
  for (const auto& [key, value] : kv) {
    const auto num = [&] { return to_double(key, value); };
    if (key == "name") {
      sc.name = value;
    } else if (key == "servicer.a_m") {
      sc.servicer0.a = num();
    } else if (key == "servicer.e") {
      sc.servicer0.e = num();
    } else if (key == "servicer.inc_deg") {
      sc.servicer0.inc = num() * kDegToRad;
    } else if (key == "servicer.raan_deg") {
      sc.servicer0.raan = num() * kDegToRad;
    } else if (key == "servicer.argp_deg") {
      sc.servicer0.argp = num() * kDegToRad;
    } else if (key == "servicer.mean_anomaly_deg") {
      sc.servicer0.mean_anomaly = num() * kDegToRad;
    } else if (key == "roe.da_m") {
      roe_m(0) = num();
    } else if (key == "roe.dlambda_m") {
      roe_m(1) = num();
    } else if (key == "roe.dex_m") {
      roe_m(2) = num();
    } else if (key == "roe.dey_m") {
      roe_m(3) = num();
    } else if (key == "roe.dix_m") {
      roe_m(4) = num();
    } else if (key == "roe.diy_m") {
      roe_m(5) = num();
    } else if (key == "attitude.q0_wxyz") {
      std::istringstream in(value);
      if (!(in >> sc.q0.w >> sc.q0.v.x() >> sc.q0.v.y() >> sc.q0.v.z())) {
        throw std::runtime_error("scenario key '" + key +
                                 "': expected four numbers");
      }
    } else if (key == "attitude.omega0_deg_s") {
      sc.omega_t0 = to_vec3(key, value) * kDegToRad;
    } else if (key == "attitude.inertia_diag") {
      sc.inertia_diag = to_vec3(key, value);
    } else if (key == "run.n_orbits") {
      sc.n_orbits = num();
    } else if (key == "run.truth_dt_s") {
      sc.truth_dt = num();
    } else if (key == "run.meas_dt_s") {
      sc.meas_dt = num();
    } else if (key == "run.seed") {
      sc.seed = static_cast<std::uint64_t>(num());
    } else if (key == "run.model_consistent_truth") {
      if (value == "true" || value == "yes" || value == "on") {
        sc.model_consistent_truth = true;
      } else if (value == "false" || value == "no" || value == "off") {
        sc.model_consistent_truth = false;
      } else {
        sc.model_consistent_truth = num() != 0.0;
      }
    } else if (key == "truth_noise.accel_sigma") {
      sc.truth_noise.accel_sigma = num();
    } else if (key == "truth_noise.torque_sigma") {
      sc.truth_noise.torque_sigma = num();
    } else if (key == "emulator.preset") {
      if (value == "synthetic") {
        sc.emulator = relnav::meas::EmulatorConfig::synthetic();
      } else if (value == "lightbox_roe1") {
        sc.emulator = relnav::meas::EmulatorConfig::lightbox_roe1();
      } else if (value == "lightbox_roe2") {
        sc.emulator = relnav::meas::EmulatorConfig::lightbox_roe2();
      } else {
        throw std::runtime_error("unknown emulator preset: " + value);
      }
    } else {
      throw std::runtime_error("unknown scenario key: " + key);
    }
  }
  sc.roe0 = relnav::orbitmech::Roe::from_vec(roe_m / sc.servicer0.a);
}

void validate_scenario(const relnav::sim::Scenario& sc) {
  const auto fail = [](const std::string& what) {
    throw std::runtime_error("invalid scenario: " + what);
  };
  if (!(sc.servicer0.a > 0.0)) fail("semi-major axis must be positive");
  if (!(sc.servicer0.e >= 0.0 && sc.servicer0.e < 1.0)) {
    fail("eccentricity must be in [0, 1)");
  }
  if (!(sc.n_orbits > 0.0)) fail("n_orbits must be positive");
  if (!(sc.truth_dt > 0.0)) fail("truth_dt_s must be positive");
  if (!(sc.meas_dt > 0.0)) fail("meas_dt_s must be positive");
  if (!(sc.inertia_diag.minCoeff() > 0.0)) {
    fail("inertia diagonal must be positive");
  }
  if (!(sc.q0.norm() > 0.0)) fail("q0 must be nonzero");
  if (!(sc.truth_noise.accel_sigma >= 0.0) ||
      !(sc.truth_noise.torque_sigma >= 0.0)) {
    fail("truth noise sigmas must be nonnegative");
  }
}

std::string resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("RELNAV_OUT_DIR");
      env != nullptr && env[0] != '\0') {
    return env;
  }
  return "out";
}

// Attitude process-noise spectral densities are torque densities
// internally ((N m)^2 s); the angular-accel convention divides out the
// squared principal inertias, so converting back multiplies them in.
Vec3 to_torque_psd(const Vec3& values, const std::string& units,
                   const Vec3& inertia_diag) {
  if (units == "torque") return values;
  return values.cwiseProduct(inertia_diag.cwiseAbs2());
}

// Shared flags for the subcommands that run the filter.
struct RunFlags {
  std::string preset = "roe1";
  std::string scenario_file;
  std::string asnc = "on";
  std::optional<double> q0;
  std::optional<std::uint64_t> seed;
  std::optional<double> orbits;
  std::optional<double> pose_scale;
  std::string gating = "on";
  std::optional<int> window;
  std::string att_units = "torque";
  std::vector<double> att_psd_lower;
  std::vector<double> att_psd_upper;
  std::string out_dir;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--preset", f.preset, "Scenario preset")
      ->check(CLI::IsMember(relnav::sim::preset_names()));
  cmd->add_option("--scenario", f.scenario_file,
                  "Scenario file with key = value overrides");
  cmd->add_option("--asnc", f.asnc, "Adaptive process noise")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--q0", f.q0,
                  "Static process-noise floor ((a*droe m)^2 per step for "
                  "the orbit block; rad^2 and (rad/s)^2 for attitude)");
  cmd->add_option("--seed", f.seed, "RNG seed");
  cmd->add_option("--orbits", f.orbits, "Run duration in orbits");
  cmd->add_option("--pose-scale", f.pose_scale,
                  "Multiplier on the pose-head measurement covariance");
  cmd->add_option("--gating", f.gating, "Innovation gating")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--window", f.window, "Adaptation window length");
  cmd->add_option("--att-noise-units", f.att_units,
                  "Units of --att-psd-* values: torque-PSD ((N m)^2 s) or "
                  "angular-accel-PSD ((rad/s^2)^2 s)")
      ->check(CLI::IsMember({"torque", "angular-accel"}));
  cmd->add_option("--att-psd-lower", f.att_psd_lower,
                  "Lower bounds (3 values) for the attitude PSD fit")
      ->expected(3);
  cmd->add_option("--att-psd-upper", f.att_psd_upper,
                  "Upper bounds (3 values) for the attitude PSD fit")
      ->expected(3);
  cmd->add_option("--out", f.out_dir,
                  "Output directory (default $RELNAV_OUT_DIR, else ./out)");
}

relnav::sim::Scenario build_scenario(const RunFlags& f) {
  relnav::sim::Scenario sc = relnav::sim::scenario_by_name(f.preset);
  if (!f.scenario_file.empty()) apply_scenario_file(sc, f.scenario_file);
  if (f.seed) sc.seed = *f.seed;
  if (f.orbits) sc.n_orbits = *f.orbits;
  validate_scenario(sc);
  return sc;
}

relnav::sim::FilterConfig build_config(const RunFlags& f,
                                       const relnav::sim::Scenario& sc) {
  relnav::sim::FilterConfig cfg;
  cfg.asnc = f.asnc == "on";
  cfg.params.gating_enabled = f.gating == "on";
  if (f.q0) cfg.q0_scalar = *f.q0;
  if (f.pose_scale) cfg.r_config.pose_scale = *f.pose_scale;
  if (f.window) cfg.n_window = *f.window;
  if (!f.att_psd_lower.empty()) {
    cfg.bounds_attitude.lower = to_torque_psd(
        Vec3(f.att_psd_lower[0], f.att_psd_lower[1], f.att_psd_lower[2]),
        f.att_units, sc.inertia_diag);
  }
  if (!f.att_psd_upper.empty()) {
    cfg.bounds_attitude.upper = to_torque_psd(
        Vec3(f.att_psd_upper[0], f.att_psd_upper[1], f.att_psd_upper[2]),
        f.att_units, sc.inertia_diag);
  }
  return cfg;
}

int cmd_run(const RunFlags& f) {
  const relnav::sim::Scenario sc = build_scenario(f);
  const relnav::sim::FilterConfig cfg = build_config(f, sc);
  const relnav::sim::RunResult run = relnav::sim::run_scenario(sc, cfg);

  const std::string dir = resolve_out_dir(f.out_dir);
  const std::string csv_path = dir + "/" + sc.name + "_run.csv";
  const std::string json_path = dir + "/" + sc.name + "_summary.json";
  relnav::sim::write_file(csv_path, relnav::sim::run_csv(run));
  relnav::sim::write_file(json_path,
                          relnav::sim::run_summary_json(sc, cfg, run));

  const relnav::sim::WindowStats& w = run.metrics.second_orbit;
  std::printf("scenario %s: %zu epochs, gate accept %.1f%%%s\n",
              sc.name.c_str(), run.records.size(),
              100.0 * run.metrics.gate_accept_rate,
              run.metrics.diverged ? " [DIVERGED]" : "");
  if (w.epochs > 0) {
    std::printf(
        "second orbit: e_t %.4f m, e_q %.4f deg, lateral %.4f m, axial "
        "%.4f m\n",
        w.mean_e_t, w.mean_e_q_deg, w.mean_lateral, w.mean_axial);
  }
  std::printf("wrote %s\nwrote %s\n", csv_path.c_str(), json_path.c_str());
  return run.metrics.diverged ? 1 : 0;
}

int cmd_mc(const RunFlags& f, int runs, const std::string& noise) {
  const relnav::sim::Scenario sc = build_scenario(f);
  const relnav::sim::FilterConfig cfg = build_config(f, sc);
  const relnav::sim::NavNoise nav = noise == "none"
                                        ? relnav::sim::NavNoise{}
                                        : relnav::sim::NavNoise::from_name(noise);

  const relnav::sim::McSummary mc =
      relnav::sim::monte_carlo(sc, cfg, runs, nav);

  const std::string dir = resolve_out_dir(f.out_dir);
  const std::string json_path = dir + "/" + sc.name + "_mc.json";
  relnav::sim::write_file(json_path,
                          relnav::sim::mc_summary_json(sc, cfg, nav, mc));

  std::printf("%d runs (%s noise): %d diverged, mean second-orbit e_pose "
              "%.5f, worst %.5f\n",
              runs, noise.c_str(), mc.diverged_runs,
              mc.mean_second_orbit.mean_e_pose, mc.worst_e_pose);
  std::printf("wrote %s\n", json_path.c_str());
  return mc.diverged_runs > 0 ? 1 : 0;
}

int cmd_sweep(const RunFlags& f, const std::vector<double>& floors) {
  const relnav::sim::Scenario sc = build_scenario(f);
  std::mt19937_64 rng_truth(relnav::sim::derive_seed(sc.seed, 0, 0));
  const relnav::sim::Truth truth = relnav::sim::run_truth(sc, rng_truth);
  const std::uint64_t meas_seed = relnav::sim::derive_seed(sc.seed, 0, 1);

  nlohmann::json rows = nlohmann::json::array();
  for (bool adaptive : {true, false}) {
    for (double q0 : floors) {
      relnav::sim::FilterConfig cfg = build_config(f, sc);
      cfg.asnc = adaptive;
      cfg.q0_scalar = q0;
      const relnav::sim::RunResult run =
          relnav::sim::run_filter(sc, truth, cfg, meas_seed);
      rows.push_back({{"asnc", adaptive},
                      {"q0", q0},
                      {"diverged", run.metrics.diverged},
                      {"second_orbit_mean_e_pose",
                       run.metrics.second_orbit.mean_e_pose},
                      {"second_orbit_mean_e_t_m",
                       run.metrics.second_orbit.mean_e_t},
                      {"second_orbit_mean_e_q_deg",
                       run.metrics.second_orbit.mean_e_q_deg}});
      std::printf("asnc %-3s q0 %-8.1e e_pose %.5f%s\n",
                  adaptive ? "on" : "off", q0,
                  run.metrics.second_orbit.mean_e_pose,
                  run.metrics.diverged ? " [DIVERGED]" : "");
    }
  }
  nlohmann::json j;
  j["scenario"] = sc.name;
  j["seed"] = sc.seed;
  j["rows"] = rows;

  const std::string dir = resolve_out_dir(f.out_dir);
  const std::string json_path = dir + "/" + sc.name + "_sweep.json";
  relnav::sim::write_file(json_path, j.dump(2) + "\n");
  std::printf("wrote %s\n", json_path.c_str());
  return 0;
}

// Numerical self-checks against independent quadrature / finite-difference
// references, mirroring the heavier acceptance suite at a quick cadence.
int cmd_verify() {
  int failures = 0;
  const auto report = [&failures](const char* name, bool pass, double err,
                                  double tol) {
    std::printf("%s  %-42s max rel err %.2e (tol %.0e)\n",
                pass ? "PASS" : "FAIL", name, err, tol);
    if (!pass) ++failures;
  };

  {  // Closed-form time integrals vs trapezoid quadrature.
    double worst = 0.0;
    for (double w1 : {0.0, 1e-3, 0.05, 1.0}) {
      for (double w2 : {0.0, 1e-3, 0.05, 1.0}) {
        for (double dt : {0.5, 5.0}) {
          const auto closed = relnav::procnoise::zeta_set(w1, w2, dt);
          const auto quad = oracles::zeta_quadrature(w1, w2, dt, 50001);
          const std::array<std::pair<double, double>, 18> pairs = {{
              {closed.c1, quad.c1},     {closed.s1, quad.s1},
              {closed.tc1, quad.tc1},   {closed.ts1, quad.ts1},
              {closed.c1c1, quad.c1c1}, {closed.s1s1, quad.s1s1},
              {closed.c1s1, quad.c1s1}, {closed.c2, quad.c2},
              {closed.s2, quad.s2},     {closed.tc2, quad.tc2},
              {closed.ts2, quad.ts2},   {closed.c2c2, quad.c2c2},
              {closed.s2s2, quad.s2s2}, {closed.c2s2, quad.c2s2},
              {closed.c1c2, quad.c1c2}, {closed.c1s2, quad.c1s2},
              {closed.s1c2, quad.s1c2}, {closed.s1s2, quad.s1s2},
          }};
          for (const auto& [got, ref] : pairs) {
            worst = std::max(worst, std::abs(got - ref) /
                                        std::max(std::abs(ref), 1e-300));
          }
        }
      }
    }
    report("time-integral closed forms vs quadrature", worst < 1e-8, worst,
           1e-8);
  }

  {  // Maneuver sensitivity matrix vs central finite differences.
    relnav::orbitmech::KeplerianElements k;
    k.a = 7078135.0;
    k.e = 0.001;
    k.inc = 98.2 * kDegToRad;
    k.raan = 189.9 * kDegToRad;
    k.argp = 0.0;
    k.mean_anomaly = 0.0;
    double worst = 0.0;
    for (double t : {0.0, 1500.0}) {
      const auto eq = relnav::orbitmech::kepler_to_equinoctial(
          relnav::orbitmech::propagate_two_body(k, t));
      const auto analytic = relnav::orbitmech::gve_gamma(eq);
      const auto fd = oracles::gve_finite_difference(eq, 1e-2);
      worst = std::max(worst, (analytic - fd).norm() / fd.norm());
    }
    report("maneuver sensitivities vs finite differences", worst < 1e-6,
           worst, 1e-6);
  }

  {  // Attitude noise-shape blocks vs trapezoid quadrature.
    const relnav::attdyn::InertiaMatrix inertia(Vec3(2.69, 3.46, 3.11));
    double worst = 0.0;
    const std::array<std::pair<Vec3, Vec3>, 2> pairs = {{
        {Vec3(0.0175, 0.0, 0.0), Vec3(0.0011, 0.0, 0.0)},
        {Vec3(0.01, -0.02, 0.015), Vec3(0.001, 0.002, -0.0005)},
    }};
    for (const auto& [w1, w2] : pairs) {
      const auto closed = relnav::procnoise::attitude_X(w1, w2, inertia, 5.0);
      const auto quad =
          oracles::attitude_X_quadrature(w1, w2, inertia, 5.0, 20000);
      for (int i = 0; i < 3; ++i) {
        worst = std::max(worst, (closed[i] - quad[i]).norm() /
                                    std::max(quad[i].norm(), 1e-300));
      }
    }
    report("attitude noise shapes vs quadrature", worst < 1e-8, worst, 1e-8);
  }

  std::printf("verify: %d/3 suites passed\n", 3 - failures);
  return failures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relative-navigation scenario runner"};
  app.require_subcommand(1);

  RunFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "Single closed-loop run");
  add_run_flags(run, run_flags);

  RunFlags mc_flags;
  int mc_runs = 0;
  std::string mc_noise = "moderate";
  CLI::App* mc = app.add_subcommand("mc", "Monte Carlo batch");
  add_run_flags(mc, mc_flags);
  mc->add_option("--runs", mc_runs, "Number of runs")
      ->required()
      ->check(CLI::PositiveNumber);
  mc->add_option("--noise", mc_noise, "Servicer navigation-noise level")
      ->check(CLI::IsMember({"moderate", "conservative", "none"}));

  RunFlags sweep_flags;
  sweep_flags.preset = "sweep";
  std::vector<double> sweep_floors = {1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4};
  CLI::App* sweep =
      app.add_subcommand("sweep", "Noise-floor sweep, adaptive vs static");
  add_run_flags(sweep, sweep_flags);
  sweep->add_option("--floors", sweep_floors,
                    "Noise-floor values to sweep over");

  CLI::App* verify =
      app.add_subcommand("verify", "Numerical self-checks vs references");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (mc->parsed()) return cmd_mc(mc_flags, mc_runs, mc_noise);
    if (sweep->parsed()) return cmd_sweep(sweep_flags, sweep_floors);
    if (verify->parsed()) return cmd_verify();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
