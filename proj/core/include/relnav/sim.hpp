#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "relnav/asnc.hpp"
#include "relnav/attdyn.hpp"
#include "relnav/attmath.hpp"
#include "relnav/meas.hpp"
#include "relnav/orbitmech.hpp"
#include "relnav/ukf.hpp"

// Scenario definitions, truth generation, and the closed-loop estimation
// runner: emulated measurement frames against a truth trajectory, filter
// cycles with optional noise adaptation, error metrics, Monte Carlo
// batches, and CSV/JSON reporting.
namespace relnav::sim {

using attmath::Quaternion;
using attmath::Vec3;
using ukf::Mat12;
using ukf::Vec12;

/// Disturbance levels used when generating the truth trajectory.
struct TruthNoise {
  double accel_sigma{5e-8};   ///< target orbit accel noise, per RTN axis [m/s^2]
  double torque_sigma{1e-7};  ///< target torque noise, per body axis [N m]
};

/// One self-contained experiment definition.
struct Scenario {
  std::string name;
  orbitmech::KeplerianElements servicer0;  ///< servicer orbit at t = 0
  orbitmech::Roe roe0;                     ///< initial relative orbit
  Quaternion q0;                           ///< q_{T/S} at t = 0
  Vec3 omega_t0{Vec3::Zero()};  ///< target body rate at t = 0 [rad/s]
  Vec3 inertia_diag{Vec3::Ones()};  ///< target principal inertia [kg m^2]
  double n_orbits{2.0};
  double truth_dt{1.0};  ///< truth sampling step [s]
  double meas_dt{5.0};   ///< measurement cadence [s]
  meas::EmulatorConfig emulator;
  TruthNoise truth_noise;
  std::uint64_t seed{20260816};
  /// When set, the truth trajectory follows the filter's own propagation
  /// model exactly (transition-matrix orbit, macro-step attitude
  /// integration with the servicer feed frozen per measurement interval,
  /// no disturbances) and the relative position is taken from the linear
  /// orbit-to-position chain. Used for statistical consistency checks.
  bool model_consistent_truth{false};
};

/// Built-in scenarios; see scenario_by_name for the accepted names.
Scenario preset_roe1();
Scenario preset_roe2();
Scenario preset_roe1_lightbox();
Scenario preset_roe2_lightbox();
Scenario preset_consistency();
Scenario preset_sweep();

/// Lookup by name: roe1, roe2, roe1_lightbox, roe2_lightbox, consistency,
/// sweep. Throws std::invalid_argument for unknown names.
Scenario scenario_by_name(const std::string& name);
std::vector<std::string> preset_names();

/// One truth sample.
struct TruthSample {
  double t{0.0};
  orbitmech::EquinoctialElements servicer;  ///< osculating at t
  attdyn::ServicerAttitudeFeed feed;        ///< servicer body rates at t
  orbitmech::Roe roe;                       ///< true relative orbit
  Quaternion q_ts;                          ///< true q_{T/S}
  Vec3 omega_rel{Vec3::Zero()};             ///< true omega_{S/T}^T [rad/s]
  Vec3 t_body{Vec3::Zero()};  ///< target position, servicer body frame [m]
  Vec3 v_body{Vec3::Zero()};  ///< relative velocity, body frame [m/s]
};

struct Truth {
  std::vector<TruthSample> samples;  ///< every truth_dt, starting at t = 0
  double dt{1.0};
  int meas_stride{5};  ///< measurement epoch every this many samples
  double period{0.0};  ///< servicer orbital period [s]
};

/// Generate the truth trajectory for a scenario.
Truth run_truth(const Scenario& scenario, std::mt19937_64& rng);

/// Estimator configuration for a run.
struct FilterConfig {
  ukf::InitConfig init;
  ukf::UkfParams params;
  meas::RConfig r_config;
  /// Static per-step process-noise variance: the orbit block uses
  /// q0_scalar interpreted in (a * delta-alpha meters)^2 and is divided
  /// by the squared semi-major axis; the attitude blocks use it directly
  /// in rad^2 and (rad/s)^2.
  double q0_scalar{1e-7};
  bool asnc{true};
  int n_window{60};
  asnc::PsdBounds bounds_orbit;
  asnc::PsdBounds bounds_attitude;
};

/// Per-epoch navigation errors injected into the servicer data the
/// estimator consumes (the truth and the measurements are untouched).
struct NavNoise {
  double pos_sigma{0.0};   ///< inertial position, per axis [m]
  double vel_sigma{0.0};   ///< inertial velocity, per axis [m/s]
  double att_sigma{0.0};   ///< attitude knowledge, per axis [rad]
  double rate_sigma{0.0};  ///< body-rate knowledge, per axis [rad/s]

  static NavNoise moderate();
  static NavNoise conservative();  ///< 20x moderate
  /// "moderate" or "conservative".
  static NavNoise from_name(const std::string& name);
};

/// One measurement-epoch record of a run.
struct EpochRecord {
  double t{0.0};
  Vec3 t_true{Vec3::Zero()};
  Quaternion q_true;
  Vec3 omega_true{Vec3::Zero()};
  Vec3 v_true{Vec3::Zero()};  ///< relative velocity, servicer body [m/s]
  Vec3 t_est{Vec3::Zero()};
  Quaternion q_est;
  Vec3 omega_est{Vec3::Zero()};
  Vec3 v_est{Vec3::Zero()};
  orbitmech::Roe roe_est;
  double e_t{0.0};       ///< translation error norm [m]
  double e_q_rad{0.0};   ///< attitude error angle [rad]
  double e_pose{0.0};    ///< e_t / range + e_q [rad]
  double e_axial{0.0};    ///< |boresight component of translation error| [m]
  double e_lateral{0.0};  ///< in-image-plane translation error [m]
  double e_v{0.0};        ///< relative-velocity error norm [m/s]
  /// Attitude error rotation vector, target-frame components [deg]:
  /// per-axis (roll, pitch, yaw) decomposition of e_q.
  Vec3 att_err_deg{Vec3::Zero()};
  double nees{0.0};
  int groups_total{0};
  int groups_accepted{0};
  bool all_rejected{false};
  bool asnc_active{false};
  int conditioning_rounds{0};
  Vec12 p_diag{Vec12::Zero()};
  Vec12 q_diag{Vec12::Zero()};
};

/// Mean error statistics over a set of epochs.
struct WindowStats {
  int epochs{0};
  double mean_e_t{0.0};
  double mean_e_q_deg{0.0};
  double mean_e_pose{0.0};
  double mean_axial{0.0};
  double mean_lateral{0.0};
  double mean_e_v{0.0};      ///< mean relative-velocity error norm [m/s]
  double mean_roll_deg{0.0};   ///< mean |x component| of the attitude error
  double mean_pitch_deg{0.0};  ///< mean |y component|
  double mean_yaw_deg{0.0};    ///< mean |z component|
  double rms_e_t{0.0};
  double rms_e_q_deg{0.0};
  double mean_nees{0.0};
};

struct RunMetrics {
  WindowStats full;
  WindowStats second_orbit;  ///< epochs with t >= orbital period
  double gate_accept_rate{1.0};
  long groups_total{0};
  long groups_accepted{0};
  bool diverged{false};
};

struct RunResult {
  std::string scenario;
  std::vector<EpochRecord> records;
  RunMetrics metrics;
};

/// Closed-loop estimation against a generated truth. meas_seed drives
/// the measurement emulation; when nav is non-null, per-epoch servicer
/// navigation errors drawn from nav_seed corrupt the orbit, attitude
/// mounting, and body-rate data the estimator consumes.
RunResult run_filter(const Scenario& scenario, const Truth& truth,
                     const FilterConfig& config, std::uint64_t meas_seed,
                     const NavNoise* nav = nullptr,
                     std::uint64_t nav_seed = 0);

/// Truth generation plus filter run with seeds derived from the
/// scenario seed.
RunResult run_scenario(const Scenario& scenario, const FilterConfig& config);

/// Fraction of epochs (restricted to t >= t_min) whose normalized error
/// squared lies in [lo, hi].
double nees_in_interval(const RunResult& run, double lo, double hi,
                        double t_min = 0.0);

struct McRun {
  int index{0};
  std::uint64_t seed{0};
  RunMetrics metrics;
};

struct McSummary {
  std::vector<McRun> runs;
  WindowStats mean_second_orbit;  ///< averaged over non-diverged runs
  double worst_e_pose{0.0};
  int diverged_runs{0};
};

/// Monte Carlo batch: `runs` independent repetitions with per-run seeds
/// derived from the scenario seed, each with fresh truth disturbances,
/// measurement noise, and navigation errors. Runs execute in parallel;
/// results are deterministic for a fixed seed.
McSummary monte_carlo(const Scenario& scenario, const FilterConfig& config,
                      int runs, const NavNoise& nav);

/// Deterministic per-purpose stream seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index,
                          std::uint64_t purpose);

/// CSV serialization of a run (header + one row per epoch).
std::string run_csv(const RunResult& run);

/// JSON summaries (pretty-printed, stable field order).
std::string run_summary_json(const Scenario& scenario,
                             const FilterConfig& config, const RunResult& run);
std::string mc_summary_json(const Scenario& scenario,
                            const FilterConfig& config, const NavNoise& nav,
                            const McSummary& mc);

/// Write content to path, creating parent directories; throws
/// std::runtime_error on failure.
void write_file(const std::string& path, const std::string& content);

}  // namespace relnav::sim
