#include "relnav/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "relnav/procnoise.hpp"

namespace relnav::sim {

namespace {

using attmath::quat_from_dcm;
using attmath::quat_mul;
using attmath::quat_to_dcm;
using attmath::rodrigues_exp;
using attmath::Mat3;
using orbitmech::CartesianState;
using orbitmech::EquinoctialElements;
using orbitmech::KeplerianElements;
using orbitmech::Roe;

constexpr double kDegToRad = M_PI / 180.0;
constexpr double kArcsecToRad = M_PI / (180.0 * 3600.0);

double standard_normal(std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  return d(rng);
}

Vec3 gaussian_vec3(std::mt19937_64& rng, double sigma) {
  return Vec3(sigma * standard_normal(rng), sigma * standard_normal(rng),
              sigma * standard_normal(rng));
}

/// Servicer body rates in the nadir/along-track hold: the body frame
/// tracks the RTN axes, so the body rate is the orbit rate about the
/// orbit normal, mapped through the mounting.
attdyn::ServicerAttitudeFeed servicer_feed(const KeplerianElements& k,
                                           const Mat3& r_s_rtn) {
  const double e = k.e;
  const double big_e = orbitmech::solve_kepler(k.mean_anomaly, e);
  const double r = k.a * (1.0 - e * std::cos(big_e));
  const double p = k.a * (1.0 - e * e);
  const double h = std::sqrt(orbitmech::kMu * p);
  const double eta = std::sqrt(1.0 - e * e);
  const double snu = eta * std::sin(big_e) / (1.0 - e * std::cos(big_e));
  const double theta_dot = h / (r * r);
  const double r_dot = (orbitmech::kMu / h) * e * snu;
  const double theta_ddot = -2.0 * r_dot * theta_dot / r;

  attdyn::ServicerAttitudeFeed feed;
  feed.omega = r_s_rtn * Vec3(0.0, 0.0, theta_dot);
  feed.omega_dot = r_s_rtn * Vec3(0.0, 0.0, theta_ddot);
  return feed;
}

/// Feed recomputed from an (inertial) servicer state, for perturbed
/// navigation data.
attdyn::ServicerAttitudeFeed feed_from_cartesian(const CartesianState& s,
                                                 const Mat3& r_s_rtn) {
  const double r = s.r.norm();
  const Vec3 hv = s.r.cross(s.v);
  const double h = hv.norm();
  const double theta_dot = h / (r * r);
  const double r_dot = s.r.dot(s.v) / r;
  const double theta_ddot = -2.0 * r_dot * theta_dot / r;
  attdyn::ServicerAttitudeFeed feed;
  feed.omega = r_s_rtn * Vec3(0.0, 0.0, theta_dot);
  feed.omega_dot = r_s_rtn * Vec3(0.0, 0.0, theta_ddot);
  return feed;
}

KeplerianElements table_orbit() {
  KeplerianElements k;
  k.a = 7078135.0;
  k.e = 0.001;
  k.inc = 98.2 * kDegToRad;
  k.raan = 189.9 * kDegToRad;
  k.argp = 0.0;
  k.mean_anomaly = 0.0;
  return k;
}

Roe roe_from_meters(double a, double da_m, double dl_m, double dex_m,
                    double dey_m, double dix_m, double diy_m) {
  return Roe{da_m / a, dl_m / a, dex_m / a, dey_m / a, dix_m / a, diy_m / a};
}

Scenario base_scenario() {
  Scenario s;
  s.servicer0 = table_orbit();
  s.q0 = Quaternion{1.0 / std::sqrt(2.0), Vec3(1.0 / std::sqrt(2.0), 0.0, 0.0)};
  s.inertia_diag = Vec3(2.69, 3.46, 3.11);
  s.emulator = meas::EmulatorConfig::synthetic();
  return s;
}

Mat12 floor_process_noise(double q0_scalar, double a) {
  Vec12 d;
  d.head<6>().setConstant(q0_scalar / (a * a));
  d.tail<6>().setConstant(q0_scalar);
  return d.asDiagonal();
}

struct PerturbedContext {
  ukf::ServicerContext ctx;
  Mat3 r_s_rtn;
};

/// Servicer data as the estimator sees it at one epoch: exact when nav
/// is null, otherwise corrupted by one navigation-error draw.
PerturbedContext estimator_context(const TruthSample& sample,
                                   const Mat3& r_s_rtn, const NavNoise* nav,
                                   std::mt19937_64* rng) {
  PerturbedContext out;
  out.ctx.elements = sample.servicer;
  out.ctx.feed = sample.feed;
  out.r_s_rtn = r_s_rtn;
  if (nav == nullptr) return out;

  CartesianState cart = orbitmech::cartesian_from_kepler(
      orbitmech::equinoctial_to_kepler(sample.servicer));
  cart.r += gaussian_vec3(*rng, nav->pos_sigma);
  cart.v += gaussian_vec3(*rng, nav->vel_sigma);
  out.ctx.elements =
      orbitmech::kepler_to_equinoctial(orbitmech::kepler_from_cartesian(cart));
  out.ctx.feed = feed_from_cartesian(cart, r_s_rtn);
  out.ctx.feed.omega += gaussian_vec3(*rng, nav->rate_sigma);
  out.r_s_rtn = r_s_rtn * rodrigues_exp(gaussian_vec3(*rng, nav->att_sigma));
  return out;
}

WindowStats window_stats(const std::vector<EpochRecord>& records,
                         double t_min) {
  WindowStats w;
  double sq_t = 0.0;
  double sq_q = 0.0;
  for (const EpochRecord& r : records) {
    if (r.t < t_min) continue;
    ++w.epochs;
    w.mean_e_t += r.e_t;
    w.mean_e_q_deg += r.e_q_rad / kDegToRad;
    w.mean_e_pose += r.e_pose;
    w.mean_axial += r.e_axial;
    w.mean_lateral += r.e_lateral;
    w.mean_e_v += r.e_v;
    w.mean_roll_deg += std::abs(r.att_err_deg.x());
    w.mean_pitch_deg += std::abs(r.att_err_deg.y());
    w.mean_yaw_deg += std::abs(r.att_err_deg.z());
    w.mean_nees += r.nees;
    sq_t += r.e_t * r.e_t;
    const double qd = r.e_q_rad / kDegToRad;
    sq_q += qd * qd;
  }
  if (w.epochs > 0) {
    const double n = w.epochs;
    w.mean_e_t /= n;
    w.mean_e_q_deg /= n;
    w.mean_e_pose /= n;
    w.mean_axial /= n;
    w.mean_lateral /= n;
    w.mean_e_v /= n;
    w.mean_roll_deg /= n;
    w.mean_pitch_deg /= n;
    w.mean_yaw_deg /= n;
    w.mean_nees /= n;
    w.rms_e_t = std::sqrt(sq_t / n);
    w.rms_e_q_deg = std::sqrt(sq_q / n);
  }
  return w;
}

/// Rotation vector of the left error rotation between two attitudes,
/// i.e. the axis-angle of q_a * conj(q_b).
Vec3 error_rotation_vector(const Quaternion& a, const Quaternion& b) {
  const Quaternion err = quat_mul(a, b.conjugate());
  const Vec3 p = attmath::min_norm_mrp(err);
  const double n = p.norm();
  if (n < 1e-300) return Vec3::Zero();
  return (4.0 * std::atan(n / 4.0) / n) * p;
}

bool finite(const Vec12& v) { return v.allFinite(); }

}  // namespace

Scenario preset_roe1() {
  Scenario s = base_scenario();
  s.name = "roe1";
  s.roe0 = roe_from_meters(s.servicer0.a, 0.0, -8.0, 0.0, 0.0, 0.0, 0.0);
  s.omega_t0 = Vec3(1.0, 0.0, 0.0) * kDegToRad;
  return s;
}

Scenario preset_roe2() {
  Scenario s = base_scenario();
  s.name = "roe2";
  s.roe0 = roe_from_meters(s.servicer0.a, -0.250, -8.1732, 0.0257, -0.1476,
                           -0.030, 0.1724);
  s.omega_t0 = Vec3(0.0, 0.4, -0.6) * kDegToRad;
  return s;
}

Scenario preset_roe1_lightbox() {
  Scenario s = preset_roe1();
  s.name = "roe1_lightbox";
  s.emulator = meas::EmulatorConfig::lightbox_roe1();
  return s;
}

Scenario preset_roe2_lightbox() {
  Scenario s = preset_roe2();
  s.name = "roe2_lightbox";
  s.emulator = meas::EmulatorConfig::lightbox_roe2();
  return s;
}

Scenario preset_consistency() {
  Scenario s = preset_roe1();
  s.name = "consistency";
  s.model_consistent_truth = true;
  s.truth_noise.accel_sigma = 0.0;
  s.truth_noise.torque_sigma = 0.0;
  return s;
}

Scenario preset_sweep() {
  Scenario s = preset_roe1();
  s.name = "sweep";
  s.truth_noise.accel_sigma = 1.5e-6;
  s.truth_noise.torque_sigma = 3.0e-5;
  return s;
}

Scenario scenario_by_name(const std::string& name) {
  if (name == "roe1") return preset_roe1();
  if (name == "roe2") return preset_roe2();
  if (name == "roe1_lightbox") return preset_roe1_lightbox();
  if (name == "roe2_lightbox") return preset_roe2_lightbox();
  if (name == "consistency") return preset_consistency();
  if (name == "sweep") return preset_sweep();
  throw std::invalid_argument("unknown scenario preset: " + name);
}

std::vector<std::string> preset_names() {
  return {"roe1", "roe2", "roe1_lightbox", "roe2_lightbox", "consistency",
          "sweep"};
}

NavNoise NavNoise::moderate() {
  NavNoise n;
  n.pos_sigma = 0.5;
  n.vel_sigma = 5e-4;
  n.att_sigma = 5.0 * kArcsecToRad;
  n.rate_sigma = 1.0 * kArcsecToRad;
  return n;
}

NavNoise NavNoise::conservative() {
  NavNoise n = moderate();
  n.pos_sigma *= 20.0;
  n.vel_sigma *= 20.0;
  n.att_sigma *= 20.0;
  n.rate_sigma *= 20.0;
  return n;
}

NavNoise NavNoise::from_name(const std::string& name) {
  if (name == "moderate") return moderate();
  if (name == "conservative") return conservative();
  throw std::invalid_argument("unknown noise level: " + name);
}

Truth run_truth(const Scenario& scenario, std::mt19937_64& rng) {
  if (scenario.truth_dt <= 0.0 || scenario.meas_dt <= 0.0) {
    throw std::invalid_argument("run_truth: step sizes must be positive");
  }
  const int stride = static_cast<int>(
      std::lround(scenario.meas_dt / scenario.truth_dt));
  if (stride < 1 ||
      std::abs(stride * scenario.truth_dt - scenario.meas_dt) > 1e-9) {
    throw std::invalid_argument(
        "run_truth: meas_dt must be an integer multiple of truth_dt");
  }

  Truth truth;
  truth.dt = scenario.truth_dt;
  truth.meas_stride = stride;
  truth.period = orbitmech::period(scenario.servicer0.a);

  const double duration = scenario.n_orbits * truth.period;
  const int n_samples = static_cast<int>(duration / scenario.truth_dt) + 1;
  truth.samples.resize(n_samples);

  const Mat3 r_s_rtn = ukf::servicer_mount_from_rtn();
  const attdyn::InertiaMatrix inertia(scenario.inertia_diag);

  if (scenario.model_consistent_truth) {
    // Truth follows the estimator's own propagation model.
    Roe roe = scenario.roe0;
    attdyn::AttitudeState att;
    const KeplerianElements k0 = scenario.servicer0;
    const attdyn::ServicerAttitudeFeed feed0 = servicer_feed(k0, r_s_rtn);
    att.q = scenario.q0.normalized();
    // Non-tumbling target: omega_T = 0, so the relative rate equals the
    // servicer rate seen from the target frame.
    att.omega = quat_to_dcm(att.q) * feed0.omega;

    attdyn::ServicerAttitudeFeed frozen = feed0;
    for (int s = 0; s < n_samples; ++s) {
      const double t = s * scenario.truth_dt;
      const KeplerianElements k =
          orbitmech::propagate_two_body(scenario.servicer0, t);
      const EquinoctialElements eq = orbitmech::kepler_to_equinoctial(k);

      TruthSample& out = truth.samples[s];
      out.t = t;
      out.servicer = eq;
      out.feed = servicer_feed(k, r_s_rtn);
      out.roe = roe;
      out.q_ts = att.q;
      out.omega_rel = att.omega;
      const orbitmech::Vec6 rtn = orbitmech::roe_to_rtn_map(eq) * roe.vec();
      out.t_body = r_s_rtn * rtn.head<3>();
      out.v_body = r_s_rtn * rtn.tail<3>();

      if (s % stride == 0) frozen = out.feed;  // frozen per macro interval
      roe = Roe::from_vec(orbitmech::stm_ns_roe(eq, scenario.truth_dt) *
                          roe.vec());
      att = attdyn::rk4_attitude_step(att, frozen, inertia, scenario.truth_dt);
    }
    return truth;
  }

  // Physical truth: independent two-body trajectories with stochastic
  // disturbances on the target, attitudes propagated as rigid bodies.
  const EquinoctialElements servicer_eq0 =
      orbitmech::kepler_to_equinoctial(scenario.servicer0);
  EquinoctialElements target_eq =
      orbitmech::apply_roe(servicer_eq0, scenario.roe0);

  const KeplerianElements k0 = scenario.servicer0;
  const CartesianState sc0 = orbitmech::cartesian_from_kepler(k0);
  const Mat3 r_si0 = r_s_rtn * orbitmech::rtn_axes(sc0);
  Quaternion q_ti = quat_mul(scenario.q0.normalized(), quat_from_dcm(r_si0));
  Vec3 omega_t = scenario.omega_t0;

  for (int s = 0; s < n_samples; ++s) {
    const double t = s * scenario.truth_dt;
    const KeplerianElements k =
        orbitmech::propagate_two_body(scenario.servicer0, t);
    const EquinoctialElements eq = orbitmech::kepler_to_equinoctial(k);
    const CartesianState sc = orbitmech::cartesian_from_kepler(k);
    const KeplerianElements kt = orbitmech::equinoctial_to_kepler(target_eq);
    const CartesianState tc = orbitmech::cartesian_from_kepler(kt);

    TruthSample& out = truth.samples[s];
    out.t = t;
    out.servicer = eq;
    out.feed = servicer_feed(k, r_s_rtn);
    out.roe = orbitmech::roe_from_pair(target_eq, eq);

    const Quaternion q_si = quat_from_dcm(r_s_rtn * orbitmech::rtn_axes(sc));
    out.q_ts = quat_mul(q_ti, q_si.conjugate()).normalized();
    const Vec3 omega_s_in_t = quat_to_dcm(out.q_ts) * out.feed.omega;
    out.omega_rel = omega_s_in_t - omega_t;

    const orbitmech::RtnState rel = orbitmech::relative_state_rtn(sc, tc);
    out.t_body = r_s_rtn * rel.position;
    out.v_body = r_s_rtn * rel.velocity;

    // Advance the target to the next sample: exact mean-longitude drift
    // plus an impulsive element kick from the accel disturbance, then a
    // rigid-body step under a constant torque disturbance.
    const Vec3 accel = gaussian_vec3(rng, scenario.truth_noise.accel_sigma);
    const Vec3 torque = gaussian_vec3(rng, scenario.truth_noise.torque_sigma);
    if (s + 1 < n_samples) {
      target_eq.lambda = orbitmech::wrap_angle(
          target_eq.lambda +
          orbitmech::mean_motion(target_eq.a) * scenario.truth_dt);
      const orbitmech::Vec6 kick =
          orbitmech::gve_gamma(target_eq) * (accel * scenario.truth_dt);
      target_eq.a += kick(0);
      target_eq.ex += kick(1);
      target_eq.ey += kick(2);
      target_eq.ix += kick(3);
      target_eq.iy += kick(4);
      target_eq.lambda = orbitmech::wrap_angle(target_eq.lambda + kick(5));

      const auto next = attdyn::propagate_rigid_body_truth(
          q_ti, omega_t, inertia, torque, scenario.truth_dt);
      q_ti = next.first;
      omega_t = next.second;
    }
  }
  return truth;
}

RunResult run_filter(const Scenario& scenario, const Truth& truth,
                     const FilterConfig& config, std::uint64_t meas_seed,
                     const NavNoise* nav, std::uint64_t nav_seed) {
  if (truth.samples.empty()) {
    throw std::invalid_argument("run_filter: empty truth");
  }
  RunResult run;
  run.scenario = scenario.name;

  std::mt19937_64 rng_meas(meas_seed);
  std::mt19937_64 rng_nav(nav_seed);

  const Mat3 r_s_rtn_true = ukf::servicer_mount_from_rtn();
  const attdyn::InertiaMatrix inertia(scenario.inertia_diag);
  const meas::CameraModel camera = meas::CameraModel::standard();
  const meas::KeypointSet keypoints = meas::default_target_keypoints();
  const Mat3 r_cs = quat_to_dcm(camera.q_cs);

  ukf::MeasurementModel model;
  model.camera = camera;
  model.keypoints = keypoints;
  model.r_config = config.r_config;

  const int stride = truth.meas_stride;
  const int n_epochs =
      (static_cast<int>(truth.samples.size()) - 1) / stride + 1;

  asnc::MatchWindow window(config.n_window);
  Mat12 q_process =
      floor_process_noise(config.q0_scalar, scenario.servicer0.a);
  bool asnc_active = false;

  // Epoch 0: initialize from the first frame.
  const TruthSample& first = truth.samples[0];
  PerturbedContext pc =
      estimator_context(first, r_s_rtn_true, nav, &rng_nav);
  model.r_s_rtn = pc.r_s_rtn;
  meas::MeasurementFrame frame =
      meas::emulate_cnn(first.t_body, first.q_ts, camera, keypoints,
                        scenario.emulator, rng_meas, first.t);
  ukf::FilterState state =
      ukf::initialize_filter(frame, model, pc.ctx, config.init);
  window.push(state.p, Mat12::Identity(), Vec12::Zero());

  auto record_epoch = [&](const TruthSample& sample,
                          const ukf::InnovationReport* report) {
    EpochRecord rec;
    rec.t = sample.t;
    rec.t_true = sample.t_body;
    rec.q_true = sample.q_ts;
    rec.omega_true = sample.omega_rel;
    rec.v_true = sample.v_body;

    const orbitmech::Vec6 rtn =
        orbitmech::roe_to_rtn_map(pc.ctx.elements) * state.roe.vec();
    rec.t_est = pc.r_s_rtn * rtn.head<3>();
    rec.v_est = pc.r_s_rtn * rtn.tail<3>();
    rec.q_est =
        quat_mul(attmath::quat_from_mrp(state.mrp), state.q_ref).normalized();
    rec.omega_est = state.omega;
    rec.roe_est = state.roe;

    rec.e_t = (rec.t_est - rec.t_true).norm();
    rec.e_q_rad = attmath::angle_between(rec.q_est, rec.q_true);
    const double range = std::max(rec.t_true.norm(), 1e-9);
    rec.e_pose = rec.e_t / range + rec.e_q_rad;
    const Vec3 e_cam = r_cs * (rec.t_est - rec.t_true);
    rec.e_axial = std::abs(e_cam.z());
    rec.e_lateral = std::hypot(e_cam.x(), e_cam.y());
    rec.e_v = (rec.v_est - rec.v_true).norm();
    rec.att_err_deg =
        error_rotation_vector(rec.q_est, rec.q_true) / kDegToRad;
    rec.nees = ukf::nees(state, sample.roe, sample.q_ts, sample.omega_rel);

    if (report != nullptr) {
      rec.groups_total = report->groups_total;
      rec.groups_accepted = report->groups_accepted;
      rec.all_rejected = report->all_rejected;
      rec.conditioning_rounds = report->conditioning_rounds;
    }
    rec.asnc_active = asnc_active;
    rec.p_diag = state.p.diagonal();
    rec.q_diag = q_process.diagonal();
    run.records.push_back(rec);
  };

  record_epoch(first, nullptr);

  bool aborted = false;
  for (int k = 1; k < n_epochs && !aborted; ++k) {
    const TruthSample& prev = truth.samples[(k - 1) * stride];
    const TruthSample& cur = truth.samples[k * stride];

    // Servicer data for this cycle: one navigation draw per epoch.
    const PerturbedContext pc_prop =
        estimator_context(prev, r_s_rtn_true, nav, &rng_nav);
    pc = estimator_context(cur, r_s_rtn_true, nav, &rng_nav);
    model.r_s_rtn = pc.r_s_rtn;

    const ukf::Prediction pred = ukf::time_update(
        state, pc_prop.ctx, inertia, q_process, scenario.meas_dt,
        config.params);

    frame = meas::emulate_cnn(cur.t_body, cur.q_ts, camera, keypoints,
                              scenario.emulator, rng_meas, cur.t);
    const ukf::UpdateResult upd =
        ukf::measurement_update(pred.state, frame, model, pc.ctx,
                                config.params);
    state = upd.state;

    window.push(state.p, pred.phi, upd.report.dx);
    run.metrics.groups_total += upd.report.groups_total;
    run.metrics.groups_accepted += upd.report.groups_accepted;

    if (config.asnc && window.full()) {
      const Vec3 w1 = state.omega;
      const Vec3 w2 = quat_to_dcm(state.q_ref) * pc.ctx.feed.omega;
      try {
        const auto mapping_att = procnoise::make_mapping(
            procnoise::attitude_X(w1, w2, inertia, scenario.meas_dt));
        const auto mapping_orb = procnoise::make_mapping(
            procnoise::roe_X(pc.ctx.elements, scenario.meas_dt));
        const asnc::AsncResult fit =
            asnc::asnc_update(window, mapping_orb, mapping_att,
                              config.bounds_orbit, config.bounds_attitude);
        q_process.setZero();
        q_process.topLeftCorner<6, 6>() = fit.q_orbit;
        q_process.bottomRightCorner<6, 6>() = fit.q_attitude;
        asnc_active = true;
      } catch (const asnc::RankDeficientMapping&) {
        // Keep the previous process noise when the fit is ill-posed.
      }
    }

    record_epoch(cur, &upd.report);

    if (!finite(state.vec()) || !state.p.allFinite()) {
      run.metrics.diverged = true;
      aborted = true;
    }
  }

  run.metrics.full = window_stats(run.records, 0.0);
  run.metrics.second_orbit = window_stats(run.records, truth.period);
  if (run.metrics.groups_total > 0) {
    run.metrics.gate_accept_rate =
        static_cast<double>(run.metrics.groups_accepted) /
        static_cast<double>(run.metrics.groups_total);
  }
  if (!run.metrics.diverged) {
    run.metrics.diverged = run.metrics.second_orbit.epochs > 0 &&
                           !(run.metrics.second_orbit.mean_e_t < 1e4);
  }
  return run;
}

RunResult run_scenario(const Scenario& scenario, const FilterConfig& config) {
  std::mt19937_64 rng_truth(derive_seed(scenario.seed, 0, 0));
  const Truth truth = run_truth(scenario, rng_truth);
  return run_filter(scenario, truth, config, derive_seed(scenario.seed, 0, 1));
}

double nees_in_interval(const RunResult& run, double lo, double hi,
                        double t_min) {
  int n = 0;
  int inside = 0;
  for (const EpochRecord& r : run.records) {
    if (r.t < t_min) continue;
    ++n;
    if (r.nees >= lo && r.nees <= hi) ++inside;
  }
  return n > 0 ? static_cast<double>(inside) / n : 0.0;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index,
                          std::uint64_t purpose) {
  // splitmix64 over the combined identifier.
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (2654435761ULL * index +
                                                    40503ULL * purpose + 1ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

McSummary monte_carlo(const Scenario& scenario, const FilterConfig& config,
                      int runs, const NavNoise& nav) {
  if (runs < 1) throw std::invalid_argument("monte_carlo: runs must be >= 1");

  auto one = [&](int i) {
    Scenario sc = scenario;
    std::mt19937_64 rng_truth(derive_seed(scenario.seed, i, 0));
    const Truth truth = run_truth(sc, rng_truth);
    const RunResult r =
        run_filter(sc, truth, config, derive_seed(scenario.seed, i, 1), &nav,
                   derive_seed(scenario.seed, i, 2));
    McRun mr;
    mr.index = i;
    mr.seed = derive_seed(scenario.seed, i, 1);
    mr.metrics = r.metrics;
    return mr;
  };

  const int workers = std::max(
      1, std::min(runs,
                  static_cast<int>(std::thread::hardware_concurrency())));
  McSummary out;
  out.runs.resize(runs);
  std::vector<std::future<McRun>> futures;
  int next = 0;
  int done = 0;
  futures.reserve(workers);
  // Simple bounded fan-out: issue up to `workers` runs at a time.
  while (done < runs) {
    while (next < runs &&
           static_cast<int>(futures.size()) < workers) {
      futures.push_back(std::async(std::launch::async, one, next));
      ++next;
    }
    for (auto& f : futures) {
      const McRun r = f.get();
      out.runs[r.index] = r;
      ++done;
    }
    futures.clear();
  }

  int counted = 0;
  for (const McRun& r : out.runs) {
    if (r.metrics.diverged) {
      ++out.diverged_runs;
      continue;
    }
    ++counted;
    const WindowStats& w = r.metrics.second_orbit;
    out.mean_second_orbit.mean_e_t += w.mean_e_t;
    out.mean_second_orbit.mean_e_q_deg += w.mean_e_q_deg;
    out.mean_second_orbit.mean_e_pose += w.mean_e_pose;
    out.mean_second_orbit.mean_axial += w.mean_axial;
    out.mean_second_orbit.mean_lateral += w.mean_lateral;
    out.mean_second_orbit.mean_nees += w.mean_nees;
    out.worst_e_pose = std::max(out.worst_e_pose, w.mean_e_pose);
  }
  if (counted > 0) {
    out.mean_second_orbit.epochs = counted;
    out.mean_second_orbit.mean_e_t /= counted;
    out.mean_second_orbit.mean_e_q_deg /= counted;
    out.mean_second_orbit.mean_e_pose /= counted;
    out.mean_second_orbit.mean_axial /= counted;
    out.mean_second_orbit.mean_lateral /= counted;
    out.mean_second_orbit.mean_nees /= counted;
  }
  return out;
}

namespace {

void append_csv(std::string& s, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  s += buf;
  s += ',';
}

}  // namespace

std::string run_csv(const RunResult& run) {
  std::string s =
      "t,"
      "t_true_x,t_true_y,t_true_z,q_true_w,q_true_x,q_true_y,q_true_z,"
      "omega_true_x,omega_true_y,omega_true_z,v_true_x,v_true_y,v_true_z,"
      "t_est_x,t_est_y,t_est_z,q_est_w,q_est_x,q_est_y,q_est_z,"
      "omega_est_x,omega_est_y,omega_est_z,v_est_x,v_est_y,v_est_z,"
      "roe_da,roe_dlambda,roe_dex,roe_dey,roe_dix,roe_diy,"
      "e_t,e_q_deg,e_pose,e_axial,e_lateral,e_v,"
      "e_roll_deg,e_pitch_deg,e_yaw_deg,nees,"
      "groups_total,groups_accepted,all_rejected,asnc_active,"
      "conditioning_rounds";
  for (int i = 0; i < 12; ++i) s += ",p_diag_" + std::to_string(i);
  for (int i = 0; i < 12; ++i) s += ",q_diag_" + std::to_string(i);
  s += '\n';

  for (const EpochRecord& r : run.records) {
    std::string line;
    append_csv(line, r.t);
    for (int i = 0; i < 3; ++i) append_csv(line, r.t_true(i));
    append_csv(line, r.q_true.w);
    for (int i = 0; i < 3; ++i) append_csv(line, r.q_true.v(i));
    for (int i = 0; i < 3; ++i) append_csv(line, r.omega_true(i));
    for (int i = 0; i < 3; ++i) append_csv(line, r.v_true(i));
    for (int i = 0; i < 3; ++i) append_csv(line, r.t_est(i));
    append_csv(line, r.q_est.w);
    for (int i = 0; i < 3; ++i) append_csv(line, r.q_est.v(i));
    for (int i = 0; i < 3; ++i) append_csv(line, r.omega_est(i));
    for (int i = 0; i < 3; ++i) append_csv(line, r.v_est(i));
    const orbitmech::Vec6 roe = r.roe_est.vec();
    for (int i = 0; i < 6; ++i) append_csv(line, roe(i));
    append_csv(line, r.e_t);
    append_csv(line, r.e_q_rad * 180.0 / M_PI);
    append_csv(line, r.e_pose);
    append_csv(line, r.e_axial);
    append_csv(line, r.e_lateral);
    append_csv(line, r.e_v);
    for (int i = 0; i < 3; ++i) append_csv(line, r.att_err_deg(i));
    append_csv(line, r.nees);
    line += std::to_string(r.groups_total) + ',';
    line += std::to_string(r.groups_accepted) + ',';
    line += std::string(r.all_rejected ? "1" : "0") + ',';
    line += std::string(r.asnc_active ? "1" : "0") + ',';
    line += std::to_string(r.conditioning_rounds);
    for (int i = 0; i < 12; ++i) {
      line += ',';
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", r.p_diag(i));
      line += buf;
    }
    for (int i = 0; i < 12; ++i) {
      line += ',';
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", r.q_diag(i));
      line += buf;
    }
    line += '\n';
    s += line;
  }
  return s;
}

namespace {

nlohmann::json stats_json(const WindowStats& w) {
  return nlohmann::json{{"epochs", w.epochs},
                        {"mean_e_t_m", w.mean_e_t},
                        {"mean_e_q_deg", w.mean_e_q_deg},
                        {"mean_e_pose", w.mean_e_pose},
                        {"mean_axial_m", w.mean_axial},
                        {"mean_lateral_m", w.mean_lateral},
                        {"mean_e_v_mps", w.mean_e_v},
                        {"mean_roll_deg", w.mean_roll_deg},
                        {"mean_pitch_deg", w.mean_pitch_deg},
                        {"mean_yaw_deg", w.mean_yaw_deg},
                        {"rms_e_t_m", w.rms_e_t},
                        {"rms_e_q_deg", w.rms_e_q_deg},
                        {"mean_nees", w.mean_nees}};
}

nlohmann::json config_json(const Scenario& scenario,
                           const FilterConfig& config) {
  return nlohmann::json{
      {"scenario", scenario.name},
      {"seed", scenario.seed},
      {"n_orbits", scenario.n_orbits},
      {"meas_dt_s", scenario.meas_dt},
      {"q0_scalar", config.q0_scalar},
      {"asnc", config.asnc},
      {"n_window", config.n_window},
      {"gating", config.params.gating_enabled},
      {"pose_scale", config.r_config.pose_scale}};
}

}  // namespace

std::string run_summary_json(const Scenario& scenario,
                             const FilterConfig& config,
                             const RunResult& run) {
  nlohmann::json j;
  j["config"] = config_json(scenario, config);
  j["metrics"] = {{"full", stats_json(run.metrics.full)},
                  {"second_orbit", stats_json(run.metrics.second_orbit)},
                  {"gate_accept_rate", run.metrics.gate_accept_rate},
                  {"groups_total", run.metrics.groups_total},
                  {"groups_accepted", run.metrics.groups_accepted},
                  {"diverged", run.metrics.diverged}};
  return j.dump(2) + "\n";
}

std::string mc_summary_json(const Scenario& scenario,
                            const FilterConfig& config, const NavNoise& nav,
                            const McSummary& mc) {
  nlohmann::json j;
  j["config"] = config_json(scenario, config);
  j["noise"] = {{"pos_sigma_m", nav.pos_sigma},
                {"vel_sigma_mps", nav.vel_sigma},
                {"att_sigma_rad", nav.att_sigma},
                {"rate_sigma_radps", nav.rate_sigma}};
  j["runs"] = nlohmann::json::array();
  for (const McRun& r : mc.runs) {
    j["runs"].push_back(
        {{"index", r.index},
         {"seed", r.seed},
         {"diverged", r.metrics.diverged},
         {"second_orbit", stats_json(r.metrics.second_orbit)},
         {"gate_accept_rate", r.metrics.gate_accept_rate}});
  }
  j["aggregate"] = {{"mean_second_orbit", stats_json(mc.mean_second_orbit)},
                    {"worst_e_pose", mc.worst_e_pose},
                    {"diverged_runs", mc.diverged_runs}};
  return j.dump(2) + "\n";
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::filesystem::create_directories(p.parent_path());
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace relnav::sim
