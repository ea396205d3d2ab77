#include "relnav/ukf.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace relnav::ukf {

namespace {

using attmath::min_norm_mrp;
using attmath::quat_from_mrp;
using attmath::quat_mul;
using attmath::quat_to_dcm;
using attmath::skew;

constexpr double kSubstep = 1.0;  // attitude integration substep [s]

Quaternion compose_error(const Mrp& mrp, const Quaternion& q_ref) {
  return quat_mul(quat_from_mrp(mrp), q_ref).normalized();
}

/// Attitude innovation coordinates of q about the central quaternion.
Mrp attitude_innovation(const Quaternion& q, const Quaternion& center) {
  return min_norm_mrp(quat_mul(q, center.conjugate()));
}

}  // namespace

double UkfParams::mean_weight(int i) const {
  const double l = lambda();
  if (i == 0) return l / (kStateDim + l);
  return 0.5 / (kStateDim + l);
}

double UkfParams::cov_weight(int i) const {
  const double l = lambda();
  if (i == 0) return l / (kStateDim + l) + 1.0 - alpha * alpha + beta;
  return 0.5 / (kStateDim + l);
}

Vec12 FilterState::vec() const {
  Vec12 x;
  x.head<6>() = roe.vec();
  x.segment<3>(6) = mrp;
  x.tail<3>() = omega;
  return x;
}

void FilterState::set_vec(const Vec12& x) {
  roe = orbitmech::Roe::from_vec(x.head<6>());
  mrp = x.segment<3>(6);
  omega = x.tail<3>();
}

SigmaPoints generate_sigma_points(const FilterState& state,
                                  const UkfParams& params) {
  const double scale = kStateDim + params.lambda();
  if (!(scale > 0.0)) {
    throw std::invalid_argument("sigma scaling (n + lambda) must be positive");
  }

  Mat12 p = 0.5 * (state.p + state.p.transpose());
  SigmaPoints out;
  Eigen::LLT<Mat12> llt(scale * p);
  double jitter = 1e-12 * p.trace() / kStateDim;
  while (llt.info() != Eigen::Success) {
    ++out.conditioning_rounds;
    p += jitter * Mat12::Identity();
    llt.compute(scale * p);
    jitter *= 10.0;
    if (out.conditioning_rounds > 200) {
      throw std::runtime_error("sigma points: covariance cannot be repaired");
    }
  }
  const Mat12 root = llt.matrixL();

  const Vec12 mean = state.vec();
  out.x[0] = mean;
  for (int i = 0; i < kStateDim; ++i) {
    out.x[1 + i] = mean + root.col(i);
    out.x[1 + kStateDim + i] = mean - root.col(i);
  }
  return out;
}

Mat12 linearized_phi(const FilterState& state, const ServicerContext& ctx,
                     double dt) {
  Mat12 phi = Mat12::Zero();
  phi.topLeftCorner<6, 6>() = orbitmech::stm_ns_roe(ctx.elements, dt);
  const Vec3 w1 = state.omega;
  const Vec3 w2 = quat_to_dcm(state.q_ref) * ctx.feed.omega;
  phi.block<3, 3>(6, 6) = attmath::rodrigues_exp(w1 * dt);
  phi.block<3, 3>(6, 9) = -procnoise::lambda1(w1, dt);
  phi.block<3, 3>(9, 9) = attmath::rodrigues_exp(-w2 * dt);
  return phi;
}

Prediction time_update(const FilterState& state, const ServicerContext& ctx,
                       const attdyn::InertiaMatrix& inertia,
                       const Mat12& q_process, double dt,
                       const UkfParams& params) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("time_update: dt must be positive");
  }
  const SigmaPoints sigma = generate_sigma_points(state, params);
  const orbitmech::Mat6 stm = orbitmech::stm_ns_roe(ctx.elements, dt);

  const int nsub = std::max(1, static_cast<int>(std::ceil(dt / kSubstep - 1e-9)));
  const double h = dt / nsub;

  std::array<Vec12, kNumSigma> prop;
  std::array<Quaternion, kNumSigma> q_prop;
  for (int i = 0; i < kNumSigma; ++i) {
    const Vec12& x = sigma.x[i];
    attdyn::AttitudeState att{compose_error(x.segment<3>(6), state.q_ref),
                              x.tail<3>()};
    for (int s = 0; s < nsub; ++s) {
      att = attdyn::rk4_attitude_step(att, ctx.feed, inertia, h);
    }
    q_prop[i] = att.q;
    prop[i].head<6>() = stm * x.head<6>();
    prop[i].tail<3>() = att.omega;
  }
  // Attitude deviations about the propagated central quaternion.
  for (int i = 0; i < kNumSigma; ++i) {
    prop[i].segment<3>(6) = attitude_innovation(q_prop[i], q_prop[0]);
  }

  Vec12 mean = Vec12::Zero();
  for (int i = 0; i < kNumSigma; ++i) {
    mean += params.mean_weight(i) * prop[i];
  }
  Mat12 cov = Mat12::Zero();
  for (int i = 0; i < kNumSigma; ++i) {
    const Vec12 d = prop[i] - mean;
    cov += params.cov_weight(i) * d * d.transpose();
  }
  cov += q_process;

  Prediction out;
  out.state.set_vec(mean);
  out.state.q_ref = q_prop[0];
  out.state.p = 0.5 * (cov + cov.transpose());
  out.phi = linearized_phi(state, ctx, dt);
  out.conditioning_rounds = sigma.conditioning_rounds;
  return out;
}

attmath::Mat3 servicer_mount_from_rtn() {
  attmath::Mat3 r;
  r << 0.0, 0.0, 1.0,
      -1.0, 0.0, 0.0,
       0.0, -1.0, 0.0;
  return r;
}

MeasurementModel::MeasurementModel()
    : camera(meas::CameraModel::standard()),
      keypoints(meas::default_target_keypoints()),
      r_config(),
      r_s_rtn(servicer_mount_from_rtn()) {}

UpdateResult measurement_update(const FilterState& predicted,
                                const meas::MeasurementFrame& frame,
                                const MeasurementModel& model,
                                const ServicerContext& ctx,
                                const UkfParams& params) {
  UpdateResult out;
  out.state = predicted;

  const SigmaPoints sigma = generate_sigma_points(predicted, params);
  out.report.conditioning_rounds = sigma.conditioning_rounds;

  const orbitmech::Mat6 rtn_map = orbitmech::roe_to_rtn_map(ctx.elements);
  const attmath::Mat3 r_cs = quat_to_dcm(model.camera.q_cs);
  const int k_all = static_cast<int>(frame.keypoints.size());

  // Geometry per sigma point. A landmark participates only if the frame
  // carries it and every sigma point projects it in front of the camera.
  std::array<Vec3, kNumSigma> t_body;
  std::array<Quaternion, kNumSigma> q_pred;
  std::vector<std::vector<meas::ProjectedKeypoint>> px(kNumSigma);
  for (int i = 0; i < kNumSigma; ++i) {
    const Vec12& x = sigma.x[i];
    const orbitmech::Vec6 rtn = rtn_map * x.head<6>();
    t_body[i] = model.r_s_rtn * rtn.head<3>();
    q_pred[i] = compose_error(x.segment<3>(6), predicted.q_ref);
    const attmath::Mat3 r_ct = r_cs * quat_to_dcm(q_pred[i]).transpose();
    const Vec3 t_tc_c = r_cs * (t_body[i] - model.camera.t_cs_s);
    px[i] = meas::project_keypoints(r_ct, t_tc_c, model.camera,
                                    model.keypoints);
  }

  std::vector<int> used;
  const int k_model = static_cast<int>(model.keypoints.size());
  for (int j = 0; j < k_all && j < k_model; ++j) {
    if (!frame.keypoints[j].valid) continue;
    bool ok = true;
    for (int i = 0; i < kNumSigma && ok; ++i) ok = px[i][j].valid;
    if (ok) used.push_back(j);
  }

  const int ku = static_cast<int>(used.size());
  const int m = 2 * ku + 6;
  const Quaternion center = q_pred[0];

  Eigen::MatrixXd z(m, kNumSigma);
  for (int i = 0; i < kNumSigma; ++i) {
    for (int r = 0; r < ku; ++r) {
      z.block<2, 1>(2 * r, i) = px[i][used[r]].px;
    }
    z.block<3, 1>(2 * ku, i) = t_body[i];
    z.block<3, 1>(2 * ku + 3, i) = attitude_innovation(q_pred[i], center);
  }

  Eigen::VectorXd z_mean = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < kNumSigma; ++i) {
    z_mean += params.mean_weight(i) * z.col(i);
  }

  const Vec12 x_mean = predicted.vec();
  Eigen::MatrixXd pzz = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd pxz = Eigen::MatrixXd::Zero(kStateDim, m);
  for (int i = 0; i < kNumSigma; ++i) {
    const Eigen::VectorXd dz = z.col(i) - z_mean;
    const Vec12 dx = sigma.x[i] - x_mean;
    pzz += params.cov_weight(i) * dz * dz.transpose();
    pxz += params.cov_weight(i) * dx * dz.transpose();
  }

  // Measurement covariance rows for the participating landmarks plus the
  // pose head.
  const Eigen::MatrixXd r_full = meas::build_R(frame, model.r_config);
  Eigen::MatrixXd r_sel = Eigen::MatrixXd::Zero(m, m);
  for (int r = 0; r < ku; ++r) {
    r_sel.block<2, 2>(2 * r, 2 * r) =
        r_full.block<2, 2>(2 * used[r], 2 * used[r]);
  }
  r_sel.block<6, 6>(2 * ku, 2 * ku) =
      r_full.block<6, 6>(2 * k_all, 2 * k_all);

  const Eigen::MatrixXd s = pzz + r_sel;

  // Stacked measurement and innovation.
  Eigen::VectorXd y(m);
  for (int r = 0; r < ku; ++r) {
    y.segment<2>(2 * r) = frame.keypoints[used[r]].px;
  }
  y.segment<3>(2 * ku) = frame.t_e;
  y.segment<3>(2 * ku + 3) = attitude_innovation(frame.q_e, center);
  const Eigen::VectorXd innov = y - z_mean;

  // Per-group gating on the marginal blocks of the joint innovation
  // covariance.
  std::vector<int> rows_kept;
  auto gate_group = [&](int row0, int len, GateDecision::Kind kind,
                        int kp_index, double threshold) {
    GateDecision g;
    g.kind = kind;
    g.keypoint_index = kp_index;
    g.threshold = threshold;
    const Eigen::MatrixXd s_gg = s.block(row0, row0, len, len);
    const Eigen::VectorXd dy = innov.segment(row0, len);
    g.d2 = dy.dot(s_gg.ldlt().solve(dy));
    g.accepted = !params.gating_enabled || g.d2 <= threshold;
    if (g.accepted) {
      for (int r = 0; r < len; ++r) rows_kept.push_back(row0 + r);
      ++out.report.groups_accepted;
    }
    ++out.report.groups_total;
    out.report.groups.push_back(g);
  };

  for (int r = 0; r < ku; ++r) {
    gate_group(2 * r, 2, GateDecision::Kind::kKeypoint, used[r],
               params.gate_2dof);
  }
  gate_group(2 * ku, 3, GateDecision::Kind::kTranslation, -1,
             params.gate_3dof);
  gate_group(2 * ku + 3, 3, GateDecision::Kind::kAttitude, -1,
             params.gate_3dof);

  if (rows_kept.empty()) {
    out.report.all_rejected = true;
  } else {
    const int mr = static_cast<int>(rows_kept.size());
    Eigen::MatrixXd s_r(mr, mr);
    Eigen::MatrixXd pxz_r(kStateDim, mr);
    Eigen::VectorXd innov_r(mr);
    for (int a = 0; a < mr; ++a) {
      innov_r(a) = innov(rows_kept[a]);
      pxz_r.col(a) = pxz.col(rows_kept[a]);
      for (int b = 0; b < mr; ++b) {
        s_r(a, b) = s(rows_kept[a], rows_kept[b]);
      }
    }
    const Eigen::MatrixXd gain =
        s_r.ldlt().solve(pxz_r.transpose()).transpose();
    const Vec12 dx = gain * innov_r;
    out.report.dx = dx;
    out.state.set_vec(x_mean + dx);
    Mat12 p_post = predicted.p - gain * s_r * gain.transpose();
    out.state.p = 0.5 * (p_post + p_post.transpose());
  }

  // Fold the posterior attitude deviation into the reference and reset.
  out.state.q_ref = compose_error(out.state.mrp, predicted.q_ref);
  out.state.mrp.setZero();
  return out;
}

FilterState initialize_filter(const meas::MeasurementFrame& frame,
                              const MeasurementModel& model,
                              const ServicerContext& ctx,
                              const InitConfig& config) {
  FilterState state;
  const Vec3 t_hat = frame.t_e;
  const Quaternion q_hat = frame.q_e.normalized();

  // Co-rotation velocity model and frame changes into RTN.
  const Vec3 v_hat = ctx.feed.omega.cross(t_hat);
  const attmath::Mat3 r_sr = model.r_s_rtn;  // RTN -> body
  orbitmech::RtnState rel;
  rel.position = r_sr.transpose() * t_hat;
  rel.velocity = r_sr.transpose() * v_hat;
  state.roe = orbitmech::rtn_to_roe(rel, ctx.elements);

  state.q_ref = q_hat;
  state.mrp.setZero();
  state.omega = quat_to_dcm(q_hat) * ctx.feed.omega;  // non-tumbling target

  if (config.mode == InitConfig::Mode::kFixed) {
    state.p = config.p0_fixed;
    return state;
  }

  // Derived covariance: push the pose-head covariance through the
  // initialization chain.
  const meas::Mat6 c_pose = model.r_config.pose_scale * model.r_config.c_e_syn;
  const attmath::Mat3 c_t = c_pose.topLeftCorner<3, 3>();
  const attmath::Mat3 c_q = c_pose.bottomRightCorner<3, 3>();

  const attmath::Mat3 c_t_rtn = r_sr.transpose() * c_t * r_sr;
  const Vec3 omega_rtn = r_sr.transpose() * ctx.feed.omega;
  const attmath::Mat3 j_v = skew(omega_rtn);

  orbitmech::Mat6 c_tv = orbitmech::Mat6::Zero();
  c_tv.topLeftCorner<3, 3>() = c_t_rtn;
  c_tv.topRightCorner<3, 3>() = c_t_rtn * j_v.transpose();
  c_tv.bottomLeftCorner<3, 3>() = j_v * c_t_rtn;
  c_tv.bottomRightCorner<3, 3>() =
      j_v * c_t_rtn * j_v.transpose() +
      config.extra_vel_sigma * config.extra_vel_sigma *
          attmath::Mat3::Identity();

  const orbitmech::Mat6 b = orbitmech::roe_to_rtn_map(ctx.elements);
  const auto lu = b.partialPivLu();
  const orbitmech::Mat6 tmp = lu.solve(c_tv);
  orbitmech::Mat6 p_roe = lu.solve(tmp.transpose()).transpose();
  p_roe = 0.5 * (p_roe + p_roe.transpose());

  const attmath::Mat3 j_w = skew(state.omega);
  const attmath::Mat3 c_w = j_w * c_q * j_w.transpose() +
                            config.extra_omega_sigma *
                                config.extra_omega_sigma *
                                attmath::Mat3::Identity();

  state.p = Mat12::Zero();
  state.p.topLeftCorner<6, 6>() = p_roe;
  state.p.block<3, 3>(6, 6) = c_q;
  state.p.block<3, 3>(6, 9) = c_q * j_w.transpose();
  state.p.block<3, 3>(9, 6) = j_w * c_q;
  state.p.block<3, 3>(9, 9) = c_w;
  return state;
}

double nees(const FilterState& state, const orbitmech::Roe& roe_true,
            const Quaternion& q_true, const Vec3& omega_true) {
  Vec12 e;
  e.head<6>() = state.roe.vec() - roe_true.vec();
  const Quaternion q_est = compose_error(state.mrp, state.q_ref);
  // Estimate-minus-truth, like the other blocks: the covariance carries
  // rate/attitude cross terms, so a mixed sign convention here would flip
  // their apparent sign and inflate the quadratic form.
  e.segment<3>(6) = min_norm_mrp(quat_mul(q_est, q_true.conjugate()));
  e.tail<3>() = state.omega - omega_true;
  const Mat12 p = 0.5 * (state.p + state.p.transpose());
  return e.dot(p.ldlt().solve(e));
}

}  // namespace relnav::ukf
