#include "relnav/attdyn.hpp"

#include <cmath>

namespace relnav::attdyn {

namespace {

using attmath::skew;

/// Packed derivative of the joint relative state.
struct RelDeriv {
  Eigen::Vector4d qdot;
  Vec3 wdot;
};

RelDeriv rel_deriv(const Quaternion& q, const Vec3& omega,
                   const ServicerAttitudeFeed& feed,
                   const InertiaMatrix& inertia) {
  // q_{T/S} follows the rate of the target frame relative to the servicer,
  // which is the negative of the stored omega_{S/T}^T.
  const AttitudeState s{q, omega};
  return RelDeriv{quat_rate(q, -omega),
                  rel_ang_accel(s, feed, inertia, Vec3::Zero())};
}

}  // namespace

InertiaMatrix::InertiaMatrix(const Vec3& principal_moments)
    : diag_(principal_moments) {
  if (!(diag_.minCoeff() > 0.0)) {
    throw std::invalid_argument("inertia: principal moments must be positive");
  }
  for (int i = 0; i < 3; ++i) {
    const double others = diag_.sum() - diag_(i);
    if (diag_(i) > others * (1.0 + 1e-12)) {
      throw std::invalid_argument(
          "inertia: each principal moment must not exceed the sum of the "
          "other two");
    }
  }
}

Eigen::Vector4d quat_rate(const Quaternion& q, const Vec3& omega_body) {
  // qdot = 1/2 Omega(w) q with Omega(w) = [[0, -w'], [w, -[w]x]].
  Eigen::Vector4d qd;
  qd(0) = -0.5 * omega_body.dot(q.v);
  qd.tail<3>() = 0.5 * (q.w * omega_body - omega_body.cross(q.v));
  return qd;
}

Vec3 rel_ang_accel(const AttitudeState& state, const ServicerAttitudeFeed& feed,
                   const InertiaMatrix& inertia, const Vec3& m_t) {
  const Eigen::Matrix3d r_ts = attmath::quat_to_dcm(state.q);
  const Vec3 omega_t = r_ts * feed.omega - state.omega;  // omega_T^T
  const Vec3 euler_accel =
      inertia.apply_inverse(m_t - omega_t.cross(inertia.apply(omega_t)));
  return r_ts * feed.omega_dot - euler_accel - omega_t.cross(state.omega);
}

AttitudeState rk4_attitude_step(const AttitudeState& state,
                                const ServicerAttitudeFeed& feed,
                                const InertiaMatrix& inertia, double dt) {
  const Eigen::Vector4d q0 = state.q.wxyz();
  const Vec3 w0 = state.omega;

  auto eval = [&](const Eigen::Vector4d& q, const Vec3& w) {
    return rel_deriv(Quaternion(q(0), q.tail<3>()), w, feed, inertia);
  };

  const RelDeriv k1 = eval(q0, w0);
  const RelDeriv k2 =
      eval(q0 + 0.5 * dt * k1.qdot, w0 + 0.5 * dt * k1.wdot);
  const RelDeriv k3 =
      eval(q0 + 0.5 * dt * k2.qdot, w0 + 0.5 * dt * k2.wdot);
  const RelDeriv k4 = eval(q0 + dt * k3.qdot, w0 + dt * k3.wdot);

  const Eigen::Vector4d q1 =
      q0 + (dt / 6.0) * (k1.qdot + 2.0 * k2.qdot + 2.0 * k3.qdot + k4.qdot);
  const Vec3 w1 =
      w0 + (dt / 6.0) * (k1.wdot + 2.0 * k2.wdot + 2.0 * k3.wdot + k4.wdot);

  return AttitudeState{Quaternion(q1(0), q1.tail<3>()).normalized(), w1};
}

std::pair<Quaternion, Vec3> propagate_rigid_body_truth(
    const Quaternion& q_abs, const Vec3& omega_body,
    const InertiaMatrix& inertia, const Vec3& external_torque, double dt) {
  const Eigen::Vector4d q0 = q_abs.wxyz();

  auto wdot = [&](const Vec3& w) {
    return inertia.apply_inverse(external_torque -
                                 w.cross(inertia.apply(w)));
  };
  auto qdot = [&](const Eigen::Vector4d& q, const Vec3& w) {
    return quat_rate(Quaternion(q(0), q.tail<3>()), w);
  };

  const Eigen::Vector4d q_k1 = qdot(q0, omega_body);
  const Vec3 w_k1 = wdot(omega_body);
  const Eigen::Vector4d q_k2 =
      qdot(q0 + 0.5 * dt * q_k1, omega_body + 0.5 * dt * w_k1);
  const Vec3 w_k2 = wdot(omega_body + 0.5 * dt * w_k1);
  const Eigen::Vector4d q_k3 =
      qdot(q0 + 0.5 * dt * q_k2, omega_body + 0.5 * dt * w_k2);
  const Vec3 w_k3 = wdot(omega_body + 0.5 * dt * w_k2);
  const Eigen::Vector4d q_k4 = qdot(q0 + dt * q_k3, omega_body + dt * w_k3);
  const Vec3 w_k4 = wdot(omega_body + dt * w_k3);

  const Eigen::Vector4d q1 =
      q0 + (dt / 6.0) * (q_k1 + 2.0 * q_k2 + 2.0 * q_k3 + q_k4);
  const Vec3 w1 =
      omega_body + (dt / 6.0) * (w_k1 + 2.0 * w_k2 + 2.0 * w_k3 + w_k4);

  return {Quaternion(q1(0), q1.tail<3>()).normalized(), w1};
}

}  // namespace relnav::attdyn
