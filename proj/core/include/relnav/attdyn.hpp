#pragma once

#include <stdexcept>
#include <utility>

#include <Eigen/Core>

#include "relnav/attmath.hpp"

// Rigid-body and chaser-relative attitude dynamics.
//
// Conventions (shared with the rest of the library):
//  * q is scalar-first (w, x, y, z); quat_to_dcm(q_{B/A}) maps A-frame
//    coordinates to B-frame coordinates.
//  * The relative attitude state pairs q_{T/S} (target w.r.t. servicer)
//    with omega_{S/T}^T, the angular velocity of the servicer frame
//    relative to the target frame, expressed in target axes.
namespace relnav::attdyn {

using attmath::Quaternion;
using attmath::Vec3;

/// Diagonal inertia tensor of a rigid body, principal axes assumed aligned
/// with the body frame. Construction validates physical realizability:
/// all moments positive and each principal moment no larger than the sum
/// of the other two (triangle inequality).
class InertiaMatrix {
 public:
  explicit InertiaMatrix(const Vec3& principal_moments);

  const Vec3& diagonal() const { return diag_; }
  Eigen::Matrix3d matrix() const { return diag_.asDiagonal(); }
  Vec3 inverse_diagonal() const { return diag_.cwiseInverse(); }

  /// I * w
  Vec3 apply(const Vec3& w) const { return diag_.cwiseProduct(w); }
  /// I^-1 * w
  Vec3 apply_inverse(const Vec3& w) const { return w.cwiseQuotient(diag_); }

 private:
  Vec3 diag_;
};

/// Relative attitude state: q_{T/S} and omega_{S/T}^T [rad/s].
struct AttitudeState {
  Quaternion q;  ///< q_{T/S}
  Vec3 omega;    ///< omega_{S/T}^T [rad/s]
};

/// Servicer-side inputs to the relative dynamics, expressed in servicer
/// body axes and treated as known (fed by the absolute navigation system).
struct ServicerAttitudeFeed {
  Vec3 omega{Vec3::Zero()};      ///< omega_S^S [rad/s]
  Vec3 omega_dot{Vec3::Zero()};  ///< d/dt omega_S^S [rad/s^2]
};

/// Quaternion kinematics: time derivative of q_{B/A} given omega_{B/A}^B.
/// Returned in (w, x, y, z) component order; satisfies q . qdot = 0 for
/// unit q.
Eigen::Vector4d quat_rate(const Quaternion& q, const Vec3& omega_body);

/// Angular acceleration d/dt omega_{S/T}^T of the relative attitude state,
/// given the servicer feed, the target inertia, and an external torque
/// m_t on the target expressed in target axes [N m]. The target's absolute
/// rate is reconstructed internally as
///   omega_T^T = R_{T/S} omega_S^S - omega_{S/T}^T.
Vec3 rel_ang_accel(const AttitudeState& state, const ServicerAttitudeFeed& feed,
                   const InertiaMatrix& inertia, const Vec3& m_t);

/// One classical RK4 step of length dt [s] on the joint state
/// (q_{T/S}, omega_{S/T}^T), with zero external torque on the target and
/// the servicer feed held constant across the step. The quaternion is
/// renormalized after the step.
AttitudeState rk4_attitude_step(const AttitudeState& state,
                                const ServicerAttitudeFeed& feed,
                                const InertiaMatrix& inertia, double dt);

/// One classical RK4 step of length dt [s] of free rigid-body motion with
/// external torque [N m], body axes: Euler's equation
///   I wdot = m - w x (I w)
/// coupled with the attitude kinematics for the absolute quaternion
/// q_{B/I}. The quaternion is renormalized after the step.
std::pair<Quaternion, Vec3> propagate_rigid_body_truth(
    const Quaternion& q_abs, const Vec3& omega_body,
    const InertiaMatrix& inertia, const Vec3& external_torque, double dt);

}  // namespace relnav::attdyn
