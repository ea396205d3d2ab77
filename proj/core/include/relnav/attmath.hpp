#pragma once
// Rotation-representation kernel: quaternions, modified Rodrigues parameters
// (MRPs), direction cosine matrices, skew operators, and the Rodrigues matrix
// exponential. All operations are pure functions on immutable values.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace relnav::attmath {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Modified Rodrigues parameter vector, scaled so that for small rotations
/// the norm approximates the rotation angle in radians.
using Mrp = Eigen::Vector3d;

/// Antisymmetric cross-product matrix; construct with skew() so the
/// antisymmetry invariant holds exactly.
using SkewMatrix = Eigen::Matrix3d;

/// Thrown when an MRP conversion is evaluated at its singular rotation.
class SingularMrp : public std::domain_error {
 public:
  explicit SingularMrp(const std::string& what) : std::domain_error(what) {}
};

/// Unit quaternion, scalar-first storage: q = [w, v_x, v_y, v_z].
/// q and -q represent the same attitude (double cover).
struct Quaternion {
  double w{1.0};
  Vec3 v{Vec3::Zero()};

  Quaternion() = default;
  Quaternion(double w_, const Vec3& v_) : w(w_), v(v_) {}
  Quaternion(double w_, double x, double y, double z) : w(w_), v(x, y, z) {}

  static Quaternion identity() { return Quaternion{}; }

  double norm() const { return std::sqrt(w * w + v.squaredNorm()); }
  Quaternion normalized() const;
  Quaternion conjugate() const { return Quaternion{w, -v}; }
  double dot(const Quaternion& o) const { return w * o.w + v.dot(o.v); }
  Eigen::Vector4d wxyz() const { return Eigen::Vector4d{w, v.x(), v.y(), v.z()}; }
};

/// Cross-product matrix: skew(u) * x == u.cross(x).
SkewMatrix skew(const Vec3& u);

/// Regular MRP branch p = 4 v / (1 + w). Singular at 180 degrees.
/// Throws SingularMrp when 1 + w <= 1e-9.
Mrp mrp_from_error_quat(const Quaternion& dq);

/// Shadow MRP branch p_s = 4 v / (w - 1); same attitude as the regular
/// branch, singular at 0 degrees. Throws SingularMrp when |w - 1| <= 1e-9.
Mrp shadow_mrp(const Quaternion& dq);

/// Whichever of the two MRP branches has the smaller Euclidean norm; ties
/// (w == 0, both norms 4) break toward the regular branch. Never singular.
Mrp min_norm_mrp(const Quaternion& dq);

/// Inverse of mrp_from_error_quat:
/// w = (16 - p'p)/(16 + p'p), v = 8 p / (16 + p'p). Unit norm by construction.
Quaternion quat_from_mrp(const Mrp& p);

/// Quaternion product in natural (DCM-compatible) order:
/// quat_to_dcm(quat_mul(a, b)) == quat_to_dcm(a) * quat_to_dcm(b).
Quaternion quat_mul(const Quaternion& a, const Quaternion& b);

/// Frame-transform matrix R = (w^2 - v'v) I + 2 v v' - 2 w [v]x, so that for
/// q_{B/A} a vector known in frame A is expressed in frame B as x_B = R x_A.
Mat3 quat_to_dcm(const Quaternion& q);

/// Rotation angle between two attitudes: 2 acos(|<a, b>|), in [0, pi].
/// Invariant under sign flips of either argument.
double angle_between(const Quaternion& a, const Quaternion& b);

/// Matrix exponential of a skew matrix via Rodrigues' formula:
/// e^{[t]x} = I + sin(th) K + (1 - cos(th)) K^2 with th = |t|, K = [t/th]x.
/// Falls back to the quadratic series below th = 1e-6 to avoid 0/0.
Mat3 rodrigues_exp(const Vec3& theta_vec);

/// Unit quaternion for a rotation of |theta_vec| radians about its direction.
/// Satisfies quat_to_dcm(quat_exp(t)) == rodrigues_exp(-t) == rodrigues_exp(t)'.
Quaternion quat_exp(const Vec3& theta_vec);

/// Inverse of quat_to_dcm (Shepperd's method, branch on the largest
/// quaternion component). Input must be a proper rotation matrix.
Quaternion quat_from_dcm(const Mat3& r);

}  // namespace relnav::attmath
