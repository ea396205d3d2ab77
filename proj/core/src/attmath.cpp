#include "relnav/attmath.hpp"

#include <algorithm>
#include <array>
#include <iterator>

namespace relnav::attmath {

namespace {
constexpr double kMrpEps = 1e-9;       // singularity guard on MRP denominators
constexpr double kSmallAngle = 1e-6;   // series fallback threshold [rad]
}  // namespace

Quaternion Quaternion::normalized() const {
  const double n = norm();
  return Quaternion{w / n, v / n};
}

SkewMatrix skew(const Vec3& u) {
  SkewMatrix s;
  s << 0.0, -u.z(), u.y(),
      u.z(), 0.0, -u.x(),
      -u.y(), u.x(), 0.0;
  return s;
}

Mrp mrp_from_error_quat(const Quaternion& dq) {
  const double denom = 1.0 + dq.w;
  if (denom <= kMrpEps) {
    throw SingularMrp("mrp_from_error_quat: rotation within guard band of 180 deg");
  }
  return 4.0 * dq.v / denom;
}

Mrp shadow_mrp(const Quaternion& dq) {
  const double denom = dq.w - 1.0;
  if (std::abs(denom) <= kMrpEps) {
    throw SingularMrp("shadow_mrp: rotation within guard band of 0 deg");
  }
  return 4.0 * dq.v / denom;
}

Mrp min_norm_mrp(const Quaternion& dq) {
  // Smaller norm <=> larger |denominator|: |1 + w| vs |w - 1|. For w >= 0 the
  // regular branch wins (tie at w == 0 also goes regular, per convention).
  if (dq.w >= 0.0) {
    return 4.0 * dq.v / (1.0 + dq.w);
  }
  return 4.0 * dq.v / (dq.w - 1.0);
}

Quaternion quat_from_mrp(const Mrp& p) {
  const double n2 = p.squaredNorm();
  const double denom = 16.0 + n2;
  return Quaternion{(16.0 - n2) / denom, (8.0 / denom) * p};
}

Quaternion quat_mul(const Quaternion& a, const Quaternion& b) {
  return Quaternion{a.w * b.w - a.v.dot(b.v),
                    a.w * b.v + b.w * a.v - a.v.cross(b.v)};
}

Mat3 quat_to_dcm(const Quaternion& q) {
  return (q.w * q.w - q.v.squaredNorm()) * Mat3::Identity() +
         2.0 * q.v * q.v.transpose() - 2.0 * q.w * skew(q.v);
}

double angle_between(const Quaternion& a, const Quaternion& b) {
  const double d = std::min(1.0, std::abs(a.dot(b)));
  return 2.0 * std::acos(d);
}

Mat3 rodrigues_exp(const Vec3& theta_vec) {
  const double theta = theta_vec.norm();
  if (theta < kSmallAngle) {
    const Mat3 k = skew(theta_vec);
    return Mat3::Identity() + k + 0.5 * (k * k);
  }
  const Mat3 khat = skew(theta_vec / theta);
  return Mat3::Identity() + std::sin(theta) * khat +
         (1.0 - std::cos(theta)) * (khat * khat);
}

Quaternion quat_from_dcm(const Mat3& r) {
  // With q = (w, v): r = (w^2 - v'v)I + 2vv' - 2w[v]x, so
  //   4w^2       = 1 + trace(r)
  //   4 v_i^2    = 1 + 2 r(i,i) - trace(r)
  //   r(i,j) - r(j,i) = 4 w v_k   for cyclic (i,j,k)
  //   r(i,j) + r(j,i) = 4 v_i v_j
  // Pick the largest of the four squares as the division pivot.
  const double tr = r.trace();
  const std::array<double, 4> squares = {
      1.0 + tr, 1.0 + 2.0 * r(0, 0) - tr, 1.0 + 2.0 * r(1, 1) - tr,
      1.0 + 2.0 * r(2, 2) - tr};
  const int pivot = static_cast<int>(std::distance(
      squares.begin(), std::max_element(squares.begin(), squares.end())));
  Quaternion q;
  if (pivot == 0) {
    const double w = 0.5 * std::sqrt(squares[0]);
    q = Quaternion(w, Vec3((r(1, 2) - r(2, 1)) / (4.0 * w),
                           (r(2, 0) - r(0, 2)) / (4.0 * w),
                           (r(0, 1) - r(1, 0)) / (4.0 * w)));
  } else {
    const int i = pivot - 1;
    const int j = (i + 1) % 3;
    const int k = (i + 2) % 3;
    const double vi = 0.5 * std::sqrt(squares[pivot]);
    Vec3 v;
    v(i) = vi;
    v(j) = (r(i, j) + r(j, i)) / (4.0 * vi);
    v(k) = (r(i, k) + r(k, i)) / (4.0 * vi);
    q = Quaternion((r(j, k) - r(k, j)) / (4.0 * vi), v);
  }
  return q.normalized();
}

Quaternion quat_exp(const Vec3& theta_vec) {
  const double theta = theta_vec.norm();
  if (theta < kSmallAngle) {
    // sin(th/2)/th = 1/2 - th^2/48 + O(th^4)
    const double s = 0.5 - theta * theta / 48.0;
    return Quaternion{std::cos(0.5 * theta), s * theta_vec};
  }
  return Quaternion{std::cos(0.5 * theta),
                    (std::sin(0.5 * theta) / theta) * theta_vec};
}

}  // namespace relnav::attmath
