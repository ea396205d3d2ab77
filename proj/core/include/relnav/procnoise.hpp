#pragma once

#include <array>

#include <Eigen/Core>

#include "relnav/attdyn.hpp"
#include "relnav/orbitmech.hpp"

// Closed-form discrete process-noise construction for the relative
// navigation filter.
//
// Both the attitude and the orbit channels share the same structure: the
// continuous error dynamics are driven through a noise-input matrix by a
// white acceleration (or torque) process with a diagonal power spectral
// density, and the discrete covariance contribution over a step dt is
//
//   Q = sum_i psd_i * X^i,
//
// where each X^i is the integral of the state-transition-weighted outer
// product of the i-th input column. The X^i depend only on the current
// state estimate and dt, so they are computed once per step and reused by
// the adaptive noise estimator, which fits psd from covariance-matching
// evidence.
namespace relnav::procnoise {

using attmath::Mat3;
using attmath::Vec3;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec21 = Eigen::Matrix<double, 21, 1>;

/// Diagonal white-noise power spectral density, one entry per input axis.
/// Units: (m/s^2)^2 s for the orbit channel; (N m)^2 s for the attitude
/// channel (torque noise; the inertia inverse is folded into X).
using PsdDiagonal = Eigen::Vector3d;

/// The three per-axis covariance shape matrices together with their
/// half-vectorized stacking, which is the regression matrix used by the
/// adaptive noise estimator.
struct NoiseMapping {
  std::array<Mat6, 3> blocks;                ///< X^0, X^1, X^2
  Eigen::Matrix<double, 21, 3> vech_blocks;  ///< columns vech(X^i)
};

/// Time integral of the rotation exponential: Lambda1(t) = int_0^t
/// exp([w1]x u) du, i.e.
///   I t + (1 - cos w t)/w [what]x + (t - sin(w t)/w) [what]x^2
/// with w = |w1|. Below w*t = 1e-6 a series in the raw vector is used:
/// I t + t^2/2 [w1]x + t^3/6 [w1]x^2.
Mat3 lambda1(const Vec3& w1, double t);

/// Negated transposed-rotation factor: Lambda2(t) = -exp(-[w2]x t).
Mat3 lambda2(const Vec3& w2, double t);

/// The 18 scalar time-moment coefficients that weight the skew-basis
/// outer products in the attitude covariance assembly. Each coefficient
/// is an exact integral over u in [0, dt] of products drawn from
///   {u, 1} x {(1-cos w1 u)/w1, u - sin(w1 u)/w1, 1-cos(w2 u), sin(w2 u)}
/// with the sign conventions fixed by the assembly below. Closed forms
/// are used away from the small-angle and resonant regimes; series and
/// high-order quadrature paths keep every coefficient accurate near
/// w*dt -> 0 and w1 -> w2, with continuity across the switch thresholds.
struct ZetaSet {
  double w1{0.0}, w2{0.0}, dt{0.0};
  // family-1 moments (argument w1)
  double c1{0.0}, s1{0.0}, tc1{0.0}, ts1{0.0};
  double c1c1{0.0}, s1s1{0.0}, c1s1{0.0};
  // family-2 moments (argument w2)
  double c2{0.0}, s2{0.0}, tc2{0.0}, ts2{0.0};
  double c2c2{0.0}, s2s2{0.0}, c2s2{0.0};
  // cross moments (both arguments)
  double c1c2{0.0}, c1s2{0.0}, s1c2{0.0}, s1s2{0.0};
};

/// Evaluate the full coefficient set for rate magnitudes w1_norm, w2_norm
/// [rad/s] (nonnegative) and step dt [s].
ZetaSet zeta_set(double w1_norm, double w2_norm, double dt);

/// Per-axis attitude covariance shape matrices over a step dt.
/// State ordering within each 6x6 block: (attitude error, relative rate
/// error). w1 = omega_{S/T}^T and w2 = R_{T/S} omega_S^S at the step
/// anchor; the target inertia enters squared and inverted, so the psd
/// paired with these blocks is a torque-noise density.
std::array<Mat6, 3> attitude_X(const Vec3& w1, const Vec3& w2,
                               const attdyn::InertiaMatrix& inertia,
                               double dt);

/// Per-axis orbit covariance shape matrices over a step dt for the
/// relative-orbit-element state (da, dlambda, dex, dey, dix, diy), built
/// from the servicer osculating elements: variational input matrix at the
/// step anchor, drift coupling from the semi-major-axis row into the
/// relative longitude, and the 1/a normalization of the da row. Axis
/// order of the returned blocks: radial, transverse, normal.
std::array<Mat6, 3> roe_X(const orbitmech::EquinoctialElements& servicer,
                          double dt);

/// Stack three shape matrices into the regression form used by the
/// adaptive estimator.
NoiseMapping make_mapping(const std::array<Mat6, 3>& blocks);

/// Q = sum_i psd(i) * X^i.
Mat6 assemble_Q(const NoiseMapping& mapping, const PsdDiagonal& psd);

/// Half-vectorization, the library-wide packing contract: lower triangle,
/// column-major — (0,0),(1,0),...,(5,0),(1,1),...,(5,5).
Vec21 vech6(const Mat6& m);

/// Inverse of vech6 (returns a symmetric matrix).
Mat6 unvech6(const Vec21& v);

}  // namespace relnav::procnoise
