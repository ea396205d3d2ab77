#pragma once

#include <array>
#include <functional>

#include <Eigen/Core>

#include "relnav/attdyn.hpp"
#include "relnav/orbitmech.hpp"
#include "relnav/procnoise.hpp"

// Reference implementations used only by tests: slow, simple, and
// independent of the closed forms they check. Everything here favors
// directness over speed.
namespace oracles {

using relnav::attmath::Vec3;
using relnav::orbitmech::CartesianState;
using relnav::orbitmech::EquinoctialElements;
using relnav::orbitmech::Mat63;
using relnav::procnoise::Mat6;

/// Composite trapezoid of f over [a, b] with n nodes (n >= 2).
double trapezoid(const std::function<double(double)>& f, double a, double b,
                 int n);

/// The 18 time integrals that build the attitude process-noise blocks,
/// evaluated by n-node trapezoid quadrature of their defining integrands
/// (numerically stabilized near zero rate, with exact zero-rate limits).
relnav::procnoise::ZetaSet zeta_quadrature(double w1, double w2, double dt,
                                           int n);

/// Attitude noise-shape blocks by trapezoid quadrature with `steps`
/// intervals of the outer-product integrand, built from the closed-form
/// in-step transition factors evaluated at the quadrature nodes.
std::array<Mat6, 3> attitude_X_quadrature(const Vec3& w1, const Vec3& w2,
                                          const relnav::attdyn::InertiaMatrix& inertia,
                                          double dt, int steps);

/// Orbit-element sensitivity to an impulsive velocity change, by central
/// finite differences of the exact element-update chain. dv is the
/// impulse magnitude [m/s]; columns are radial, transverse, normal.
Mat63 gve_finite_difference(const EquinoctialElements& elements, double dv);

/// Relative-orbit noise-shape blocks by Simpson quadrature (n even
/// intervals) of the drift-propagated impulse response, with the
/// sensitivity columns from gve_finite_difference.
std::array<Mat6, 3> roe_X_quadrature(const EquinoctialElements& servicer,
                                     double dt, int n, double dv);

/// Fixed-step RK4 integration of the two-body equation of motion
/// r'' = -mu r / |r|^3 over dt with step h.
CartesianState integrate_two_body_cartesian(const CartesianState& s0,
                                            double dt, double h);

/// Quadratic objective of the bounded fit: (X q - qhat)' Winv (X q - qhat).
double wls_objective(const Eigen::Matrix<double, 21, 3>& x,
                     const Eigen::Matrix<double, 21, 1>& qhat,
                     const Eigen::Matrix<double, 21, 21>& w_inv,
                     const Vec3& q);

/// Minimum of the objective over an axis-aligned grid of `points` values
/// per axis spanning [lower, upper] inclusive. Bounds must be finite.
double wls_grid_min(const Eigen::Matrix<double, 21, 3>& x,
                    const Eigen::Matrix<double, 21, 1>& qhat,
                    const Eigen::Matrix<double, 21, 21>& w_inv,
                    const Vec3& lower, const Vec3& upper, int points);

/// Exact minimum of the box-constrained objective by enumerating all 27
/// active-bound patterns (each coordinate free, at lower, or at upper),
/// solving the free coordinates in closed form, and keeping the best
/// feasible candidate. Infinite bounds are allowed.
double wls_face_min(const Eigen::Matrix<double, 21, 3>& x,
                    const Eigen::Matrix<double, 21, 1>& qhat,
                    const Eigen::Matrix<double, 21, 21>& w_inv,
                    const Vec3& lower, const Vec3& upper);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Chi-square CDF with dof degrees of freedom.
double chi2_cdf(double x, int dof);

/// Chi-square quantile by bisection on the CDF.
double chi2_quantile(double p, int dof);

}  // namespace oracles
