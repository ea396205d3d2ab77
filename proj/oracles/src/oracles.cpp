#include "oracles/oracles.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace oracles {

namespace {

/// 1 - cos(a), evaluated without cancellation.
double one_minus_cos(double a) {
  const double s = std::sin(0.5 * a);
  return 2.0 * s * s;
}

/// x - sin(x), by series for small |x|.
double x_minus_sin(double x) {
  if (std::abs(x) >= 0.9) return x - std::sin(x);
  // sum_{k>=1} (-1)^(k+1) x^(2k+1)/(2k+1)!
  double term = x * x * x / 6.0;
  double sum = term;
  for (int k = 1; k < 30; ++k) {
    term *= -x * x / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
    sum += term;
    if (std::abs(term) < 1e-20 * std::abs(sum)) break;
  }
  return sum;
}

}  // namespace

double trapezoid(const std::function<double(double)>& f, double a, double b,
                 int n) {
  if (n < 2) throw std::invalid_argument("trapezoid: need at least 2 nodes");
  const double h = (b - a) / (n - 1);
  double sum = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n - 1; ++i) sum += f(a + i * h);
  return sum * h;
}

relnav::procnoise::ZetaSet zeta_quadrature(double w1, double w2, double dt,
                                           int n) {
  // Basis functions of the in-step response: the first family carries the
  // 1/w1 scale of the rate-coupling factors, the second family is plain
  // trig of the frame rotation. Zero rates collapse entire families to
  // zero by the small-angle limits.
  auto f1w = [&](double u) {
    return w1 == 0.0 ? 0.0 : one_minus_cos(w1 * u) / w1;
  };
  auto f1v = [&](double u) {
    return w1 == 0.0 ? 0.0 : x_minus_sin(w1 * u) / w1;
  };
  auto f2c = [&](double u) { return w2 == 0.0 ? 0.0 : one_minus_cos(w2 * u); };
  auto f2s = [&](double u) { return w2 == 0.0 ? 0.0 : std::sin(w2 * u); };

  auto integral = [&](const std::function<double(double)>& f) {
    return trapezoid(f, 0.0, dt, n);
  };

  relnav::procnoise::ZetaSet z;
  z.w1 = w1;
  z.w2 = w2;
  z.dt = dt;

  z.c1 = integral([&](double u) { return f1w(u); });
  z.s1 = integral([&](double u) { return f1v(u); });
  z.tc1 = integral([&](double u) { return u * f1w(u); });
  z.ts1 = integral([&](double u) { return u * f1v(u); });
  z.c1c1 = integral([&](double u) { return f1w(u) * f1w(u); });
  z.s1s1 = integral([&](double u) { return f1v(u) * f1v(u); });
  z.c1s1 = integral([&](double u) { return f1w(u) * f1v(u); });

  z.c2 = integral([&](double u) { return f2c(u); });
  z.s2 = -integral([&](double u) { return f2s(u); });
  z.tc2 = integral([&](double u) { return u * f2c(u); });
  z.ts2 = -integral([&](double u) { return u * f2s(u); });
  z.c2c2 = integral([&](double u) { return f2c(u) * f2c(u); });
  z.s2s2 = integral([&](double u) { return f2s(u) * f2s(u); });
  z.c2s2 = -integral([&](double u) { return f2s(u) * f2c(u); });

  z.c1c2 = integral([&](double u) { return f1w(u) * f2c(u); });
  z.c1s2 = -integral([&](double u) { return f1w(u) * f2s(u); });
  z.s1c2 = integral([&](double u) { return f1v(u) * f2c(u); });
  z.s1s2 = -integral([&](double u) { return f1v(u) * f2s(u); });
  return z;
}

std::array<Mat6, 3> attitude_X_quadrature(
    const Vec3& w1, const Vec3& w2,
    const relnav::attdyn::InertiaMatrix& inertia, double dt, int steps) {
  if (steps < 1) throw std::invalid_argument("attitude_X_quadrature: steps");
  const Vec3 inv = inertia.inverse_diagonal();
  std::array<Mat6, 3> x;
  for (auto& m : x) m.setZero();

  const double h = dt / steps;
  for (int node = 0; node <= steps; ++node) {
    const double u = node * h;
    const double weight = (node == 0 || node == steps) ? 0.5 * h : h;
    const relnav::attmath::Mat3 l1 = relnav::procnoise::lambda1(w1, u);
    const relnav::attmath::Mat3 l2 = relnav::procnoise::lambda2(w2, u);
    for (int i = 0; i < 3; ++i) {
      Eigen::Matrix<double, 6, 1> g;
      g.head<3>() = l1.col(i) * inv(i);
      g.tail<3>() = l2.col(i) * inv(i);
      x[i] += weight * g * g.transpose();
    }
  }
  return x;
}

Mat63 gve_finite_difference(const EquinoctialElements& elements, double dv) {
  namespace om = relnav::orbitmech;
  const om::KeplerianElements k = om::equinoctial_to_kepler(elements);
  const CartesianState cart = om::cartesian_from_kepler(k);
  const relnav::attmath::Mat3 rtn = om::rtn_axes(cart);

  Mat63 g;
  for (int j = 0; j < 3; ++j) {
    const Vec3 axis = rtn.row(j).transpose();
    CartesianState plus = cart;
    CartesianState minus = cart;
    plus.v += dv * axis;
    minus.v -= dv * axis;
    const EquinoctialElements ep =
        om::kepler_to_equinoctial(om::kepler_from_cartesian(plus));
    const EquinoctialElements em =
        om::kepler_to_equinoctial(om::kepler_from_cartesian(minus));
    Eigen::Matrix<double, 6, 1> d = ep.vec() - em.vec();
    d(5) = om::wrap_angle(ep.lambda - em.lambda);
    g.col(j) = d / (2.0 * dv);
  }
  return g;
}

std::array<Mat6, 3> roe_X_quadrature(const EquinoctialElements& servicer,
                                     double dt, int n, double dv) {
  namespace om = relnav::orbitmech;
  if (n < 2 || n % 2 != 0) {
    throw std::invalid_argument("roe_X_quadrature: n must be even and >= 2");
  }
  const Mat63 g = gve_finite_difference(servicer, dv);
  const double nm = om::mean_motion(servicer.a);

  // Element-difference drift: the mean-longitude rate responds to a
  // semi-major-axis offset; everything else is static over the step.
  Mat6 drift = Mat6::Zero();
  drift(5, 0) = -1.5 * nm / servicer.a;

  // Element differences -> relative orbital elements.
  Mat6 jmap = Mat6::Zero();
  jmap(0, 0) = 1.0 / servicer.a;
  jmap(1, 5) = 1.0;
  jmap(2, 1) = 1.0;
  jmap(3, 2) = 1.0;
  jmap(4, 3) = 1.0;
  jmap(5, 4) = 1.0;

  std::array<Mat6, 3> x;
  for (auto& m : x) m.setZero();
  const double h = dt / n;
  for (int node = 0; node <= n; ++node) {
    const double u = node * h;
    double weight = h / 3.0;
    if (node != 0 && node != n) weight *= (node % 2 == 1) ? 4.0 : 2.0;
    const Mat6 prop = jmap * (Mat6::Identity() + drift * u);
    for (int j = 0; j < 3; ++j) {
      const Eigen::Matrix<double, 6, 1> col = prop * g.col(j);
      x[j] += weight * col * col.transpose();
    }
  }
  return x;
}

CartesianState integrate_two_body_cartesian(const CartesianState& s0,
                                            double dt, double h) {
  namespace om = relnav::orbitmech;
  auto accel = [](const Vec3& r) {
    const double rn = r.norm();
    return Vec3(-om::kMu * r / (rn * rn * rn));
  };
  CartesianState s = s0;
  double remaining = dt;
  while (remaining > 1e-12) {
    const double step = std::min(h, remaining);
    const Vec3 k1r = s.v;
    const Vec3 k1v = accel(s.r);
    const Vec3 k2r = s.v + 0.5 * step * k1v;
    const Vec3 k2v = accel(s.r + 0.5 * step * k1r);
    const Vec3 k3r = s.v + 0.5 * step * k2v;
    const Vec3 k3v = accel(s.r + 0.5 * step * k2r);
    const Vec3 k4r = s.v + step * k3v;
    const Vec3 k4v = accel(s.r + step * k3r);
    s.r += step / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
    s.v += step / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    remaining -= step;
  }
  return s;
}

double wls_objective(const Eigen::Matrix<double, 21, 3>& x,
                     const Eigen::Matrix<double, 21, 1>& qhat,
                     const Eigen::Matrix<double, 21, 21>& w_inv,
                     const Vec3& q) {
  const Eigen::Matrix<double, 21, 1> r = x * q - qhat;
  return r.dot(w_inv * r);
}

double wls_grid_min(const Eigen::Matrix<double, 21, 3>& x,
                    const Eigen::Matrix<double, 21, 1>& qhat,
                    const Eigen::Matrix<double, 21, 21>& w_inv,
                    const Vec3& lower, const Vec3& upper, int points) {
  if (points < 2) throw std::invalid_argument("wls_grid_min: points >= 2");
  if (!lower.allFinite() || !upper.allFinite()) {
    throw std::invalid_argument("wls_grid_min: bounds must be finite");
  }
  double best = std::numeric_limits<double>::infinity();
  Vec3 q;
  for (int i = 0; i < points; ++i) {
    q(0) = lower(0) + (upper(0) - lower(0)) * i / (points - 1);
    for (int j = 0; j < points; ++j) {
      q(1) = lower(1) + (upper(1) - lower(1)) * j / (points - 1);
      for (int k = 0; k < points; ++k) {
        q(2) = lower(2) + (upper(2) - lower(2)) * k / (points - 1);
        best = std::min(best, wls_objective(x, qhat, w_inv, q));
      }
    }
  }
  return best;
}

double wls_face_min(const Eigen::Matrix<double, 21, 3>& x,
                    const Eigen::Matrix<double, 21, 1>& qhat,
                    const Eigen::Matrix<double, 21, 21>& w_inv,
                    const Vec3& lower, const Vec3& upper) {
  const Eigen::Matrix3d a = x.transpose() * w_inv * x;
  const Vec3 c = x.transpose() * w_inv * qhat;

  double best = std::numeric_limits<double>::infinity();
  // Each coordinate is free (0), at its lower bound (1), or upper (2).
  for (int pattern = 0; pattern < 27; ++pattern) {
    int code[3] = {pattern % 3, (pattern / 3) % 3, pattern / 9};
    Vec3 q = Vec3::Zero();
    std::vector<int> free;
    bool valid = true;
    for (int i = 0; i < 3; ++i) {
      if (code[i] == 0) {
        free.push_back(i);
      } else {
        q(i) = code[i] == 1 ? lower(i) : upper(i);
        if (!std::isfinite(q(i))) valid = false;
      }
    }
    if (!valid) continue;

    if (!free.empty()) {
      const int nf = static_cast<int>(free.size());
      Eigen::MatrixXd aff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int r = 0; r < nf; ++r) {
        rhs(r) = c(free[r]);
        for (int s = 0; s < 3; ++s) {
          if (code[s] != 0) rhs(r) -= a(free[r], s) * q(s);
        }
        for (int s = 0; s < nf; ++s) aff(r, s) = a(free[r], free[s]);
      }
      const Eigen::VectorXd qf = aff.ldlt().solve(rhs);
      for (int r = 0; r < nf; ++r) q(free[r]) = qf(r);
    }

    bool feasible = true;
    for (int i = 0; i < 3; ++i) {
      if (q(i) < lower(i) - 1e-12 || q(i) > upper(i) + 1e-12) feasible = false;
    }
    if (!feasible) continue;
    for (int i = 0; i < 3; ++i) {
      q(i) = std::min(std::max(q(i), lower(i)), upper(i));
    }
    best = std::min(best, wls_objective(x, qhat, w_inv, q));
  }
  return best;
}

double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: domain");
  if (x == 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    // Series representation.
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  // Continued fraction (modified Lentz).
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double f = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * f;
  return 1.0 - q;
}

double chi2_cdf(double x, int dof) {
  if (dof < 1) throw std::invalid_argument("chi2_cdf: dof >= 1");
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * dof, 0.5 * x);
}

double chi2_quantile(double p, int dof) {
  if (p <= 0.0 || p >= 1.0) {
    throw std::invalid_argument("chi2_quantile: p in (0, 1)");
  }
  double lo = 0.0;
  double hi = 1.0;
  while (chi2_cdf(hi, dof) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(mid, dof) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracles
