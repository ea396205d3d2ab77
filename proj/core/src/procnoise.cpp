#include "relnav/procnoise.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace relnav::procnoise {

namespace {

using attmath::skew;

// Engine selection thresholds on the dimensionless phases x = w*dt.
// Above kSingleSwitch the closed forms lose at most ~1e-12 relative to
// rounding in their leading cancellations; below it the series paths are
// exact to machine precision. Cross moments additionally avoid the
// resonant denominator w1^2 - w2^2 unless the phases are separated.
constexpr double kSingleSwitch = 0.2;
constexpr double kResonanceGap = 0.1;

// ---------------------------------------------------------------------
// Stable scalar kernels with series fallback below |x| = 0.1.
// ---------------------------------------------------------------------

double sinc_k(double x) {
  if (std::abs(x) < 0.1) {
    const double x2 = x * x;
    return 1.0 +
           x2 * (-1.0 / 6.0 +
                 x2 * (1.0 / 120.0 +
                       x2 * (-1.0 / 5040.0 + x2 * (1.0 / 362880.0))));
  }
  return std::sin(x) / x;
}

/// (1 - cos x) / x^2
double cosm1_k(double x) {
  if (std::abs(x) < 0.1) {
    const double x2 = x * x;
    return 0.5 +
           x2 * (-1.0 / 24.0 +
                 x2 * (1.0 / 720.0 +
                       x2 * (-1.0 / 40320.0 + x2 * (1.0 / 3628800.0))));
  }
  return (1.0 - std::cos(x)) / (x * x);
}

/// (x - sin x) / x^3
double sinrem_k(double x) {
  if (std::abs(x) < 0.1) {
    const double x2 = x * x;
    return 1.0 / 6.0 +
           x2 * (-1.0 / 120.0 +
                 x2 * (1.0 / 5040.0 +
                       x2 * (-1.0 / 362880.0 + x2 * (1.0 / 39916800.0))));
  }
  return (x - std::sin(x)) / (x * x * x);
}

// ---------------------------------------------------------------------
// Polynomial series engine on the scaled variable tau = u/dt in [0, 1].
//
// Each integrand factor is represented by its Taylor polynomial in tau
// with coefficients that are powers of the dimensionless phase x = w*dt,
// so every coefficient is <= |x|^k / k! and the termwise integration is
// free of cancellation for |x| < kSingleSwitch.
// ---------------------------------------------------------------------

constexpr int kSeriesTerms = 10;  // pairs of Taylor terms per factor
constexpr int kPolyDeg = 2 * kSeriesTerms + 2;

using Poly = std::vector<double>;  // coefficients by ascending tau power

Poly poly_zero() { return Poly(kPolyDeg + 1, 0.0); }

/// (1 - cos(x tau)) / w * (1/dt): coefficients of W1(u)/dt with u = dt*tau.
Poly poly_w(double x) {
  Poly p = poly_zero();
  double num = x;  // x^(2k-1)
  double fact = 2.0;
  for (int k = 1; k <= kSeriesTerms; ++k) {
    p[2 * k] = (k % 2 == 1 ? num : -num) / fact;
    num *= x * x;
    fact *= (2.0 * k + 1.0) * (2.0 * k + 2.0);
  }
  return p;
}

/// (u - sin(x tau)/w) / dt: coefficients of V1(u)/dt.
Poly poly_v(double x) {
  Poly p = poly_zero();
  double num = x * x;  // x^(2k)
  double fact = 6.0;   // (2k+1)!
  for (int k = 1; k <= kSeriesTerms; ++k) {
    p[2 * k + 1] = (k % 2 == 1 ? num : -num) / fact;
    num *= x * x;
    fact *= (2.0 * k + 2.0) * (2.0 * k + 3.0);
  }
  return p;
}

/// 1 - cos(x tau): dimensionless.
Poly poly_c(double x) {
  Poly p = poly_zero();
  double num = x * x;
  double fact = 2.0;
  for (int k = 1; k <= kSeriesTerms; ++k) {
    p[2 * k] = (k % 2 == 1 ? num : -num) / fact;
    num *= x * x;
    fact *= (2.0 * k + 1.0) * (2.0 * k + 2.0);
  }
  return p;
}

/// sin(x tau): dimensionless.
Poly poly_s(double x) {
  Poly p = poly_zero();
  double num = x;
  double fact = 1.0;
  for (int k = 0; k < kSeriesTerms; ++k) {
    p[2 * k + 1] = (k % 2 == 0 ? num : -num) / fact;
    num *= x * x;
    fact *= (2.0 * k + 2.0) * (2.0 * k + 3.0);
  }
  return p;
}

/// int_0^1 of a single polynomial.
double poly_integral(const Poly& p) {
  double acc = 0.0;
  for (int d = static_cast<int>(p.size()) - 1; d >= 0; --d) {
    acc += p[d] / (d + 1.0);
  }
  return acc;
}

/// int_0^1 of the product of two polynomials.
double poly_product_integral(const Poly& a, const Poly& b) {
  const int na = static_cast<int>(a.size());
  const int nb = static_cast<int>(b.size());
  double acc = 0.0;
  for (int i = 0; i < na; ++i) {
    if (a[i] == 0.0) continue;
    for (int j = 0; j < nb; ++j) {
      if (b[j] == 0.0) continue;
      acc += a[i] * b[j] / (i + j + 1.0);
    }
  }
  return acc;
}

/// int_0^1 of tau * p(tau).
double poly_t_integral(const Poly& p) {
  double acc = 0.0;
  for (int d = static_cast<int>(p.size()) - 1; d >= 0; --d) {
    acc += p[d] / (d + 2.0);
  }
  return acc;
}

// ---------------------------------------------------------------------
// Composite Gauss-Legendre quadrature for the cross moments in regimes
// where neither the closed forms (resonant denominator) nor the series
// (large phase) apply. Nodes are generated once by Newton iteration on
// the Legendre polynomial, so no tabulated constants are involved.
// ---------------------------------------------------------------------

struct GlRule {
  std::vector<double> node;    // on [0, 1]
  std::vector<double> weight;  // for [0, 1]
};

const GlRule& gl_rule() {
  static const GlRule rule = [] {
    constexpr int n = 24;
    GlRule r;
    r.node.resize(n);
    r.weight.resize(n);
    for (int i = 0; i < n; ++i) {
      // Root of P_n on [-1, 1], bracketed by the Chebyshev estimate.
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      for (int it = 0; it < 100; ++it) {
        // Recurrence for P_n(x) and P_n'(x).
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        const double dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = n * (x * p1 - p0) / (x * x - 1.0);
      r.node[i] = 0.5 * (1.0 + x);
      r.weight[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
  }();
  return rule;
}

/// Composite GL integral of f over [0, dt], with enough panels that each
/// carries only a few radians of the fastest oscillation.
template <typename F>
double gl_integrate(F&& f, double dt, double max_phase) {
  const GlRule& r = gl_rule();
  const int panels = std::max(2, static_cast<int>(std::ceil(max_phase / 4.0)));
  const double h = dt / panels;
  double acc = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double u0 = p * h;
    double panel = 0.0;
    for (size_t i = 0; i < r.node.size(); ++i) {
      panel += r.weight[i] * f(u0 + h * r.node[i]);
    }
    acc += panel * h;
  }
  return acc;
}

// Stable integrand factors for the quadrature path (valid for all x).
double factor_w(double w, double u) { return w * u * u * cosm1_k(w * u); }
double factor_v(double w, double u) {
  return w * w * u * u * u * sinrem_k(w * u);
}
double factor_c(double w, double u) {
  const double a = w * u;
  return a * a * cosm1_k(a);
}
double factor_s(double w, double u) { return w * u * sinc_k(w * u); }

}  // namespace

Mat3 lambda1(const Vec3& w1, double t) {
  const double wn = w1.norm();
  if (wn * std::abs(t) < 1e-6) {
    const Mat3 k = skew(w1);
    return Mat3::Identity() * t + (t * t / 2.0) * k +
           (t * t * t / 6.0) * (k * k);
  }
  const Vec3 what = w1 / wn;
  const Mat3 k = skew(what);
  return Mat3::Identity() * t + ((1.0 - std::cos(wn * t)) / wn) * k +
         (t - std::sin(wn * t) / wn) * (k * k);
}

Mat3 lambda2(const Vec3& w2, double t) {
  return -attmath::rodrigues_exp(-t * w2);
}

ZetaSet zeta_set(double w1_norm, double w2_norm, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("zeta_set: dt must be positive");
  }
  if (w1_norm < 0.0 || w2_norm < 0.0) {
    throw std::invalid_argument("zeta_set: rate magnitudes must be >= 0");
  }
  ZetaSet z;
  z.w1 = w1_norm;
  z.w2 = w2_norm;
  z.dt = dt;

  const double x1 = w1_norm * dt;
  const double x2 = w2_norm * dt;
  const double dt2 = dt * dt;
  const double dt3 = dt2 * dt;

  // --- family-1 moments ---
  if (x1 >= kSingleSwitch) {
    const double w = w1_norm;
    const double c1 = std::cos(x1);
    const double s1 = std::sin(x1);
    z.c1 = (dt - s1 / w) / w;
    z.s1 = dt2 / 2.0 + (c1 - 1.0) / (w * w);
    z.tc1 = (dt2 / 2.0 + (1.0 - c1 - dt * w * s1) / (w * w)) / w;
    z.ts1 = dt3 / 3.0 + (dt * c1 - s1 / w) / (w * w);
    z.c1c1 = (1.5 * dt + (s1 / (2.0 * w)) * (c1 - 4.0)) / (w * w);
    z.s1s1 = dt3 / 3.0 + (dt / 2.0 + 2.0 * dt * c1 - 2.0 * s1 / w -
                          s1 * c1 / (2.0 * w)) /
                             (w * w);
    const double rem = s1 - w * dt;
    z.c1s1 = rem * rem / (2.0 * w * w * w);
  } else {
    const Poly pw = poly_w(x1);
    const Poly pv = poly_v(x1);
    z.c1 = dt2 * poly_integral(pw);
    z.s1 = dt2 * poly_integral(pv);
    z.tc1 = dt3 * poly_t_integral(pw);
    z.ts1 = dt3 * poly_t_integral(pv);
    z.c1c1 = dt3 * poly_product_integral(pw, pw);
    z.s1s1 = dt3 * poly_product_integral(pv, pv);
    z.c1s1 = dt3 * poly_product_integral(pw, pv);
  }

  // --- family-2 moments ---
  if (x2 >= kSingleSwitch) {
    const double w = w2_norm;
    const double c2 = std::cos(x2);
    const double s2 = std::sin(x2);
    z.c2 = dt - s2 / w;
    z.s2 = (c2 - 1.0) / w;
    z.tc2 = dt2 / 2.0 + (1.0 - c2 - dt * w * s2) / (w * w);
    z.ts2 = (dt * c2 - s2 / w) / w;
    z.c2c2 = 1.5 * dt + (s2 / (2.0 * w)) * (c2 - 4.0);
    z.s2s2 = dt / 2.0 - s2 * c2 / (2.0 * w);
    z.c2s2 = -(1.0 - c2) * (1.0 - c2) / (2.0 * w);
  } else {
    const Poly pc = poly_c(x2);
    const Poly ps = poly_s(x2);
    z.c2 = dt * poly_integral(pc);
    z.s2 = -dt * poly_integral(ps);
    z.tc2 = dt2 * poly_t_integral(pc);
    z.ts2 = -dt2 * poly_t_integral(ps);
    z.c2c2 = dt * poly_product_integral(pc, pc);
    z.s2s2 = dt * poly_product_integral(ps, ps);
    z.c2s2 = -dt * poly_product_integral(pc, ps);
  }

  // --- cross moments ---
  const bool both_large = x1 >= kSingleSwitch && x2 >= kSingleSwitch;
  const bool both_small = x1 < kSingleSwitch && x2 < kSingleSwitch;
  if (both_large && std::abs(x1 - x2) >= kResonanceGap) {
    const double w1 = w1_norm, w2 = w2_norm;
    const double c1 = std::cos(x1), s1 = std::sin(x1);
    const double c2 = std::cos(x2), s2 = std::sin(x2);
    const double den = w1 * w1 - w2 * w2;
    z.c1c2 =
        (-dt + w1 * z.c1 + z.c2 + (w1 * s1 * c2 - w2 * c1 * s2) / den) / w1;
    z.c1s2 = (z.s2 + (w1 * s1 * s2 + w2 * c1 * c2 - w2) / den) / w1;
    z.s1c2 = -dt2 / 2.0 + z.s1 + z.tc2 +
             (w2 * s1 * s2 + w1 * c1 * c2 - w1) / (-den) / w1;
    z.s1s2 = z.ts2 + (w2 * s1 * c2 - w1 * c1 * s2) / den / w1;
  } else if (both_small) {
    const Poly pw1 = poly_w(x1);
    const Poly pv1 = poly_v(x1);
    const Poly pc2 = poly_c(x2);
    const Poly ps2 = poly_s(x2);
    z.c1c2 = dt2 * poly_product_integral(pw1, pc2);
    z.c1s2 = -dt2 * poly_product_integral(pw1, ps2);
    z.s1c2 = dt2 * poly_product_integral(pv1, pc2);
    z.s1s2 = -dt2 * poly_product_integral(pv1, ps2);
  } else {
    const double w1 = w1_norm, w2 = w2_norm;
    const double phase = x1 + x2;
    z.c1c2 = gl_integrate(
        [&](double u) { return factor_w(w1, u) * factor_c(w2, u); }, dt,
        phase);
    z.c1s2 = -gl_integrate(
        [&](double u) { return factor_w(w1, u) * factor_s(w2, u); }, dt,
        phase);
    z.s1c2 = gl_integrate(
        [&](double u) { return factor_v(w1, u) * factor_c(w2, u); }, dt,
        phase);
    z.s1s2 = -gl_integrate(
        [&](double u) { return factor_v(w1, u) * factor_s(w2, u); }, dt,
        phase);
  }

  return z;
}

std::array<Mat6, 3> attitude_X(const Vec3& w1, const Vec3& w2,
                               const attdyn::InertiaMatrix& inertia,
                               double dt) {
  const double w1n = w1.norm();
  const double w2n = w2.norm();
  const ZetaSet z = zeta_set(w1n, w2n, dt);

  // Unit-axis skew bases; the zero-rate limit uses a zero axis, which is
  // consistent because every matching coefficient vanishes there too.
  const Mat3 skew1 = w1n > 0.0 ? skew(Vec3(w1 / w1n)) : Mat3::Zero();
  const Mat3 skew2 = w2n > 0.0 ? skew(Vec3(w2 / w2n)) : Mat3::Zero();
  const Mat3 skew1sq = skew1 * skew1;
  const Mat3 skew2sq = skew2 * skew2;

  const double dt2 = dt * dt;
  const double dt3 = dt2 * dt;

  std::array<Mat6, 3> x;
  for (int i = 0; i < 3; ++i) {
    const Vec3 e = Vec3::Unit(i);
    const Vec3 w1i = skew1.col(i);
    const Vec3 v1i = skew1sq.col(i);
    const Vec3 w2i = skew2.col(i);
    const Vec3 v2i = skew2sq.col(i);

    Mat3 a = (dt3 / 3.0) * e * e.transpose() +
             z.c1c1 * w1i * w1i.transpose() + z.s1s1 * v1i * v1i.transpose() +
             z.tc1 * (e * w1i.transpose() + w1i * e.transpose()) +
             z.ts1 * (e * v1i.transpose() + v1i * e.transpose()) +
             z.c1s1 * (w1i * v1i.transpose() + v1i * w1i.transpose());

    Mat3 b = -((dt2 / 2.0) * e * e.transpose() + z.ts2 * e * w2i.transpose() +
               z.tc2 * e * v2i.transpose() + z.c1 * w1i * e.transpose() +
               z.c1s2 * w1i * w2i.transpose() +
               z.c1c2 * w1i * v2i.transpose() + z.s1 * v1i * e.transpose() +
               z.s1s2 * v1i * w2i.transpose() +
               z.s1c2 * v1i * v2i.transpose());

    Mat3 c = dt * e * e.transpose() + z.c2c2 * v2i * v2i.transpose() +
             z.s2s2 * w2i * w2i.transpose() +
             z.c2 * (e * v2i.transpose() + v2i * e.transpose()) +
             z.s2 * (e * w2i.transpose() + w2i * e.transpose()) +
             z.c2s2 * (w2i * v2i.transpose() + v2i * w2i.transpose());

    const double inv_i = 1.0 / inertia.diagonal()(i);
    Mat6 xi;
    xi.topLeftCorner<3, 3>() = a;
    xi.topRightCorner<3, 3>() = b;
    xi.bottomLeftCorner<3, 3>() = b.transpose();
    xi.bottomRightCorner<3, 3>() = c;
    x[i] = (inv_i * inv_i) * xi;
  }
  return x;
}

std::array<Mat6, 3> roe_X(const orbitmech::EquinoctialElements& servicer,
                          double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("roe_X: dt must be positive");
  }
  const orbitmech::Mat63 g = orbitmech::gve_gamma(servicer);
  const double a = servicer.a;
  const double n = orbitmech::mean_motion(a);
  const double dt2 = dt * dt;

  // Variational-element covariance with the longitude-drift coupling:
  // the semi-major-axis component of each input column feeds the
  // relative-longitude rate, which shows up as the border row/column and
  // the quadratic drift term on the (lambda, lambda) entry.
  std::array<Mat6, 3> xp;
  for (int j = 0; j < 3; ++j) {
    const Eigen::Matrix<double, 6, 1> col = g.col(j);
    Mat6 m = dt * col * col.transpose();
    if (j < 2) {
      const double head = col(0);               // da-row sensitivity
      const double tail = col(5);               // lambda-row sensitivity
      Eigen::Matrix<double, 5, 1> s;
      s << head * head, head * g(1, j), head * g(2, j), 0.0, 0.0;
      s = -s;
      const double corner = (n / a) * head * head * dt - 2.0 * head * tail;
      const double scale = 3.0 * n * dt2 / (4.0 * a);
      m.block<5, 1>(0, 5) += scale * s;
      m.block<1, 5>(5, 0) += scale * s.transpose();
      m(5, 5) += scale * corner;
    }
    xp[j] = m;
  }

  // Reorder and normalize: variational (da, dex, dey, dix, diy, dlambda)
  // into ROE (da/a, dlambda, dex, dey, dix, diy).
  Mat6 jmap = Mat6::Zero();
  jmap(0, 0) = 1.0 / a;
  jmap(1, 5) = 1.0;
  jmap(2, 1) = 1.0;
  jmap(3, 2) = 1.0;
  jmap(4, 3) = 1.0;
  jmap(5, 4) = 1.0;

  std::array<Mat6, 3> x;
  for (int j = 0; j < 3; ++j) {
    x[j] = jmap * xp[j] * jmap.transpose();
  }
  return x;
}

NoiseMapping make_mapping(const std::array<Mat6, 3>& blocks) {
  NoiseMapping m;
  m.blocks = blocks;
  for (int i = 0; i < 3; ++i) {
    m.vech_blocks.col(i) = vech6(blocks[i]);
  }
  return m;
}

Mat6 assemble_Q(const NoiseMapping& mapping, const PsdDiagonal& psd) {
  if (psd.minCoeff() < 0.0) {
    throw std::invalid_argument("assemble_Q: psd entries must be >= 0");
  }
  Mat6 q = Mat6::Zero();
  for (int i = 0; i < 3; ++i) {
    q += psd(i) * mapping.blocks[i];
  }
  return q;
}

Vec21 vech6(const Mat6& m) {
  Vec21 v;
  int k = 0;
  for (int j = 0; j < 6; ++j) {
    for (int i = j; i < 6; ++i) {
      v(k++) = m(i, j);
    }
  }
  return v;
}

Mat6 unvech6(const Vec21& v) {
  Mat6 m;
  int k = 0;
  for (int j = 0; j < 6; ++j) {
    for (int i = j; i < 6; ++i) {
      m(i, j) = v(k);
      m(j, i) = v(k);
      ++k;
    }
  }
  return m;
}

}  // namespace relnav::procnoise
