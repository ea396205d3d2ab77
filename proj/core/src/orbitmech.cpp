#include "relnav/orbitmech.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace relnav::orbitmech {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRetrogradeGuard = 1e-9;   // width of the i = pi exclusion band
constexpr double kMaxMapEccentricity = 0.05;

Mat3 rot_x(double t) {
  const double c = std::cos(t);
  const double s = std::sin(t);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Mat3 rot_z(double t) {
  const double c = std::cos(t);
  const double s = std::sin(t);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

}  // namespace

double wrap_angle(double x) {
  double y = std::fmod(x + kPi, 2.0 * kPi);
  if (y <= 0.0) y += 2.0 * kPi;
  return y - kPi;
}

double mean_motion(double a) { return std::sqrt(kMu / (a * a * a)); }

double period(double a) { return 2.0 * kPi / mean_motion(a); }

double solve_kepler(double mean_anomaly, double e) {
  const double m = wrap_angle(mean_anomaly);
  double big_e = m + e * std::sin(m);
  for (int it = 0; it < 50; ++it) {
    const double f = big_e - e * std::sin(big_e) - m;
    const double fp = 1.0 - e * std::cos(big_e);
    const double step = f / fp;
    big_e -= step;
    if (std::abs(step) < 1e-14) break;
  }
  return big_e;
}

EquinoctialElements kepler_to_equinoctial(const KeplerianElements& k) {
  if (std::abs(k.inc - kPi) <= kRetrogradeGuard) {
    throw RetrogradeSingular("kepler_to_equinoctial: tan(i/2) singular at i = pi");
  }
  const double pom = k.raan + k.argp;  // longitude of perigee
  const double ti2 = std::tan(0.5 * k.inc);
  EquinoctialElements q;
  q.a = k.a;
  q.ex = k.e * std::cos(pom);
  q.ey = k.e * std::sin(pom);
  q.ix = ti2 * std::cos(k.raan);
  q.iy = ti2 * std::sin(k.raan);
  q.lambda = wrap_angle(pom + k.mean_anomaly);
  return q;
}

KeplerianElements equinoctial_to_kepler(const EquinoctialElements& q) {
  KeplerianElements k;
  k.a = q.a;
  k.e = std::hypot(q.ex, q.ey);
  const double pom = (k.e > 0.0) ? std::atan2(q.ey, q.ex) : 0.0;
  const double ti2 = std::hypot(q.ix, q.iy);
  k.inc = 2.0 * std::atan(ti2);
  k.raan = (ti2 > 0.0) ? std::atan2(q.iy, q.ix) : 0.0;
  k.argp = wrap_angle(pom - k.raan);
  k.mean_anomaly = wrap_angle(q.lambda - pom);
  return k;
}

Roe roe_from_pair(const EquinoctialElements& target, const EquinoctialElements& servicer) {
  Roe d;
  d.da = (target.a - servicer.a) / servicer.a;
  d.dlambda = wrap_angle(target.lambda - servicer.lambda);
  d.dex = target.ex - servicer.ex;
  d.dey = target.ey - servicer.ey;
  d.dix = target.ix - servicer.ix;
  d.diy = target.iy - servicer.iy;
  return d;
}

EquinoctialElements apply_roe(const EquinoctialElements& servicer, const Roe& roe) {
  EquinoctialElements t;
  t.a = servicer.a * (1.0 + roe.da);
  t.ex = servicer.ex + roe.dex;
  t.ey = servicer.ey + roe.dey;
  t.ix = servicer.ix + roe.dix;
  t.iy = servicer.iy + roe.diy;
  t.lambda = wrap_angle(servicer.lambda + roe.dlambda);
  return t;
}

Mat6 stm_ns_roe(const EquinoctialElements& servicer, double dt) {
  Mat6 phi = Mat6::Identity();
  phi(1, 0) = -1.5 * mean_motion(servicer.a) * dt;
  return phi;
}

Mat6 roe_to_rtn_map(const EquinoctialElements& servicer) {
  const double ecc = std::hypot(servicer.ex, servicer.ey);
  if (ecc >= kMaxMapEccentricity) {
    throw EccentricityOutOfRange("roe_to_rtn_map: near-circular map requires e < 0.05");
  }
  const CartesianState sc = cartesian_from_kepler(equinoctial_to_kepler(servicer));
  // Central differences of the exact nonlinear chain, one ROE axis at a time.
  // Step 1/a keeps the perturbed separation near 1 m, small enough that the
  // quadratic term is negligible and large enough to stay above rounding.
  const double step = 1.0 / servicer.a;
  Mat6 map;
  for (int j = 0; j < 6; ++j) {
    Vec6 dv = Vec6::Zero();
    dv(j) = step;
    const EquinoctialElements plus = apply_roe(servicer, Roe::from_vec(dv));
    const EquinoctialElements minus = apply_roe(servicer, Roe::from_vec(-dv));
    const RtnState sp = relative_state_rtn(sc, cartesian_from_kepler(equinoctial_to_kepler(plus)));
    const RtnState sm = relative_state_rtn(sc, cartesian_from_kepler(equinoctial_to_kepler(minus)));
    map.col(j) = (sp.vec() - sm.vec()) / (2.0 * step);
  }
  return map;
}

RtnState roe_to_rtn(const Roe& roe, const EquinoctialElements& servicer) {
  return RtnState::from_vec(roe_to_rtn_map(servicer) * roe.vec());
}

Roe rtn_to_roe(const RtnState& state, const EquinoctialElements& servicer) {
  const Mat6 map = roe_to_rtn_map(servicer);
  return Roe::from_vec(map.partialPivLu().solve(state.vec()));
}

Mat63 gve_gamma(const EquinoctialElements& q) {
  const KeplerianElements k = equinoctial_to_kepler(q);
  const double a = k.a;
  const double e = k.e;
  const double eta = std::sqrt(1.0 - e * e);
  const double p = a * (1.0 - e * e);
  const double h = std::sqrt(kMu * p);
  const double big_e = solve_kepler(k.mean_anomaly, e);
  const double r = a * (1.0 - e * std::cos(big_e));
  const double cnu = (std::cos(big_e) - e) / (1.0 - e * std::cos(big_e));
  const double snu = eta * std::sin(big_e) / (1.0 - e * std::cos(big_e));
  const double u = k.argp + std::atan2(snu, cnu);  // argument of latitude
  const double su = std::sin(u);
  const double cu = std::cos(u);
  const double pom = k.raan + k.argp;
  const double cp = std::cos(pom);
  const double sp = std::sin(pom);
  const double co = std::cos(k.raan);
  const double so = std::sin(k.raan);
  const double ti2 = std::tan(0.5 * k.inc);
  const double c2i2 = std::cos(0.5 * k.inc) * std::cos(0.5 * k.inc);

  // Classical Gauss variational equations, with every 1/e and 1/sin(i)
  // eliminated analytically before evaluation:
  //   (eta - 1)/e = -e/(1 + eta), (1 - cos i)/sin i = tan(i/2),
  //   tan(i/2)/sin i = 1/(2 cos^2(i/2)),
  // and e*d(argp) carried as a product rather than divided back out.
  const double de_r = p * snu / h;
  const double de_t = ((p + r) * cnu + r * e) / h;

  // e * d(raan + argp): in-plane parts from e*d(argp); the out-of-plane parts
  // of d(raan) and d(argp) combine into the regular tan(i/2) form.
  const double epom_r = -p * cnu / h;
  const double epom_t = (p + r) * snu / h;
  const double epom_n = e * (r * su / h) * ti2;

  Mat63 g = Mat63::Zero();
  // Semi-major axis.
  g(0, 0) = 2.0 * a * a * e * snu / h;
  g(0, 1) = 2.0 * a * a * p / (r * h);
  // Eccentricity vector.
  g(1, 0) = cp * de_r - sp * epom_r;
  g(1, 1) = cp * de_t - sp * epom_t;
  g(1, 2) = -sp * epom_n;
  g(2, 0) = sp * de_r + cp * epom_r;
  g(2, 1) = sp * de_t + cp * epom_t;
  g(2, 2) = cp * epom_n;
  // Inclination vector: d(tan(i/2)) and tan(i/2) d(raan) combine to a single
  // rotation of the argument of latitude by raan.
  const double ivec = r / (2.0 * h * c2i2);
  g(3, 2) = ivec * std::cos(u + k.raan);
  g(4, 2) = ivec * std::sin(u + k.raan);
  // Mean longitude (perturbation part only; the n drift is in the STM).
  g(5, 0) = -(p * e * cnu) / (h * (1.0 + eta)) - 2.0 * eta * r / h;
  g(5, 1) = (p + r) * snu * e / (h * (1.0 + eta));
  g(5, 2) = (r * su / h) * ti2;
  return g;
}

KeplerianElements propagate_two_body(const KeplerianElements& k, double dt) {
  KeplerianElements out = k;
  out.mean_anomaly = wrap_angle(k.mean_anomaly + mean_motion(k.a) * dt);
  return out;
}

CartesianState cartesian_from_kepler(const KeplerianElements& k) {
  const double e = k.e;
  const double big_e = solve_kepler(k.mean_anomaly, e);
  const double ce = std::cos(big_e);
  const double se = std::sin(big_e);
  const double eta = std::sqrt(1.0 - e * e);
  const double r = k.a * (1.0 - e * ce);
  const Vec3 pos_pf{k.a * (ce - e), k.a * eta * se, 0.0};
  const double vscale = std::sqrt(kMu * k.a) / r;
  const Vec3 vel_pf{-vscale * se, vscale * eta * ce, 0.0};
  const Mat3 rot = rot_z(k.raan) * rot_x(k.inc) * rot_z(k.argp);
  return CartesianState{rot * pos_pf, rot * vel_pf};
}

KeplerianElements kepler_from_cartesian(const CartesianState& s) {
  const double rn = s.r.norm();
  const double v2 = s.v.squaredNorm();
  const double energy = 0.5 * v2 - kMu / rn;
  const Vec3 hv = s.r.cross(s.v);
  const double hn = hv.norm();
  const Vec3 evec = s.v.cross(hv) / kMu - s.r / rn;
  const double e = evec.norm();
  const Vec3 nodev{-hv(1), hv(0), 0.0};  // z_hat x h
  const double nn = nodev.norm();

  KeplerianElements k;
  k.a = -kMu / (2.0 * energy);
  k.e = e;
  k.inc = std::acos(std::min(1.0, std::max(-1.0, hv(2) / hn)));

  const bool equatorial = nn < 1e-12 * hn;
  const bool circular = e < 1e-15;
  if (equatorial) {
    k.raan = 0.0;
  } else {
    k.raan = std::atan2(nodev(1), nodev(0));
  }

  // True anomaly and argument of perigee from the eccentricity vector; for
  // the degenerate circular/equatorial cases fall back to conventions that
  // keep raan + argp + nu consistent.
  const Vec3 nref = equatorial ? Vec3{1.0, 0.0, 0.0} : Vec3(nodev / nn);
  double nu;
  if (circular) {
    k.argp = 0.0;
    const Vec3 rhat = s.r / rn;
    nu = std::atan2(nref.cross(rhat).dot(hv.normalized()), nref.dot(rhat));
  } else {
    const Vec3 ehat = evec / e;
    const Vec3 hhat = hv / hn;
    k.argp = std::atan2(nref.cross(ehat).dot(hhat), nref.dot(ehat));
    const Vec3 rhat = s.r / rn;
    nu = std::atan2(ehat.cross(rhat).dot(hhat), ehat.dot(rhat));
  }

  const double big_e = std::atan2(std::sqrt(1.0 - e * e) * std::sin(nu),
                                  e + std::cos(nu));
  k.mean_anomaly = wrap_angle(big_e - e * std::sin(big_e));
  k.argp = wrap_angle(k.argp);
  k.raan = wrap_angle(k.raan);
  return k;
}

Mat3 rtn_axes(const CartesianState& s) {
  const Vec3 rhat = s.r.normalized();
  const Vec3 nhat = s.r.cross(s.v).normalized();
  const Vec3 that = nhat.cross(rhat);
  Mat3 m;
  m.row(0) = rhat;
  m.row(1) = that;
  m.row(2) = nhat;
  return m;
}

RtnState relative_state_rtn(const CartesianState& servicer, const CartesianState& target) {
  const Mat3 m = rtn_axes(servicer);
  return RtnState{m * (target.r - servicer.r), m * (target.v - servicer.v)};
}

}  // namespace relnav::orbitmech
