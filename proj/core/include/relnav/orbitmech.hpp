#pragma once
// Absolute and relative orbital mechanics: Keplerian/equinoctial element
// conversions, relative orbital elements (ROE), the near-circular ROE state
// transition, Gauss variational equations mapped to equinoctial rates, and
// two-body propagation plumbing.

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace relnav::orbitmech {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;

/// Earth gravitational parameter [m^3/s^2].
inline constexpr double kMu = 3.986004418e14;

/// Thrown when tan(i/2)-based elements are requested too close to i = pi.
class RetrogradeSingular : public std::domain_error {
 public:
  explicit RetrogradeSingular(const std::string& what) : std::domain_error(what) {}
};

/// Thrown when a near-circular linear map is requested outside its domain.
class EccentricityOutOfRange : public std::domain_error {
 public:
  explicit EccentricityOutOfRange(const std::string& what) : std::domain_error(what) {}
};

/// Classical Keplerian elements. Angles in radians; a in meters.
struct KeplerianElements {
  double a{0.0};            ///< semi-major axis [m]
  double e{0.0};            ///< eccentricity
  double inc{0.0};          ///< inclination, in [0, pi]
  double raan{0.0};         ///< right ascension of ascending node
  double argp{0.0};         ///< argument of perigee
  double mean_anomaly{0.0}; ///< mean anomaly
};

/// Nonsingular equinoctial elements:
/// (a, e_x, e_y, i_x, i_y, lambda) with e_x = e cos(raan+argp),
/// e_y = e sin(raan+argp), i_x = tan(i/2) cos(raan), i_y = tan(i/2) sin(raan),
/// lambda = raan + argp + M (mean longitude).
struct EquinoctialElements {
  double a{0.0};
  double ex{0.0};
  double ey{0.0};
  double ix{0.0};
  double iy{0.0};
  double lambda{0.0};

  Vec6 vec() const { return (Vec6() << a, ex, ey, ix, iy, lambda).finished(); }
};

/// Relative orbital elements of the target with respect to the servicer:
/// (da, dlambda, dex, dey, dix, diy) where da = (a_T - a_S)/a_S and the rest
/// are plain element differences; dlambda is wrapped to (-pi, pi].
struct Roe {
  double da{0.0};
  double dlambda{0.0};
  double dex{0.0};
  double dey{0.0};
  double dix{0.0};
  double diy{0.0};

  Vec6 vec() const { return (Vec6() << da, dlambda, dex, dey, dix, diy).finished(); }
  static Roe from_vec(const Vec6& v) { return Roe{v(0), v(1), v(2), v(3), v(4), v(5)}; }
};

/// Target state relative to the servicer, expressed in the servicer's RTN
/// frame (R radial, T along-track, N orbit-normal). Velocity components are
/// the inertial velocity difference resolved along the RTN axes.
struct RtnState {
  Vec3 position{Vec3::Zero()};  ///< [m]
  Vec3 velocity{Vec3::Zero()};  ///< [m/s]

  Vec6 vec() const {
    return (Vec6() << position(0), position(1), position(2),
            velocity(0), velocity(1), velocity(2))
        .finished();
  }
  static RtnState from_vec(const Vec6& v) {
    return RtnState{v.head<3>(), v.tail<3>()};
  }
};

/// Inertial position/velocity pair [m, m/s].
struct CartesianState {
  Vec3 r{Vec3::Zero()};
  Vec3 v{Vec3::Zero()};
};

/// Wrap an angle to (-pi, pi].
double wrap_angle(double x);

/// Mean motion n = sqrt(mu/a^3) [rad/s].
double mean_motion(double a);

/// Orbital period 2*pi/n [s].
double period(double a);

/// Solve Kepler's equation E - e sin(E) = M for the eccentric anomaly.
double solve_kepler(double mean_anomaly, double e);

EquinoctialElements kepler_to_equinoctial(const KeplerianElements& k);
KeplerianElements equinoctial_to_kepler(const EquinoctialElements& q);

/// Element-difference ROE of a target/servicer pair.
Roe roe_from_pair(const EquinoctialElements& target, const EquinoctialElements& servicer);

/// Reconstruct target elements from servicer elements and a ROE set
/// (inverse of roe_from_pair).
EquinoctialElements apply_roe(const EquinoctialElements& servicer, const Roe& roe);

/// State transition matrix of the ROE state over dt under two-body dynamics
/// at small separation: identity except Phi[dlambda, da] = -1.5 n dt.
Mat6 stm_ns_roe(const EquinoctialElements& servicer, double dt);

/// Linear near-circular map from the ROE vector to the stacked RTN state
/// [position; velocity]. Built by central-difference linearization of the
/// exact nonlinear chain (ROE -> target elements -> Cartesian -> relative
/// RTN), so it is first order in the ROE and valid to all orders in e within
/// the e < 0.05 guard. Throws EccentricityOutOfRange at e >= 0.05.
Mat6 roe_to_rtn_map(const EquinoctialElements& servicer);

RtnState roe_to_rtn(const Roe& roe, const EquinoctialElements& servicer);
Roe rtn_to_roe(const RtnState& state, const EquinoctialElements& servicer);

/// Gauss variational equations as a 6x3 sensitivity: d(equinoctial)/dt =
/// gve_gamma(elements) * f_rtn for a perturbing acceleration f_rtn in the RTN
/// frame. Column order (R, T, N); row order (a, e_x, e_y, i_x, i_y, lambda).
/// The Keplerian drift n is not included (it lives in the state transition).
Mat63 gve_gamma(const EquinoctialElements& servicer);

/// Advance the mean anomaly by n*dt; all other elements are untouched.
KeplerianElements propagate_two_body(const KeplerianElements& k, double dt);

/// Inertial state from Keplerian elements (perifocal construction).
CartesianState cartesian_from_kepler(const KeplerianElements& k);

/// Keplerian elements from an inertial state (bound orbits only).
KeplerianElements kepler_from_cartesian(const CartesianState& s);

/// Rotation matrix with rows (R_hat, T_hat, N_hat): x_rtn = rtn_axes(s) * x_eci.
Mat3 rtn_axes(const CartesianState& s);

/// Exact relative state of target w.r.t. servicer in the servicer RTN frame;
/// velocity is the inertial velocity difference resolved in RTN axes.
RtnState relative_state_rtn(const CartesianState& servicer, const CartesianState& target);

}  // namespace relnav::orbitmech
