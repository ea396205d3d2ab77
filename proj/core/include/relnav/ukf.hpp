#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "relnav/asnc.hpp"
#include "relnav/attdyn.hpp"
#include "relnav/attmath.hpp"
#include "relnav/meas.hpp"
#include "relnav/orbitmech.hpp"
#include "relnav/procnoise.hpp"

// Unscented filter on the 12-dimensional relative state
//   x = [ROE (6); attitude-error MRP (3); omega_{S/T}^T (3)]
// with a reference quaternion carried alongside. The attitude error is
// kept as a modified Rodrigues parameter relative to the reference; after
// every measurement epoch the estimated error is folded into the
// reference and the MRP component is reset to zero, so the filter state
// stays far from the MRP singularity.
namespace relnav::ukf {

using asnc::Mat12;
using asnc::Vec12;
using attmath::Mrp;
using attmath::Quaternion;
using attmath::Vec3;

inline constexpr int kStateDim = 12;
inline constexpr int kNumSigma = 2 * kStateDim + 1;

/// chi-square 0.99 quantiles used by the innovation gates.
inline constexpr double kGate2Dof = 9.210340371976184;   // 2 DoF
inline constexpr double kGate3Dof = 11.344866730144373;  // 3 DoF

struct UkfParams {
  double alpha{0.1};
  double beta{2.0};
  double kappa{3.0 - kStateDim};
  double gate_2dof{kGate2Dof};
  double gate_3dof{kGate3Dof};
  bool gating_enabled{true};

  double lambda() const {
    return alpha * alpha * (kStateDim + kappa) - kStateDim;
  }
  double mean_weight(int i) const;
  double cov_weight(int i) const;
};

struct FilterState {
  orbitmech::Roe roe;
  Mrp mrp{Mrp::Zero()};
  Vec3 omega{Vec3::Zero()};  ///< omega_{S/T}^T [rad/s]
  Quaternion q_ref;          ///< q_{T/S} reference
  Mat12 p{Mat12::Identity()};

  Vec12 vec() const;
  void set_vec(const Vec12& x);
};

/// Scaled sigma-point set. conditioning_rounds counts how many times the
/// covariance square root had to be regularized (0 in healthy operation).
struct SigmaPoints {
  std::array<Vec12, kNumSigma> x;
  int conditioning_rounds{0};
};

/// Sigma points of (state.vec(), state.p). If the Cholesky factorization
/// fails, a jitter of 1e-12 * trace(P)/12 is added to the diagonal and
/// grown tenfold per retry until it succeeds.
SigmaPoints generate_sigma_points(const FilterState& state,
                                  const UkfParams& params);

/// Everything the prediction step needs to know about the servicer.
struct ServicerContext {
  orbitmech::EquinoctialElements elements;  ///< osculating, at epoch start
  attdyn::ServicerAttitudeFeed feed;        ///< omega_S^S and its rate
};

struct Prediction {
  FilterState state;  ///< predicted; mrp holds the weighted mean deviation
  Mat12 phi;          ///< linearized transition (for covariance matching)
  int conditioning_rounds{0};
};

/// Unscented time update over dt [s]: the orbit part propagates through
/// the near-circular transition matrix, the attitude part integrates the
/// relative dynamics per sigma point with 1 s substeps, and the
/// propagated quaternions are re-expressed as minimum-norm MRPs about the
/// propagated central point. q_process is added to the predicted
/// covariance.
Prediction time_update(const FilterState& state, const ServicerContext& ctx,
                       const attdyn::InertiaMatrix& inertia,
                       const Mat12& q_process, double dt,
                       const UkfParams& params);

/// Linearized state transition over dt at the given estimate, block
/// diagonal: orbit transition and closed-form attitude error transition
///   [[exp([w1] dt), -Lambda1(dt)], [0, exp(-[w2] dt)]]
/// with w1 = omega_{S/T}^T and w2 = R_{T/S} omega_S^S.
Mat12 linearized_phi(const FilterState& state, const ServicerContext& ctx,
                     double dt);

/// Measurement geometry and covariance policy.
struct MeasurementModel {
  meas::CameraModel camera;
  meas::KeypointSet keypoints;
  meas::RConfig r_config;
  attmath::Mat3 r_s_rtn;  ///< servicer body axes from RTN axes

  MeasurementModel();
};

/// Servicer body axes in the nadir/along-track hold used by the mission
/// profile: x = N_hat, y = -R_hat, z = -T_hat (boresight along -T).
attmath::Mat3 servicer_mount_from_rtn();

/// One gated innovation group.
struct GateDecision {
  enum class Kind { kKeypoint, kTranslation, kAttitude };
  Kind kind;
  int keypoint_index{-1};  ///< for kKeypoint groups
  double d2{0.0};
  double threshold{0.0};
  bool accepted{false};
};

struct InnovationReport {
  std::vector<GateDecision> groups;
  int groups_total{0};
  int groups_accepted{0};
  bool all_rejected{false};
  Vec12 dx{Vec12::Zero()};  ///< applied state correction
  int conditioning_rounds{0};
};

struct UpdateResult {
  FilterState state;
  InnovationReport report;
};

/// Unscented measurement update against one emulated network frame.
/// Sigma points are regenerated from the predicted covariance; the
/// predicted measurement stacks the valid landmark pixels, the body-frame
/// translation, and the attitude innovation MRP taken about the central
/// predicted quaternion. Each landmark is gated as a 2-DoF group and the
/// translation and attitude heads as 3-DoF groups, using the marginal
/// blocks of the joint innovation covariance; rejected groups are excised
/// before the gain. If every group is rejected the prediction is kept.
/// In all cases the posterior MRP is folded into the reference quaternion
/// and reset to zero.
UpdateResult measurement_update(const FilterState& predicted,
                                const meas::MeasurementFrame& frame,
                                const MeasurementModel& model,
                                const ServicerContext& ctx,
                                const UkfParams& params);

/// Initial-covariance policy for initialize_filter.
struct InitConfig {
  enum class Mode { kDerived, kFixed };
  Mode mode{Mode::kDerived};
  Mat12 p0_fixed{Mat12::Identity()};
  /// Derived mode: extra velocity sigma beyond the co-rotation model
  /// [m/s] and extra body-rate sigma beyond the non-tumbling assumption
  /// [rad/s].
  double extra_vel_sigma{0.005};
  double extra_omega_sigma{0.02};
};

/// Build the initial filter state from the first frame: translation and
/// attitude from the pose head, velocity from the co-rotation assumption
/// v = omega_S x t, body rate from the non-tumbling assumption
/// omega_{S/T}^T = R_{T/S} omega_S^S. In derived mode the initial
/// covariance propagates the pose-head covariance through that chain.
FilterState initialize_filter(const meas::MeasurementFrame& frame,
                              const MeasurementModel& model,
                              const ServicerContext& ctx,
                              const InitConfig& config);

/// Normalized estimation error squared of a posterior against truth;
/// the attitude error is the minimum-norm MRP of q_true relative to the
/// estimate.
double nees(const FilterState& state, const orbitmech::Roe& roe_true,
            const Quaternion& q_true, const Vec3& omega_true);

}  // namespace relnav::ukf
