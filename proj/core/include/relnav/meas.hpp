#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "relnav/attmath.hpp"

// Vision measurement front end: pinhole keypoint projection, heatmap
// statistics, and a stochastic emulator that stands in for a
// learned landmark-regression network. The emulator reproduces the error
// statistics of such a network (per-keypoint pixel noise with uniform
// outliers, and a pose head whose error is a two-component Gaussian
// mixture with occasional large rotation flips) without any image
// processing, so full-rate filter studies run in seconds.
namespace relnav::meas {

using attmath::Mat3;
using attmath::Quaternion;
using attmath::Vec3;
using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// A projected point fell on or behind the image plane (camera-frame
/// z <= 1e-6 m).
class BehindCamera : public std::runtime_error {
 public:
  BehindCamera() : std::runtime_error("point is behind the camera") {}
};

/// A heatmap with no positive intensity has no statistics.
class EmptyHeatmap : public std::runtime_error {
 public:
  EmptyHeatmap() : std::runtime_error("heatmap has no positive intensity") {}
};

/// Pinhole camera: intrinsics in pixels (upper-triangular, zero skew by
/// default) and extrinsics as the camera pose in the servicer body frame.
/// The default mounting aligns the camera axes with the body axes, whose
/// +z is the boresight toward the along-track direction of the target.
struct CameraModel {
  Mat3 intrinsics;
  Quaternion q_cs;  ///< q_{C/S}, camera attitude relative to the body
  Vec3 t_cs_s;      ///< camera position in the body frame [m]
  int width{1920};
  int height{1200};

  static CameraModel standard();
};

/// Target landmark set, coordinates in the target body frame [m].
struct KeypointSet {
  std::vector<int> ids;
  std::vector<Vec3> points;

  int size() const { return static_cast<int>(points.size()); }
};

/// Built-in landmark geometry: the eight corners of the target's
/// 0.80 x 0.75 x 0.32 m main body plus three antenna tips.
KeypointSet default_target_keypoints();

/// Parse a plain-text landmark file, one "id x y z" record per line
/// ('#' starts a comment). Requires at least four landmarks.
KeypointSet load_keypoints(const std::string& path);

/// Serialize in the same "id x y z" format.
std::string format_keypoints(const KeypointSet& kps);

/// Result of projecting one landmark.
struct ProjectedKeypoint {
  Vec2 px{Vec2::Zero()};
  bool valid{false};
};

/// Project a camera-frame point to pixels; throws BehindCamera when the
/// depth is not positive.
Vec2 project_point(const Vec3& p_cam, const CameraModel& cam);

/// Project the landmark set for a target pose given in camera
/// coordinates: p_cam = r_ct * k + t_tc_c. Landmarks behind the camera
/// are flagged invalid instead of throwing.
std::vector<ProjectedKeypoint> project_keypoints(const Mat3& r_ct,
                                                 const Vec3& t_tc_c,
                                                 const CameraModel& cam,
                                                 const KeypointSet& kps);

/// Peak location and second-moment matrix of a nonnegative intensity
/// grid. The peak is the strict argmax (ties resolved to the smallest
/// row-major index) and the covariance is the intensity-weighted spread
/// about the peak, columns as x and rows as y. Entries below zero are
/// treated as zero weight.
struct HeatmapStats {
  Vec2 peak;  ///< (x = column, y = row)
  Mat2 cov;
};
HeatmapStats heatmap_covariance(const Eigen::MatrixXd& grid);

/// One emulated network output per landmark.
struct KeypointMeasurement {
  Vec2 px{Vec2::Zero()};
  Mat2 cov{Mat2::Identity()};  ///< per-landmark confidence C_H [px^2]
  bool valid{false};
};

/// One emulated network output frame: landmark pixels plus the direct
/// pose regression (translation in the servicer body frame, relative
/// attitude quaternion q_{T/S}, both extrinsics-compensated).
struct MeasurementFrame {
  double timestamp{0.0};
  std::vector<KeypointMeasurement> keypoints;
  Vec3 t_e{Vec3::Zero()};
  Quaternion q_e;
  Mat6 c_e{Mat6::Identity()};  ///< emulator core covariance (informational)
};

/// Error-statistics profile of the emulated network. The pose heads use
/// a two-component mixture: a core Gaussian plus either a wide Gaussian
/// (translation) or a uniform large-angle rotation about a random axis.
struct EmulatorConfig {
  double sigma_px{0.0};          ///< keypoint pixel noise, per axis [px]
  double p_outlier_px{0.0};      ///< uniform image-frame outlier rate
  double sigma_trans_core{0.0};  ///< [m], per axis
  double sigma_trans_out{0.0};   ///< [m], per axis
  double p_outlier_trans{0.0};
  double sigma_rot_core{0.0};    ///< [rad], per rotation-vector axis
  double p_outlier_rot{0.0};
  double outlier_rot_min{M_PI / 6.0};  ///< [rad]
  double outlier_rot_max{M_PI};        ///< [rad]
  bool rasterize_heatmaps{false};

  /// Clean synthetic-imagery profile (no outliers).
  static EmulatorConfig synthetic();
  /// Hardware-in-the-loop profile for the far-range hold scenario.
  static EmulatorConfig lightbox_roe1();
  /// Hardware-in-the-loop profile for the approach scenario.
  static EmulatorConfig lightbox_roe2();
};

/// Emulate one network inference against the true relative pose
/// (t_{T/S}^S, q_{T/S}). Draw order is fixed, so a given rng seed yields
/// a reproducible stream.
MeasurementFrame emulate_cnn(const Vec3& t_ts_s, const Quaternion& q_ts,
                             const CameraModel& cam, const KeypointSet& kps,
                             const EmulatorConfig& cfg, std::mt19937_64& rng,
                             double timestamp);

/// Per-axis pose covariance assigned to the pose head under clean
/// synthetic imagery, before scaling: the translation and rotation
/// sigmas reproduce reference per-image mean errors of 0.031 m and
/// 0.885 deg.
Mat6 synthetic_pose_covariance();

/// Assembly policy for the measurement covariance.
struct RConfig {
  double pose_scale{1000.0};  ///< multiplier on the pose-head covariance
  double px_var_floor{0.25};  ///< lower bound on C_H diagonals [px^2]
  Mat6 c_e_syn{synthetic_pose_covariance()};
};

/// Block-diagonal covariance for the stacked measurement
/// [keypoints (2K); translation (3); attitude (3)]: floored per-landmark
/// C_H blocks followed by pose_scale * c_e_syn. Rows are allocated for
/// every landmark slot in the frame, including invalid ones (the filter
/// excises those rows).
Eigen::MatrixXd build_R(const MeasurementFrame& frame, const RConfig& cfg);

}  // namespace relnav::meas
