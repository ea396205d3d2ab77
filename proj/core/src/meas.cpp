#include "relnav/meas.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace relnav::meas {

namespace {

// Per-axis sigmas that reproduce the reference per-image mean error
// norms (0.031 m translation, 0.885 deg rotation) for an isotropic
// 3-D Gaussian: E||N(0, s^2 I3)|| = s * 2*sqrt(2)/sqrt(pi).
constexpr double kChi3MeanFactor = 1.5957691216057308;
constexpr double kSynTransSigma = 0.031 / kChi3MeanFactor;          // [m]
constexpr double kSynRotSigma =
    0.885 * M_PI / 180.0 / kChi3MeanFactor;                         // [rad]

constexpr double kMinDepth = 1e-6;      // [m]
constexpr double kMinKeypointVar = 1e-12;  // [px^2]
constexpr int kRasterHalf = 16;         // crop half-width for rasterization
constexpr double kRasterSigma = 2.0;    // blob sigma [px]

double standard_normal(std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  return d(rng);
}

double uniform01(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  return d(rng);
}

Vec3 gaussian_vec3(std::mt19937_64& rng, double sigma) {
  return Vec3(sigma * standard_normal(rng), sigma * standard_normal(rng),
              sigma * standard_normal(rng));
}

Vec3 random_unit_axis(std::mt19937_64& rng) {
  while (true) {
    const Vec3 v(standard_normal(rng), standard_normal(rng),
                 standard_normal(rng));
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

}  // namespace

CameraModel CameraModel::standard() {
  CameraModel cam;
  cam.intrinsics << 3003.0, 0.0, 960.0,
                    0.0, 3003.0, 600.0,
                    0.0, 0.0, 1.0;
  cam.q_cs = Quaternion::identity();
  cam.t_cs_s = Vec3::Zero();
  cam.width = 1920;
  cam.height = 1200;
  return cam;
}

KeypointSet default_target_keypoints() {
  KeypointSet k;
  const double hx = 0.40, hy = 0.375, hz = 0.16;
  k.points = {
      {-hx, -hy, -hz}, {hx, -hy, -hz}, {hx, hy, -hz}, {-hx, hy, -hz},
      {-hx, -hy, hz},  {hx, -hy, hz},  {hx, hy, hz},  {-hx, hy, hz},
      {0.25, 0.30, 0.45}, {-0.35, 0.20, 0.38}, {0.00, -0.33, 0.42}};
  k.ids.resize(k.points.size());
  for (size_t i = 0; i < k.ids.size(); ++i) k.ids[i] = static_cast<int>(i);
  return k;
}

KeypointSet load_keypoints(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open keypoint file: " + path);
  }
  KeypointSet k;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    int id;
    double x, y, z;
    if (!(ss >> id)) continue;  // blank line
    if (!(ss >> x >> y >> z) || !std::isfinite(x) || !std::isfinite(y) ||
        !std::isfinite(z)) {
      throw std::runtime_error("malformed keypoint record at " + path + ":" +
                               std::to_string(lineno));
    }
    k.ids.push_back(id);
    k.points.emplace_back(x, y, z);
  }
  if (k.size() < 4) {
    throw std::runtime_error("keypoint file needs at least 4 landmarks: " +
                             path);
  }
  return k;
}

std::string format_keypoints(const KeypointSet& kps) {
  std::ostringstream out;
  for (int i = 0; i < kps.size(); ++i) {
    out << kps.ids[i] << " " << kps.points[i].x() << " " << kps.points[i].y()
        << " " << kps.points[i].z() << "\n";
  }
  return out.str();
}

Vec2 project_point(const Vec3& p_cam, const CameraModel& cam) {
  if (!(p_cam.z() > kMinDepth)) {
    throw BehindCamera();
  }
  const Vec3 h = cam.intrinsics * p_cam;
  return Vec2(h.x() / h.z(), h.y() / h.z());
}

std::vector<ProjectedKeypoint> project_keypoints(const Mat3& r_ct,
                                                 const Vec3& t_tc_c,
                                                 const CameraModel& cam,
                                                 const KeypointSet& kps) {
  std::vector<ProjectedKeypoint> out(kps.size());
  for (int i = 0; i < kps.size(); ++i) {
    const Vec3 p_cam = r_ct * kps.points[i] + t_tc_c;
    try {
      out[i].px = project_point(p_cam, cam);
      out[i].valid = true;
    } catch (const BehindCamera&) {
      out[i].valid = false;
    }
  }
  return out;
}

HeatmapStats heatmap_covariance(const Eigen::MatrixXd& grid) {
  if (grid.size() == 0) {
    throw EmptyHeatmap();
  }
  double total = 0.0;
  double peak_val = 0.0;
  int peak_row = -1, peak_col = -1;
  for (int i = 0; i < grid.rows(); ++i) {
    for (int j = 0; j < grid.cols(); ++j) {
      const double v = std::max(0.0, grid(i, j));
      total += v;
      if (v > peak_val) {
        peak_val = v;
        peak_row = i;
        peak_col = j;
      }
    }
  }
  if (!(total > 0.0)) {
    throw EmptyHeatmap();
  }
  HeatmapStats s;
  s.peak = Vec2(peak_col, peak_row);
  s.cov.setZero();
  for (int i = 0; i < grid.rows(); ++i) {
    for (int j = 0; j < grid.cols(); ++j) {
      const double w = std::max(0.0, grid(i, j)) / total;
      if (w == 0.0) continue;
      const Vec2 d(j - s.peak.x(), i - s.peak.y());
      s.cov += w * d * d.transpose();
    }
  }
  return s;
}

EmulatorConfig EmulatorConfig::synthetic() {
  EmulatorConfig c;
  c.sigma_px = 1.0;
  c.sigma_trans_core = kSynTransSigma;
  c.sigma_rot_core = kSynRotSigma;
  return c;
}

EmulatorConfig EmulatorConfig::lightbox_roe1() {
  EmulatorConfig c;
  c.sigma_px = 2.5;
  c.p_outlier_px = 0.03;
  c.sigma_trans_core = 0.093;
  c.sigma_trans_out = 0.43;
  c.p_outlier_trans = 0.055;
  c.sigma_rot_core = 0.97 * M_PI / 180.0;
  c.p_outlier_rot = 0.155;
  return c;
}

EmulatorConfig EmulatorConfig::lightbox_roe2() {
  EmulatorConfig c;
  c.sigma_px = 2.5;
  c.p_outlier_px = 0.03;
  c.sigma_trans_core = 0.0555;
  c.sigma_trans_out = 0.531;
  c.p_outlier_trans = 0.015;
  c.sigma_rot_core = 2.0 * M_PI / 180.0;
  c.p_outlier_rot = 0.0225;
  return c;
}

namespace {

/// Rasterized fallback path: draw a Gaussian blob around the (already
/// noisy) pixel on a local crop and read the measurement back through
/// heatmap_covariance, exercising the full heatmap pipeline.
void rasterize_measurement(KeypointMeasurement& m) {
  const double cx = m.px.x();
  const double cy = m.px.y();
  const int ox = static_cast<int>(std::floor(cx)) - kRasterHalf;
  const int oy = static_cast<int>(std::floor(cy)) - kRasterHalf;
  Eigen::MatrixXd crop(2 * kRasterHalf + 1, 2 * kRasterHalf + 1);
  for (int i = 0; i < crop.rows(); ++i) {
    for (int j = 0; j < crop.cols(); ++j) {
      const double dx = (ox + j) - cx;
      const double dy = (oy + i) - cy;
      crop(i, j) =
          std::exp(-(dx * dx + dy * dy) / (2.0 * kRasterSigma * kRasterSigma));
    }
  }
  const HeatmapStats s = heatmap_covariance(crop);
  m.px = Vec2(ox + s.peak.x(), oy + s.peak.y());
  m.cov = s.cov;
}

}  // namespace

MeasurementFrame emulate_cnn(const Vec3& t_ts_s, const Quaternion& q_ts,
                             const CameraModel& cam, const KeypointSet& kps,
                             const EmulatorConfig& cfg, std::mt19937_64& rng,
                             double timestamp) {
  MeasurementFrame frame;
  frame.timestamp = timestamp;

  // Landmark head: project the true geometry, then corrupt.
  const Mat3 r_ts = attmath::quat_to_dcm(q_ts);
  const Mat3 r_cs = attmath::quat_to_dcm(cam.q_cs);
  const Mat3 r_ct = r_cs * r_ts.transpose();
  const Vec3 t_tc_c = r_cs * (t_ts_s - cam.t_cs_s);
  const auto projected = project_keypoints(r_ct, t_tc_c, cam, kps);

  const double var_px = std::max(cfg.sigma_px * cfg.sigma_px, kMinKeypointVar);
  frame.keypoints.resize(projected.size());
  for (size_t i = 0; i < projected.size(); ++i) {
    KeypointMeasurement& m = frame.keypoints[i];
    m.valid = projected[i].valid;
    m.cov = var_px * Mat2::Identity();
    if (!m.valid) continue;
    m.px = projected[i].px + Vec2(cfg.sigma_px * standard_normal(rng),
                                  cfg.sigma_px * standard_normal(rng));
    if (cfg.p_outlier_px > 0.0 && uniform01(rng) < cfg.p_outlier_px) {
      m.px = Vec2(cam.width * uniform01(rng), cam.height * uniform01(rng));
    }
    if (cfg.rasterize_heatmaps) {
      rasterize_measurement(m);
    }
  }

  // Pose head, translation: two-component Gaussian mixture.
  const bool trans_outlier =
      cfg.p_outlier_trans > 0.0 && uniform01(rng) < cfg.p_outlier_trans;
  const double sigma_t =
      trans_outlier ? cfg.sigma_trans_out : cfg.sigma_trans_core;
  frame.t_e = t_ts_s + gaussian_vec3(rng, sigma_t);

  // Pose head, rotation: core rotation-vector Gaussian, with occasional
  // large-angle flips about a random axis.
  const bool rot_outlier =
      cfg.p_outlier_rot > 0.0 && uniform01(rng) < cfg.p_outlier_rot;
  Vec3 rotvec;
  if (rot_outlier) {
    const double angle =
        cfg.outlier_rot_min +
        (cfg.outlier_rot_max - cfg.outlier_rot_min) * uniform01(rng);
    rotvec = angle * random_unit_axis(rng);
  } else {
    rotvec = gaussian_vec3(rng, cfg.sigma_rot_core);
  }
  frame.q_e = attmath::quat_mul(attmath::quat_exp(rotvec), q_ts).normalized();

  frame.c_e.setZero();
  frame.c_e.topLeftCorner<3, 3>() =
      cfg.sigma_trans_core * cfg.sigma_trans_core * Mat3::Identity();
  frame.c_e.bottomRightCorner<3, 3>() =
      cfg.sigma_rot_core * cfg.sigma_rot_core * Mat3::Identity();
  return frame;
}

Mat6 synthetic_pose_covariance() {
  Mat6 c = Mat6::Zero();
  c.topLeftCorner<3, 3>() =
      kSynTransSigma * kSynTransSigma * Mat3::Identity();
  c.bottomRightCorner<3, 3>() = kSynRotSigma * kSynRotSigma * Mat3::Identity();
  return c;
}

Eigen::MatrixXd build_R(const MeasurementFrame& frame, const RConfig& cfg) {
  const int k = static_cast<int>(frame.keypoints.size());
  const int m = 2 * k + 6;
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < k; ++i) {
    Mat2 c = frame.keypoints[i].cov;
    c(0, 0) = std::max(c(0, 0), cfg.px_var_floor);
    c(1, 1) = std::max(c(1, 1), cfg.px_var_floor);
    r.block<2, 2>(2 * i, 2 * i) = c;
  }
  r.block<6, 6>(2 * k, 2 * k) = cfg.pose_scale * cfg.c_e_syn;
  return r;
}

}  // namespace relnav::meas
