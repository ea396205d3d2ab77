#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "relnav/attmath.hpp"
#include "relnav/meas.hpp"

using namespace relnav::meas;
using relnav::attmath::quat_exp;
using relnav::attmath::quat_mul;
using relnav::attmath::quat_to_dcm;
using relnav::attmath::Quaternion;
using relnav::attmath::Vec3;

namespace {

constexpr double kDeg = M_PI / 180.0;
constexpr double kChi3Mean = 1.5957691216057308;  // E||N(0, I3)||

double rot_error_deg(const Quaternion& a, const Quaternion& b) {
  return relnav::attmath::angle_between(a, b) / kDeg;
}

std::filesystem::path temp_file(const std::string& stem) {
  return std::filesystem::temp_directory_path() / stem;
}

}  // namespace

TEST_SUITE("meas") {

TEST_CASE("pinhole projection against a scalar homogeneous chain") {
  const CameraModel cam = CameraModel::standard();
  const KeypointSet kps = default_target_keypoints();
  const Mat3 r_ct = quat_to_dcm(quat_exp(Vec3(0.3, -0.5, 0.9)));
  const Vec3 t_tc_c(0.3, -0.2, 8.0);
  const auto projected = project_keypoints(r_ct, t_tc_c, cam, kps);
  REQUIRE(projected.size() == static_cast<size_t>(kps.size()));
  for (int i = 0; i < kps.size(); ++i) {
    const Vec3 p = r_ct * kps.points[i] + t_tc_c;
    REQUIRE(projected[i].valid);
    // Scalar per-row evaluation of the homogeneous projection.
    const double denom = cam.intrinsics(2, 0) * p.x() +
                         cam.intrinsics(2, 1) * p.y() +
                         cam.intrinsics(2, 2) * p.z();
    const double u = (cam.intrinsics(0, 0) * p.x() +
                      cam.intrinsics(0, 1) * p.y() +
                      cam.intrinsics(0, 2) * p.z()) /
                     denom;
    const double v = (cam.intrinsics(1, 0) * p.x() +
                      cam.intrinsics(1, 1) * p.y() +
                      cam.intrinsics(1, 2) * p.z()) /
                     denom;
    CHECK(std::abs(projected[i].px.x() - u) < 1e-9);
    CHECK(std::abs(projected[i].px.y() - v) < 1e-9);
  }
}

TEST_CASE("standard camera intrinsics") {
  const CameraModel cam = CameraModel::standard();
  CHECK(cam.intrinsics(0, 0) == 3003.0);
  CHECK(cam.intrinsics(1, 1) == 3003.0);
  CHECK(cam.intrinsics(0, 2) == 960.0);
  CHECK(cam.intrinsics(1, 2) == 600.0);
  CHECK(cam.intrinsics(2, 2) == 1.0);
  CHECK(cam.intrinsics(1, 0) == 0.0);
  CHECK(cam.width == 1920);
  CHECK(cam.height == 1200);
  // A point on the boresight lands on the principal point.
  const Vec2 px = project_point(Vec3(0.0, 0.0, 5.0), cam);
  CHECK(px.x() == doctest::Approx(960.0));
  CHECK(px.y() == doctest::Approx(600.0));
}

TEST_CASE("points behind the camera throw or are flagged") {
  const CameraModel cam = CameraModel::standard();
  CHECK_THROWS_AS(project_point(Vec3(0.1, 0.1, 0.0), cam), BehindCamera);
  CHECK_THROWS_AS(project_point(Vec3(0.1, 0.1, -3.0), cam), BehindCamera);
  // Split set: geometry straddling the image plane flags, not throws.
  KeypointSet kps;
  kps.ids = {0, 1};
  kps.points = {Vec3(0.0, 0.0, 1.0), Vec3(0.0, 0.0, -3.0)};
  const auto projected =
      project_keypoints(Mat3::Identity(), Vec3(0.0, 0.0, 1.0), cam, kps);
  CHECK(projected[0].valid);
  CHECK_FALSE(projected[1].valid);
}

TEST_CASE("heatmap peak, tie-break, and second moment") {
  SUBCASE("known spread about the peak") {
    Eigen::MatrixXd grid = Eigen::MatrixXd::Zero(5, 7);
    grid(2, 3) = 4.0;
    grid(2, 2) = 1.0;
    grid(2, 4) = 1.0;
    grid(1, 3) = 2.0;
    grid(3, 3) = 2.0;
    const HeatmapStats s = heatmap_covariance(grid);
    CHECK(s.peak.x() == 3.0);
    CHECK(s.peak.y() == 2.0);
    // Weighted spread about the peak cell: total weight 10;
    // x-offsets +-1 with weight 1 each, y-offsets +-1 with weight 2 each.
    CHECK(s.cov(0, 0) == doctest::Approx(2.0 / 10.0).epsilon(1e-14));
    CHECK(s.cov(1, 1) == doctest::Approx(4.0 / 10.0).epsilon(1e-14));
    CHECK(s.cov(0, 1) == doctest::Approx(0.0));
    CHECK(s.cov(1, 0) == doctest::Approx(0.0));
  }

  SUBCASE("ties resolve to the smallest row-major index") {
    Eigen::MatrixXd grid = Eigen::MatrixXd::Zero(5, 7);
    grid(1, 4) = 5.0;
    grid(3, 2) = 5.0;
    const HeatmapStats s = heatmap_covariance(grid);
    CHECK(s.peak.x() == 4.0);
    CHECK(s.peak.y() == 1.0);
  }

  SUBCASE("negative intensities carry no weight") {
    Eigen::MatrixXd grid = Eigen::MatrixXd::Zero(3, 3);
    grid(1, 1) = 2.0;
    grid(0, 0) = -50.0;  // must not perturb the spread
    const HeatmapStats s = heatmap_covariance(grid);
    CHECK(s.peak.x() == 1.0);
    CHECK(s.peak.y() == 1.0);
    CHECK(s.cov.norm() == 0.0);
  }

  SUBCASE("no positive intensity throws") {
    CHECK_THROWS_AS(heatmap_covariance(Eigen::MatrixXd::Zero(4, 4)),
                    EmptyHeatmap);
    Eigen::MatrixXd neg = Eigen::MatrixXd::Constant(4, 4, -1.0);
    CHECK_THROWS_AS(heatmap_covariance(neg), EmptyHeatmap);
    CHECK_THROWS_AS(heatmap_covariance(Eigen::MatrixXd()), EmptyHeatmap);
  }
}

TEST_CASE("emulator reproduces the clean-imagery error statistics") {
  const CameraModel cam = CameraModel::standard();
  const KeypointSet kps = default_target_keypoints();
  const EmulatorConfig cfg = EmulatorConfig::synthetic();
  const Vec3 t_true(0.0, 0.0, 8.0);
  const Quaternion q_true = quat_exp(Vec3(0.2, -0.4, 0.1));
  std::mt19937_64 rng(123);

  const int n = 60000;
  double sum_t = 0.0, sum_q = 0.0;
  double sum_px = 0.0, sum_px2 = 0.0;
  int n_px = 0;
  const Mat3 r_ct =
      quat_to_dcm(cam.q_cs) * quat_to_dcm(q_true).transpose();
  const Vec3 t_tc_c = quat_to_dcm(cam.q_cs) * (t_true - cam.t_cs_s);
  const auto clean = project_keypoints(r_ct, t_tc_c, cam, kps);
  for (int i = 0; i < n; ++i) {
    const MeasurementFrame f =
        emulate_cnn(t_true, q_true, cam, kps, cfg, rng, i * 5.0);
    sum_t += (f.t_e - t_true).norm();
    sum_q += rot_error_deg(f.q_e, q_true);
    for (int j = 0; j < kps.size(); ++j) {
      REQUIRE(f.keypoints[j].valid);
      CHECK((f.keypoints[j].cov - Mat2::Identity()).norm() == 0.0);
      const Vec2 e = f.keypoints[j].px - clean[j].px;
      sum_px += e.x() + e.y();
      sum_px2 += e.x() * e.x() + e.y() * e.y();
      n_px += 2;
    }
    // The advertised core covariance matches the synthetic profile.
    CHECK((f.c_e - synthetic_pose_covariance()).norm() == 0.0);
  }
  const double mean_t = sum_t / n;
  const double mean_q = sum_q / n;
  CHECK(mean_t == doctest::Approx(0.031).epsilon(0.03));
  CHECK(mean_q == doctest::Approx(0.885).epsilon(0.03));
  const double px_mean = sum_px / n_px;
  const double px_std = std::sqrt(sum_px2 / n_px - px_mean * px_mean);
  CHECK(std::abs(px_mean) < 0.02);
  CHECK(px_std == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("emulator reproduces the approach-scenario mixture statistics") {
  const CameraModel cam = CameraModel::standard();
  const KeypointSet kps = default_target_keypoints();
  const EmulatorConfig cfg = EmulatorConfig::lightbox_roe2();
  const Vec3 t_true(0.1, -0.2, 9.0);
  const Quaternion q_true = quat_exp(Vec3(-0.3, 0.2, 0.5));
  std::mt19937_64 rng(456);

  const int n = 60000;
  double sum_t = 0.0, sum_t2 = 0.0, sum_q = 0.0, sum_q2 = 0.0;
  int px_far = 0, px_total = 0;
  const Mat3 r_ct =
      quat_to_dcm(cam.q_cs) * quat_to_dcm(q_true).transpose();
  const Vec3 t_tc_c = quat_to_dcm(cam.q_cs) * (t_true - cam.t_cs_s);
  const auto clean = project_keypoints(r_ct, t_tc_c, cam, kps);
  for (int i = 0; i < n; ++i) {
    const MeasurementFrame f =
        emulate_cnn(t_true, q_true, cam, kps, cfg, rng, i * 5.0);
    const double et = (f.t_e - t_true).norm();
    const double eq = rot_error_deg(f.q_e, q_true);
    sum_t += et;
    sum_t2 += et * et;
    sum_q += eq;
    sum_q2 += eq * eq;
    for (int j = 0; j < kps.size(); ++j) {
      if (!f.keypoints[j].valid) continue;
      ++px_total;
      if ((f.keypoints[j].px - clean[j].px).norm() > 15.0) ++px_far;
    }
  }
  const double mean_t = sum_t / n;
  const double std_t = std::sqrt(sum_t2 / n - mean_t * mean_t);
  const double mean_q = sum_q / n;
  const double std_q = std::sqrt(sum_q2 / n - mean_q * mean_q);
  // Mixture expectations for the profile: mean/std 0.0999/0.1086 m,
  // 5.482/16.49 deg.
  CHECK(mean_t == doctest::Approx(0.0999).epsilon(0.04));
  CHECK(std_t == doctest::Approx(0.1086).epsilon(0.08));
  CHECK(mean_q == doctest::Approx(5.482).epsilon(0.05));
  CHECK(std_q == doctest::Approx(16.49).epsilon(0.10));
  // Keypoint outliers land nearly uniformly over the image, so the
  // far-miss rate recovers the outlier probability.
  const double rate = static_cast<double>(px_far) / px_total;
  CHECK(rate > 0.024);
  CHECK(rate < 0.036);
}

TEST_CASE("emulator far-range-hold rotation statistics") {
  const CameraModel cam = CameraModel::standard();
  const KeypointSet kps = default_target_keypoints();
  const EmulatorConfig cfg = EmulatorConfig::lightbox_roe1();
  const Vec3 t_true(0.0, 0.0, 8.0);
  const Quaternion q_true = Quaternion::identity();
  std::mt19937_64 rng(789);
  const int n = 60000;
  double sum_q = 0.0;
  for (int i = 0; i < n; ++i) {
    const MeasurementFrame f =
        emulate_cnn(t_true, q_true, cam, kps, cfg, rng, i * 5.0);
    sum_q += rot_error_deg(f.q_e, q_true);
  }
  // 0.845 * E[chi3] * 0.97 deg + 0.155 * 105 deg = 17.58 deg.
  CHECK(sum_q / n == doctest::Approx(17.58).epsilon(0.05));
}

TEST_CASE("same seed gives a bitwise-identical frame stream") {
  const CameraModel cam = CameraModel::standard();
  const KeypointSet kps = default_target_keypoints();
  const EmulatorConfig cfg = EmulatorConfig::lightbox_roe2();
  const Vec3 t_true(0.1, -0.2, 9.0);
  const Quaternion q_true = quat_exp(Vec3(0.0, 0.3, -0.1));
  std::mt19937_64 rng_a(31415), rng_b(31415);
  for (int i = 0; i < 50; ++i) {
    const MeasurementFrame a =
        emulate_cnn(t_true, q_true, cam, kps, cfg, rng_a, i * 5.0);
    const MeasurementFrame b =
        emulate_cnn(t_true, q_true, cam, kps, cfg, rng_b, i * 5.0);
    CHECK((a.t_e - b.t_e).norm() == 0.0);
    CHECK((a.q_e.wxyz() - b.q_e.wxyz()).norm() == 0.0);
    for (int j = 0; j < kps.size(); ++j) {
      CHECK((a.keypoints[j].px - b.keypoints[j].px).norm() == 0.0);
    }
  }
}

TEST_CASE("rasterized heatmap path quantizes the landmark read-out") {
  const CameraModel cam = CameraModel::standard();
  const KeypointSet kps = default_target_keypoints();
  EmulatorConfig plain = EmulatorConfig::synthetic();
  EmulatorConfig raster = EmulatorConfig::synthetic();
  raster.rasterize_heatmaps = true;
  const Vec3 t_true(0.0, 0.0, 8.0);
  const Quaternion q_true = Quaternion::identity();
  std::mt19937_64 rng_a(2718), rng_b(2718);
  const MeasurementFrame a =
      emulate_cnn(t_true, q_true, cam, kps, plain, rng_a, 0.0);
  const MeasurementFrame b =
      emulate_cnn(t_true, q_true, cam, kps, raster, rng_b, 0.0);
  for (int j = 0; j < kps.size(); ++j) {
    REQUIRE(b.keypoints[j].valid);
    // Identical draws, so the rasterized peak sits on the cell nearest
    // the continuous pixel.
    CHECK((a.keypoints[j].px - b.keypoints[j].px).lpNorm<Eigen::Infinity>() <=
          0.5 + 1e-12);
    // The blob spread is a sane pixel-scale confidence.
    CHECK(b.keypoints[j].cov(0, 0) > 0.05);
    CHECK(b.keypoints[j].cov(0, 0) < 25.0);
    CHECK(b.keypoints[j].cov(1, 1) > 0.05);
    CHECK(b.keypoints[j].cov(1, 1) < 25.0);
  }
}

TEST_CASE("measurement covariance assembly") {
  MeasurementFrame frame;
  frame.keypoints.resize(3);
  frame.keypoints[0].cov << 0.04, 0.01, 0.01, 0.04;  // below the floor
  frame.keypoints[0].valid = true;
  frame.keypoints[1].cov = 4.0 * Mat2::Identity();
  frame.keypoints[1].valid = true;
  frame.keypoints[2].cov = 2.0 * Mat2::Identity();
  frame.keypoints[2].valid = false;  // rows still allocated
  RConfig cfg;                       // pose_scale 1000, floor 0.25

  const Eigen::MatrixXd r = build_R(frame, cfg);
  REQUIRE(r.rows() == 12);
  REQUIRE(r.cols() == 12);
  CHECK(r(0, 0) == 0.25);
  CHECK(r(1, 1) == 0.25);
  CHECK(r(0, 1) == 0.01);  // off-diagonals are preserved
  CHECK(r(2, 2) == 4.0);
  CHECK(r(3, 3) == 4.0);
  CHECK(r(4, 4) == 2.0);
  CHECK((r.block<6, 6>(6, 6) - 1000.0 * cfg.c_e_syn).norm() == 0.0);
  // Everything off the block diagonal is zero.
  CHECK(r.block<2, 2>(0, 2).norm() == 0.0);
  CHECK(r.block<6, 6>(0, 6).norm() == 0.0);

  // The synthetic pose covariance reproduces the advertised means.
  const double sig_t = std::sqrt(cfg.c_e_syn(0, 0));
  const double sig_r = std::sqrt(cfg.c_e_syn(3, 3));
  CHECK(sig_t * kChi3Mean == doctest::Approx(0.031).epsilon(1e-12));
  CHECK(sig_r * kChi3Mean == doctest::Approx(0.885 * kDeg).epsilon(1e-12));
}

TEST_CASE("keypoint file round trip and the shipped geometry") {
  const KeypointSet def = default_target_keypoints();
  REQUIRE(def.size() == 11);

  SUBCASE("format/parse round trip") {
    const std::string text = format_keypoints(def);
    const auto path = temp_file("relnav_kp_roundtrip.txt");
    {
      std::ofstream out(path);
      out << text;
    }
    const KeypointSet back = load_keypoints(path.string());
    REQUIRE(back.size() == def.size());
    for (int i = 0; i < def.size(); ++i) {
      CHECK(back.ids[i] == def.ids[i]);
      CHECK((back.points[i] - def.points[i]).norm() == 0.0);
    }
    std::filesystem::remove(path);
  }

  SUBCASE("shipped data file matches the built-in set") {
    const char* root = std::getenv("RELNAV_TEST_DATA");
    REQUIRE_MESSAGE(root != nullptr,
                    "RELNAV_TEST_DATA must point at the data directory");
    const KeypointSet shipped =
        load_keypoints(std::string(root) + "/tango_keypoints.txt");
    REQUIRE(shipped.size() == def.size());
    for (int i = 0; i < def.size(); ++i) {
      CHECK(shipped.ids[i] == def.ids[i]);
      CHECK((shipped.points[i] - def.points[i]).norm() == 0.0);
    }
  }

  SUBCASE("comments and blank lines are skipped") {
    const auto path = temp_file("relnav_kp_comments.txt");
    {
      std::ofstream out(path);
      out << "# leading comment\n\n";
      out << "0 1.0 2.0 3.0  # trailing comment\n";
      out << "1 -1.0 -2.0 -3.0\n\n";
      out << "2 0.5 0.5 0.5\n";
      out << "3 0.25 0.25 0.25\n";
    }
    const KeypointSet k = load_keypoints(path.string());
    REQUIRE(k.size() == 4);
    CHECK((k.points[0] - Vec3(1.0, 2.0, 3.0)).norm() == 0.0);
    CHECK(k.ids[3] == 3);
    std::filesystem::remove(path);
  }

  SUBCASE("malformed coordinate throws") {
    const auto path = temp_file("relnav_kp_malformed.txt");
    {
      std::ofstream out(path);
      out << "0 1.0 2.0 3.0\n";
      out << "1 0.1 bad 0.3\n";
      out << "2 1.0 2.0 3.0\n";
      out << "3 1.0 2.0 3.0\n";
    }
    CHECK_THROWS_AS(load_keypoints(path.string()), std::runtime_error);
    std::filesystem::remove(path);
  }

  SUBCASE("too few landmarks throws") {
    const auto path = temp_file("relnav_kp_short.txt");
    {
      std::ofstream out(path);
      out << "0 1.0 2.0 3.0\n1 4.0 5.0 6.0\n2 7.0 8.0 9.0\n";
    }
    CHECK_THROWS_AS(load_keypoints(path.string()), std::runtime_error);
    std::filesystem::remove(path);
  }

  SUBCASE("missing file throws") {
    CHECK_THROWS_AS(load_keypoints("/nonexistent/kp.txt"),
                    std::runtime_error);
  }
}

}  // TEST_SUITE
