// Microbenchmarks for the hot paths: closed-form noise coefficients,
// per-axis noise-shape assemblies, rigid-body integration, the bounded
// least-squares fit, and one full filter cycle.

#include <benchmark/benchmark.h>

#include <random>

#include "relnav/asnc.hpp"
#include "relnav/attdyn.hpp"
#include "relnav/attmath.hpp"
#include "relnav/meas.hpp"
#include "relnav/orbitmech.hpp"
#include "relnav/procnoise.hpp"
#include "relnav/sim.hpp"
#include "relnav/ukf.hpp"

namespace {

using relnav::attmath::Vec3;

relnav::orbitmech::EquinoctialElements reference_elements() {
  relnav::orbitmech::KeplerianElements k;
  k.a = 7078135.0;
  k.e = 0.001;
  k.inc = 98.2 * M_PI / 180.0;
  k.raan = 189.9 * M_PI / 180.0;
  k.argp = 0.0;
  k.mean_anomaly = 0.7;
  return relnav::orbitmech::kepler_to_equinoctial(k);
}

void bench_zeta_set(benchmark::State& state) {
  double w1 = 0.0175;
  for (auto _ : state) {
    benchmark::DoNotOptimize(relnav::procnoise::zeta_set(w1, 0.0011, 5.0));
    w1 += 1e-9;  // defeat value caching across iterations
  }
}
BENCHMARK(bench_zeta_set);

void bench_attitude_shape(benchmark::State& state) {
  const relnav::attdyn::InertiaMatrix inertia(Vec3(2.69, 3.46, 3.11));
  Vec3 w1(0.01, -0.02, 0.015);
  const Vec3 w2(0.001, 0.002, -0.0005);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        relnav::procnoise::attitude_X(w1, w2, inertia, 5.0));
    w1.x() += 1e-9;
  }
}
BENCHMARK(bench_attitude_shape);

void bench_orbit_shape(benchmark::State& state) {
  const auto eq = reference_elements();
  for (auto _ : state) {
    benchmark::DoNotOptimize(relnav::procnoise::roe_X(eq, 5.0));
  }
}
BENCHMARK(bench_orbit_shape);

void bench_rigid_body_step(benchmark::State& state) {
  const relnav::attdyn::InertiaMatrix inertia(Vec3(2.69, 3.46, 3.11));
  relnav::attdyn::AttitudeState s;
  s.q = relnav::attmath::Quaternion{1.0, Vec3::Zero()};
  s.omega = Vec3(0.0175, -0.005, 0.002);
  relnav::attdyn::ServicerAttitudeFeed feed;
  feed.omega = Vec3(0.0011, 0.0, 0.0);
  for (auto _ : state) {
    s = relnav::attdyn::rk4_attitude_step(s, feed, inertia, 1.0);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(bench_rigid_body_step);

void bench_bounded_fit(benchmark::State& state) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Matrix<double, 21, 3> x;
  for (int r = 0; r < 21; ++r) {
    for (int c = 0; c < 3; ++c) x(r, c) = normal(rng);
  }
  Eigen::Matrix<double, 21, 1> qhat = x * Vec3(0.5, -0.2, 0.8);
  for (int r = 0; r < 21; ++r) qhat(r) += 0.3 * normal(rng);
  const Eigen::Matrix<double, 21, 21> w_inv =
      Eigen::Matrix<double, 21, 21>::Identity();
  const relnav::asnc::PsdBounds bounds;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        relnav::asnc::solve_bounded_wls(x, qhat, w_inv, bounds));
  }
}
BENCHMARK(bench_bounded_fit);

void bench_filter_cycle(benchmark::State& state) {
  const relnav::sim::Scenario sc = relnav::sim::preset_roe1();
  std::mt19937_64 rng_truth(1);
  relnav::sim::Scenario tiny = sc;
  tiny.n_orbits = 0.002;
  const relnav::sim::Truth truth = relnav::sim::run_truth(tiny, rng_truth);

  const relnav::attdyn::InertiaMatrix inertia(sc.inertia_diag);
  relnav::ukf::MeasurementModel model;
  model.camera = relnav::meas::CameraModel::standard();
  model.keypoints = relnav::meas::default_target_keypoints();
  model.r_s_rtn = relnav::ukf::servicer_mount_from_rtn();
  const relnav::ukf::UkfParams params;

  relnav::ukf::ServicerContext ctx;
  ctx.elements = truth.samples[0].servicer;
  ctx.feed = truth.samples[0].feed;

  std::mt19937_64 rng_meas(2);
  relnav::meas::MeasurementFrame frame = relnav::meas::emulate_cnn(
      truth.samples[0].t_body, truth.samples[0].q_ts, model.camera,
      model.keypoints, sc.emulator, rng_meas, 0.0);
  relnav::ukf::FilterState s0 =
      relnav::ukf::initialize_filter(frame, model, ctx, {});
  const relnav::ukf::Mat12 q = relnav::ukf::Mat12::Identity() * 1e-9;

  for (auto _ : state) {
    const relnav::ukf::Prediction pred =
        relnav::ukf::time_update(s0, ctx, inertia, q, 5.0, params);
    const relnav::ukf::UpdateResult upd =
        relnav::ukf::measurement_update(pred.state, frame, model, ctx, params);
    benchmark::DoNotOptimize(upd.state);
  }
}
BENCHMARK(bench_filter_cycle);

}  // namespace

BENCHMARK_MAIN();
