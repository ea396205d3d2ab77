#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relnav/attmath.hpp"
#include "relnav/orbitmech.hpp"
#include "relnav/sim.hpp"
#include "relnav/ukf.hpp"

namespace {

using relnav::attmath::angle_between;
using relnav::attmath::quat_to_dcm;
using relnav::attmath::Quaternion;
using relnav::attmath::Vec3;

int count_fields(const std::string& line) {
  int n = 1;
  for (char c : line) {
    if (c == ',') ++n;
  }
  return n;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("preset registry exposes the scenario catalog") {
  const std::vector<std::string> names = relnav::sim::preset_names();
  REQUIRE(names.size() == 6);
  CHECK(names[0] == "roe1");
  CHECK(names[1] == "roe2");
  CHECK(names[2] == "roe1_lightbox");
  CHECK(names[3] == "roe2_lightbox");
  CHECK(names[4] == "consistency");
  CHECK(names[5] == "sweep");
  for (const std::string& name : names) {
    CHECK(relnav::sim::scenario_by_name(name).name == name);
  }
  CHECK_THROWS_AS((void)relnav::sim::scenario_by_name("nope"),
                  std::invalid_argument);

  // Scenario family relationships.
  const relnav::sim::Scenario roe1 = relnav::sim::preset_roe1();
  const relnav::sim::Scenario cons = relnav::sim::preset_consistency();
  CHECK(cons.model_consistent_truth);
  CHECK(cons.truth_noise.accel_sigma == 0.0);
  CHECK(cons.truth_noise.torque_sigma == 0.0);
  CHECK((cons.roe0.vec() - roe1.roe0.vec()).norm() == 0.0);

  const relnav::sim::Scenario sweep = relnav::sim::preset_sweep();
  CHECK(sweep.truth_noise.accel_sigma > roe1.truth_noise.accel_sigma);
  CHECK(sweep.truth_noise.torque_sigma > roe1.truth_noise.torque_sigma);
}

TEST_CASE("navigation noise levels") {
  const relnav::sim::NavNoise mod = relnav::sim::NavNoise::moderate();
  const relnav::sim::NavNoise con = relnav::sim::NavNoise::conservative();
  const double arcsec = M_PI / (180.0 * 3600.0);
  CHECK(mod.pos_sigma == 0.5);
  CHECK(mod.vel_sigma == 5e-4);
  CHECK(mod.att_sigma == doctest::Approx(5.0 * arcsec).epsilon(1e-15));
  CHECK(mod.rate_sigma == doctest::Approx(1.0 * arcsec).epsilon(1e-15));
  CHECK(con.pos_sigma == 20.0 * mod.pos_sigma);
  CHECK(con.vel_sigma == 20.0 * mod.vel_sigma);
  CHECK(con.att_sigma == 20.0 * mod.att_sigma);
  CHECK(con.rate_sigma == 20.0 * mod.rate_sigma);
  CHECK(relnav::sim::NavNoise::from_name("moderate").pos_sigma ==
        mod.pos_sigma);
  CHECK(relnav::sim::NavNoise::from_name("conservative").pos_sigma ==
        con.pos_sigma);
  CHECK_THROWS_AS((void)relnav::sim::NavNoise::from_name("extreme"),
                  std::invalid_argument);
}

TEST_CASE("physical truth matches the standoff geometry at epoch zero") {
  const relnav::sim::Scenario sc = relnav::sim::preset_roe1();
  std::mt19937_64 rng(42);
  const relnav::sim::Truth truth = relnav::sim::run_truth(sc, rng);

  // One sample per truth step plus the initial epoch, two orbits long.
  CHECK(truth.dt == 1.0);
  CHECK(truth.meas_stride == 5);
  CHECK(truth.period == doctest::Approx(5926.4).epsilon(1e-4));
  const int expected =
      static_cast<int>(sc.n_orbits * truth.period / sc.truth_dt) + 1;
  REQUIRE(static_cast<int>(truth.samples.size()) == expected);

  const relnav::sim::TruthSample& first = truth.samples[0];
  CHECK(first.t == 0.0);
  // The -8 m mean-longitude offset puts the target 8 m ahead along-track,
  // which the mounting maps to the +z (boresight) body axis.
  CHECK((first.t_body - Vec3(0.0, 0.0, 8.0)).norm() < 0.05);
  // Relative attitude starts at the configured q0 (the acos-based angle
  // metric floors near 3e-8 for machine-precision agreement).
  CHECK(angle_between(first.q_ts, sc.q0) < 1e-7);
  // Relative rate is the servicer rate seen in the target frame minus the
  // target's own spin.
  const Vec3 expected_rate =
      quat_to_dcm(first.q_ts) * first.feed.omega - sc.omega_t0;
  CHECK((first.omega_rel - expected_rate).norm() < 1e-15);
  // Differential elements recovered from the two trajectories reproduce
  // the configured offsets.
  CHECK((first.roe.vec() - sc.roe0.vec()).norm() < 1e-15);

  // Time stamps are uniform, and samples stay sane over the run.
  const int mid = expected / 2;
  CHECK(truth.samples[mid].t == mid * truth.dt);
  for (int k : {1, mid, expected - 1}) {
    const relnav::sim::TruthSample& s = truth.samples[k];
    CHECK(s.t_body.allFinite());
    CHECK(std::abs(s.q_ts.norm() - 1.0) < 1e-12);
    // The along-track separation stays in the few-meters class.
    CHECK(s.t_body.norm() > 1.0);
    CHECK(s.t_body.norm() < 50.0);
  }
}

TEST_CASE("model-consistent truth follows the estimator propagation") {
  const relnav::sim::Scenario sc = relnav::sim::preset_consistency();
  std::mt19937_64 rng(7);
  const relnav::sim::Truth truth = relnav::sim::run_truth(sc, rng);
  REQUIRE(truth.samples.size() > 2001);

  // With zero differential semi-major axis the linear element transition
  // has no drift term, so the differential elements are frozen exactly.
  const relnav::sim::TruthSample& first = truth.samples[0];
  for (int k : {1, 100, 2000, static_cast<int>(truth.samples.size()) - 1}) {
    CHECK((truth.samples[k].roe.vec() - first.roe.vec()).cwiseAbs().maxCoeff() ==
          0.0);
  }

  // Non-tumbling target: the initial relative rate equals the servicer
  // rate mapped into the target frame.
  const Vec3 expected_rate = quat_to_dcm(first.q_ts) * first.feed.omega;
  CHECK((first.omega_rel - expected_rate).norm() < 1e-15);

  // Relative position comes from the linear differential-element map.
  const Eigen::Matrix3d r_s_rtn = relnav::ukf::servicer_mount_from_rtn();
  for (int k : {0, 500, 2000}) {
    const relnav::sim::TruthSample& s = truth.samples[k];
    const relnav::orbitmech::Vec6 rtn =
        relnav::orbitmech::roe_to_rtn_map(s.servicer) * s.roe.vec();
    CHECK((s.t_body - r_s_rtn * rtn.head<3>()).norm() < 1e-12);
    CHECK((s.v_body - r_s_rtn * rtn.tail<3>()).norm() < 1e-12);
  }

  // The servicer holds its orbit frame, so the relative attitude turns at
  // roughly the orbit rate.
  const double turned = angle_between(truth.samples[2000].q_ts, first.q_ts);
  CHECK(turned > 0.5);
  CHECK(turned < M_PI);

  // The consistent branch is deterministic regardless of the rng state.
  std::mt19937_64 rng2(999);
  const relnav::sim::Truth again = relnav::sim::run_truth(sc, rng2);
  const relnav::sim::TruthSample& a = truth.samples.back();
  const relnav::sim::TruthSample& b = again.samples.back();
  CHECK((a.t_body - b.t_body).norm() == 0.0);
  CHECK(angle_between(a.q_ts, b.q_ts) == 0.0);
}

TEST_CASE("truth generation validates step sizes") {
  relnav::sim::Scenario sc = relnav::sim::preset_roe1();
  std::mt19937_64 rng(1);
  sc.truth_dt = 0.0;
  CHECK_THROWS_AS((void)relnav::sim::run_truth(sc, rng),
                  std::invalid_argument);
  sc.truth_dt = 1.0;
  sc.meas_dt = 2.5;  // not an integer multiple of the truth step
  CHECK_THROWS_AS((void)relnav::sim::run_truth(sc, rng),
                  std::invalid_argument);
}

TEST_CASE("short closed-loop run converges and is reproducible") {
  relnav::sim::Scenario sc = relnav::sim::preset_roe1();
  sc.n_orbits = 0.02;  // ~119 s, 24 measurement epochs
  const relnav::sim::FilterConfig config;

  const relnav::sim::RunResult run = relnav::sim::run_scenario(sc, config);
  const int n_samples =
      static_cast<int>(sc.n_orbits * relnav::orbitmech::period(sc.servicer0.a) /
                       sc.truth_dt) +
      1;
  const int n_epochs = (n_samples - 1) / 5 + 1;
  REQUIRE(static_cast<int>(run.records.size()) == n_epochs);
  CHECK_FALSE(run.metrics.diverged);

  // Filter errors stay in the class set by the measurement noise.
  CHECK(run.metrics.full.epochs == n_epochs);
  CHECK(run.metrics.full.mean_e_t < 0.5);
  CHECK(run.metrics.full.mean_e_q_deg < 5.0);
  // With clean synthetic measurements nearly every group is accepted.
  CHECK(run.metrics.groups_total >= (n_epochs - 1) * 10);
  CHECK(run.metrics.gate_accept_rate > 0.9);

  // Epoch bookkeeping: the first record is the initialization epoch.
  CHECK(run.records[0].t == 0.0);
  CHECK(run.records[0].groups_total == 0);
  CHECK(run.records[1].t == 5.0);
  CHECK(run.records[1].groups_total > 0);
  for (const relnav::sim::EpochRecord& r : run.records) {
    CHECK(std::isfinite(r.nees));
    CHECK(r.nees >= 0.0);
    CHECK(r.p_diag.allFinite());
    CHECK(r.q_diag.minCoeff() > 0.0);
  }

  // Bitwise reproducibility of a full scenario run.
  const relnav::sim::RunResult rerun = relnav::sim::run_scenario(sc, config);
  CHECK(relnav::sim::run_csv(run) == relnav::sim::run_csv(rerun));
}

TEST_CASE("per-epoch CSV is rectangular with the documented schema") {
  relnav::sim::Scenario sc = relnav::sim::preset_roe1();
  sc.n_orbits = 0.005;
  const relnav::sim::FilterConfig config;
  const relnav::sim::RunResult run = relnav::sim::run_scenario(sc, config);

  const std::string csv = relnav::sim::run_csv(run);
  const std::vector<std::string> lines = split_lines(csv);
  REQUIRE(lines.size() == run.records.size() + 1);

  const int header_fields = count_fields(lines[0]);
  CHECK(header_fields == 72);
  CHECK(lines[0].substr(0, 2) == "t,");
  CHECK(lines[0].find("roe_dlambda") != std::string::npos);
  CHECK(lines[0].find("e_roll_deg") != std::string::npos);
  CHECK(lines[0].find("e_v") != std::string::npos);
  CHECK(lines[0].find("p_diag_11") != std::string::npos);
  CHECK(lines[0].find("q_diag_11") != std::string::npos);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    CHECK(count_fields(lines[i]) == header_fields);
  }

  // JSON summary parses and reports the run shape.
  const std::string js = relnav::sim::run_summary_json(sc, config, run);
  const nlohmann::json j = nlohmann::json::parse(js);
  CHECK(j["config"]["scenario"] == "roe1");
  CHECK(j["config"]["asnc"] == config.asnc);
  CHECK(j["metrics"]["diverged"] == false);
  CHECK(j["metrics"]["full"]["epochs"].get<int>() ==
        static_cast<int>(run.records.size()));
}

TEST_CASE("seed derivation separates streams deterministically") {
  const std::uint64_t a = relnav::sim::derive_seed(1, 0, 0);
  CHECK(a == relnav::sim::derive_seed(1, 0, 0));
  CHECK(a != relnav::sim::derive_seed(1, 0, 1));
  CHECK(a != relnav::sim::derive_seed(1, 1, 0));
  CHECK(a != relnav::sim::derive_seed(2, 0, 0));
  // Streams used by a batch run stay distinct across run indices.
  std::vector<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 16; ++i) {
    for (std::uint64_t p = 0; p < 3; ++p) {
      seen.push_back(relnav::sim::derive_seed(77, i, p));
    }
  }
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("batch runs aggregate deterministically") {
  relnav::sim::Scenario sc = relnav::sim::preset_roe1();
  sc.n_orbits = 0.01;
  const relnav::sim::FilterConfig config;
  const relnav::sim::NavNoise nav = relnav::sim::NavNoise::moderate();

  const relnav::sim::McSummary mc =
      relnav::sim::monte_carlo(sc, config, 3, nav);
  REQUIRE(mc.runs.size() == 3);
  CHECK(mc.diverged_runs == 0);
  CHECK(mc.runs[0].index == 0);
  CHECK(mc.runs[1].index == 1);
  CHECK(mc.runs[2].index == 2);
  CHECK(mc.runs[0].seed != mc.runs[1].seed);
  CHECK(mc.runs[1].seed != mc.runs[2].seed);

  const relnav::sim::McSummary mc2 =
      relnav::sim::monte_carlo(sc, config, 3, nav);
  CHECK(relnav::sim::mc_summary_json(sc, config, nav, mc) ==
        relnav::sim::mc_summary_json(sc, config, nav, mc2));

  const nlohmann::json j =
      nlohmann::json::parse(relnav::sim::mc_summary_json(sc, config, nav, mc));
  CHECK(j["runs"].size() == 3);
  CHECK(j["noise"]["pos_sigma_m"] == nav.pos_sigma);
  CHECK(j["aggregate"]["diverged_runs"] == 0);

  CHECK_THROWS_AS((void)relnav::sim::monte_carlo(sc, config, 0, nav),
                  std::invalid_argument);
}

TEST_CASE("envelope fraction counts epochs past the start time") {
  relnav::sim::RunResult run;
  const double nees_values[] = {1.0, 2.0, 3.0, 100.0};
  const double times[] = {0.0, 5.0, 10.0, 15.0};
  for (int i = 0; i < 4; ++i) {
    relnav::sim::EpochRecord r;
    r.t = times[i];
    r.nees = nees_values[i];
    run.records.push_back(r);
  }
  CHECK(relnav::sim::nees_in_interval(run, 0.5, 3.5) ==
        doctest::Approx(0.75).epsilon(1e-15));
  CHECK(relnav::sim::nees_in_interval(run, 0.5, 3.5, 5.0) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(relnav::sim::nees_in_interval(run, 0.5, 3.5, 100.0) == 0.0);
}

TEST_CASE("output files round trip through nested directories") {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "relnav_sim_test";
  std::filesystem::remove_all(dir);
  const std::filesystem::path path = dir / "nested" / "out.csv";
  const std::string content = "t,x\n0,1\n";
  relnav::sim::write_file(path.string(), content);

  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  CHECK(buf.str() == content);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
