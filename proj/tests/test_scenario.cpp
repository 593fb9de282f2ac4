#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>

#include "cnoma/scenario.hpp"

using namespace cnoma;

TEST_CASE("config invariants") {
  scenario::ScenarioConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.max_multiplexed = 5;  // > num_sus = 4
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.num_time_steps = 20;  // 20 s > t_max = 10 s
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.p_max = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.uav_height = -1.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("su mobility: zero perturbation freezes everyone") {
  scenario::ScenarioConfig cfg;
  cfg.su_perturbation = 0.0;
  Rng rng(11);
  const auto traj = scenario::generate_su_mobility(cfg, rng);
  REQUIRE(traj.num_sus() == cfg.num_sus);
  REQUIRE(traj.num_steps() == cfg.num_time_steps);
  for (int n = 0; n < traj.num_sus(); n++)
    for (int t = 1; t < traj.num_steps(); t++)
      CHECK((traj.positions[n][t] - traj.positions[n][0]).norm() == 0.0);
}

TEST_CASE("su mobility: determinism and cell containment") {
  scenario::ScenarioConfig cfg;
  Rng a(42), b(42);
  const auto ta = scenario::generate_su_mobility(cfg, a);
  const auto tb = scenario::generate_su_mobility(cfg, b);
  for (int n = 0; n < ta.num_sus(); n++)
    for (int t = 0; t < ta.num_steps(); t++) {
      CHECK(ta.positions[n][t].x() == tb.positions[n][t].x());
      CHECK(ta.positions[n][t].y() == tb.positions[n][t].y());
      CHECK(ta.positions[n][t].z() == tb.positions[n][t].z());
      CHECK(ta.positions[n][t].head<2>().norm() <= cfg.cell_radius + 1e-9);
      CHECK(ta.positions[n][t].allFinite());
    }
  // initial positions inside the cell over many seeds
  for (std::uint64_t s = 0; s < 200; s++) {
    Rng rng(s);
    const auto t0 = scenario::generate_su_mobility(cfg, rng);
    for (int n = 0; n < t0.num_sus(); n++) {
      CHECK(t0.positions[n][0].head<2>().norm() <= cfg.cell_radius + 1e-9);
      CHECK(t0.positions[n][0].z() >= 0.0);
      CHECK(t0.positions[n][0].z() <= cfg.su_height_max);
    }
  }
}

TEST_CASE("normalized sampling range") {
  Rng rng(7);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; i++) {
    const Eigen::Vector3d u = scenario::sample_normalized_position(rng);
    lo = std::min({lo, u.x(), u.y(), u.z()});
    hi = std::max({hi, u.x(), u.y(), u.z()});
  }
  CHECK(lo >= 0.0);
  CHECK(hi <= 1.0);
  CHECK(lo < 0.01);   // sampling actually covers the range
  CHECK(hi > 0.99);
}

TEST_CASE("uav trajectory") {
  scenario::ScenarioConfig cfg;
  cfg.uav_init_x = 3.0;
  cfg.uav_init_y = -2.0;

  SUBCASE("zero speed stays put") {
    cfg.uav_speed = 0.0;
    Rng rng(1);
    const auto traj = scenario::generate_uav_trajectory(cfg, rng);
    for (int t = 0; t < traj.num_steps(); t++) {
      CHECK(traj.horizontal[t].x() == 3.0);
      CHECK(traj.horizontal[t].y() == -2.0);
    }
  }

  SUBCASE("path length and displacement magnitudes") {
    cfg.uav_speed = 5.0;
    cfg.slot_duration = 1.0;
    cfg.num_time_steps = 10;
    Rng rng(2);
    const auto traj = scenario::generate_uav_trajectory(cfg, rng);
    CHECK(traj.horizontal[0].x() == 3.0);  // C5
    CHECK(traj.horizontal[0].y() == -2.0);
    double total = 0.0;
    for (int t = 1; t < traj.num_steps(); t++) {
      const double step = (traj.horizontal[t] - traj.horizontal[t - 1]).norm();
      CHECK(step == doctest::Approx(5.0).epsilon(1e-9));
      total += step;
    }
    CHECK(total == doctest::Approx(45.0).epsilon(1e-9));
    CHECK(traj.height == cfg.uav_height);
  }

  SUBCASE("determinism") {
    Rng a(5), b(5);
    const auto ta = scenario::generate_uav_trajectory(cfg, a);
    const auto tb = scenario::generate_uav_trajectory(cfg, b);
    for (int t = 0; t < ta.num_steps(); t++)
      CHECK((ta.horizontal[t] - tb.horizontal[t]).norm() == 0.0);
  }
}

TEST_CASE("pu occupancy: degenerate chains") {
  scenario::ScenarioConfig cfg;
  cfg.num_subchannels = 2;
  cfg.num_time_steps = 10;

  SUBCASE("identity transition is absorbing") {
    cfg.pu_stay_idle = 1.0;
    cfg.pu_stay_busy = 1.0;
    Rng rng(3);
    const auto pu = scenario::generate_pu_occupancy(cfg, rng);
    for (int t = 1; t < pu.num_steps(); t++)
      for (int k = 0; k < pu.num_subchannels(); k++) CHECK(pu.occupied[t][k] == pu.occupied[0][k]);
  }

  SUBCASE("flip transition alternates") {
    cfg.pu_stay_idle = 0.0;
    cfg.pu_stay_busy = 0.0;
    Rng rng(3);
    const auto pu = scenario::generate_pu_occupancy(cfg, rng);
    for (int t = 1; t < pu.num_steps(); t++)
      for (int k = 0; k < pu.num_subchannels(); k++)
        CHECK(int(pu.occupied[t][k]) == 1 - int(pu.occupied[t - 1][k]));
  }
}

TEST_CASE("pu occupancy: stationary fraction and transition frequencies") {
  scenario::ScenarioConfig cfg;
  cfg.num_subchannels = 1;
  cfg.num_time_steps = 100000;
  cfg.t_max = 1e9;
  cfg.pu_stay_idle = 0.9;
  cfg.pu_stay_busy = 0.8;
  Rng rng(12);
  const auto pu = scenario::generate_pu_occupancy(cfg, rng);

  long busy = 0;
  Eigen::Matrix2d counts = Eigen::Matrix2d::Zero();
  for (int t = 0; t < pu.num_steps(); t++) {
    busy += pu.occupied[t][0];
    if (t > 0) counts(pu.occupied[t - 1][0], pu.occupied[t][0]) += 1.0;
  }
  CHECK(double(busy) / pu.num_steps() == doctest::Approx(1.0 / 3.0).epsilon(0.03));

  for (int s = 0; s < 2; s++) {
    const Eigen::Vector2d row = counts.row(s).transpose() / counts.row(s).sum();
    const Eigen::Vector2d expect = pu.transition[0].row(s).transpose();
    CHECK(0.5 * (row - expect).cwiseAbs().sum() < 0.02);
  }
}

TEST_CASE("pu occupancy: rows stochastic, step bounds") {
  scenario::ScenarioConfig cfg;
  const auto pu = scenario::make_pu_occupancy(cfg);
  for (const auto& m : pu.transition) {
    CHECK(m.row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.row(1).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  Rng rng(1);
  auto filled = scenario::generate_pu_occupancy(cfg, rng);
  CHECK_THROWS_AS(scenario::step_pu_occupancy(filled, cfg.num_time_steps, rng), std::out_of_range);
  CHECK_THROWS_AS(scenario::step_pu_occupancy(filled, -1, rng), std::out_of_range);
}

TEST_CASE("csv exports") {
  scenario::ScenarioConfig cfg;
  cfg.num_time_steps = 3;
  Rng rng(8);
  const auto su = scenario::generate_su_mobility(cfg, rng);
  const auto uav = scenario::generate_uav_trajectory(cfg, rng);
  const auto pu = scenario::generate_pu_occupancy(cfg, rng);
  scenario::export_trajectories_csv("/tmp/cnoma_test_traj.csv", su, uav);
  scenario::export_occupancy_csv("/tmp/cnoma_test_occ.csv", pu);

  std::ifstream t("/tmp/cnoma_test_traj.csv");
  std::string line;
  std::getline(t, line);
  CHECK(line == "entity,t,x,y,z");
  int rows = 0;
  while (std::getline(t, line)) rows++;
  CHECK(rows == 3 + cfg.num_sus * 3);

  std::ifstream o("/tmp/cnoma_test_occ.csv");
  std::getline(o, line);
  CHECK(line == "k,t,occupied");
  rows = 0;
  while (std::getline(o, line)) rows++;
  CHECK(rows == cfg.num_subchannels * 3);
}
