#include "cnoma/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cnoma::scenario {

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("ScenarioConfig: " + msg); };
  if (num_time_steps < 1) fail("num_time_steps must be >= 1");
  if (num_sus < 1) fail("num_sus must be >= 1");
  if (num_subchannels < 1) fail("num_subchannels must be >= 1");
  if (max_multiplexed < 1 || max_multiplexed > num_sus) fail("max_multiplexed must be in [1, num_sus]");
  if (!(p_max > 0.0)) fail("p_max must be positive");
  if (!(uav_height > 0.0)) fail("uav_height must be positive");
  if (!(cell_radius > 0.0)) fail("cell_radius must be positive");
  if (!(slot_duration > 0.0)) fail("slot_duration must be positive");
  if (num_time_steps * slot_duration > t_max + 1e-12) fail("num_time_steps * slot_duration exceeds t_max");
  if (block_len < 1) fail("block_len must be >= 1");
  if (uav_speed < 0.0) fail("uav_speed must be nonnegative");
  if (pu_stay_idle < 0.0 || pu_stay_idle > 1.0) fail("pu_stay_idle must be a probability");
  if (pu_stay_busy < 0.0 || pu_stay_busy > 1.0) fail("pu_stay_busy must be a probability");
}

Eigen::Vector3d sample_normalized_position(Rng& rng) {
  return {rng.uniform01(), rng.uniform01(), rng.uniform01()};
}

namespace {

Eigen::Vector2d clamp_to_disk(const Eigen::Vector2d& p, double radius) {
  const double r = p.norm();
  if (r <= radius || r == 0.0) return p;
  return p * (radius / r);
}

}  // namespace

SuTrajectory generate_su_mobility(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  SuTrajectory traj;
  traj.positions.resize(config.num_sus);
  for (int n = 0; n < config.num_sus; n++) {
    Rng su_rng = rng.fork(mix64(0x5375u, static_cast<std::uint64_t>(n)));
    auto& path = traj.positions[n];
    path.resize(config.num_time_steps);

    const Eigen::Vector3d u = sample_normalized_position(su_rng);
    Eigen::Vector2d xy(
        (2.0 * u.x() - 1.0) * config.cell_radius,
        (2.0 * u.y() - 1.0) * config.cell_radius);
    xy = clamp_to_disk(xy, config.cell_radius);
    double z = u.z() * config.su_height_max;
    path[0] = {xy.x(), xy.y(), z};

    const double s = config.su_perturbation;
    for (int t = 1; t < config.num_time_steps; t++) {
      Eigen::Vector2d next_xy = xy + Eigen::Vector2d(su_rng.uniform(-s, s), su_rng.uniform(-s, s));
      next_xy = clamp_to_disk(next_xy, config.cell_radius);
      double next_z = z + su_rng.uniform(-s, s);
      if (next_z < 0.0) next_z = 0.0;
      if (next_z > config.su_height_max) next_z = config.su_height_max;
      xy = next_xy;
      z = next_z;
      path[t] = {xy.x(), xy.y(), z};
    }
  }
  return traj;
}

UavTrajectory generate_uav_trajectory(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  UavTrajectory traj;
  traj.height = config.uav_height;
  traj.horizontal.resize(config.num_time_steps);

  // one heading per episode; straight-line flight at constant speed
  Rng uav_rng = rng.fork(0x554156u);
  const double theta = uav_rng.uniform(0.0, 6.283185307179586476925286766559);
  const Eigen::Vector2d dir(std::cos(theta), std::sin(theta));

  Eigen::Vector2d q(config.uav_init_x, config.uav_init_y);
  traj.horizontal[0] = q;
  const double step = config.uav_speed * config.slot_duration;
  for (int t = 1; t < config.num_time_steps; t++) {
    q += step * dir;
    traj.horizontal[t] = q;
  }
  return traj;
}

PuOccupancy make_pu_occupancy(const ScenarioConfig& config) {
  PuOccupancy pu;
  pu.transition.resize(config.num_subchannels);
  for (auto& m : pu.transition) {
    m << config.pu_stay_idle, 1.0 - config.pu_stay_idle,
         1.0 - config.pu_stay_busy, config.pu_stay_busy;
  }
  return pu;
}

std::vector<std::uint8_t> step_pu_occupancy(const PuOccupancy& model, int t, Rng& rng) {
  if (t < 0 || t >= model.num_steps()) throw std::out_of_range("step_pu_occupancy: t out of range");
  const int k_count = model.num_subchannels();
  std::vector<std::uint8_t> next(k_count);
  for (int k = 0; k < k_count; k++) {
    const int cur = model.occupied[t][k];
    const double stay = model.transition[k](cur, cur);
    const double u = rng.uniform01();
    next[k] = static_cast<std::uint8_t>(u < stay ? cur : 1 - cur);
  }
  return next;
}

PuOccupancy generate_pu_occupancy(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  PuOccupancy pu = make_pu_occupancy(config);
  Rng pu_rng = rng.fork(0x5055u);
  pu.occupied.resize(config.num_time_steps);
  pu.occupied[0].resize(config.num_subchannels);
  for (int k = 0; k < config.num_subchannels; k++) {
    // stationary law of the 2-state chain
    const double p01 = pu.transition[k](0, 1);
    const double p10 = pu.transition[k](1, 0);
    const double busy_frac = (p01 + p10 > 0.0) ? p01 / (p01 + p10) : 0.0;
    pu.occupied[0][k] = static_cast<std::uint8_t>(pu_rng.uniform01() < busy_frac ? 1 : 0);
  }
  for (int t = 1; t < config.num_time_steps; t++)
    pu.occupied[t] = step_pu_occupancy(pu, t - 1, pu_rng);
  return pu;
}

void export_trajectories_csv(const std::string& path, const SuTrajectory& su, const UavTrajectory& uav) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "entity,t,x,y,z\n";
  char buf[160];
  for (int t = 0; t < uav.num_steps(); t++) {
    std::snprintf(buf, sizeof(buf), "uav,%d,%.12g,%.12g,%.12g\n", t,
                  uav.horizontal[t].x(), uav.horizontal[t].y(), uav.height);
    out << buf;
  }
  for (int n = 0; n < su.num_sus(); n++)
    for (int t = 0; t < su.num_steps(); t++) {
      const auto& p = su.positions[n][t];
      std::snprintf(buf, sizeof(buf), "su%d,%d,%.12g,%.12g,%.12g\n", n, t, p.x(), p.y(), p.z());
      out << buf;
    }
}

void export_occupancy_csv(const std::string& path, const PuOccupancy& pu) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "k,t,occupied\n";
  for (int k = 0; k < pu.num_subchannels(); k++)
    for (int t = 0; t < pu.num_steps(); t++)
      out << k << ',' << t << ',' << int(pu.occupied[t][k]) << '\n';
}

}  // namespace cnoma::scenario
