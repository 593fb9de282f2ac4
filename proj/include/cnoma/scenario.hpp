#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cnoma/rng.hpp"

namespace cnoma::scenario {

struct ScenarioConfig {
  // cell and UAV geometry
  double cell_radius = 100.0;  // m
  double uav_height = 50.0;    // m, constant flight height H
  double uav_speed = 5.0;      // m/s
  double uav_init_x = 0.0;     // m, fixed initial horizontal position (C5)
  double uav_init_y = 0.0;

  // dimensions
  int num_time_steps = 10;   // T slots per episode
  int num_sus = 4;           // N
  int num_subchannels = 3;   // K
  int max_multiplexed = 2;   // M SUs per subchannel (C4)

  // radio
  double p_max = 20.0;               // W per-SU power budget (C1)
  double bandwidth = 1.4e6;          // Hz, split evenly across subchannels
  double noise_density_dbm = -174.0; // dBm/Hz
  double path_loss_exponent = 2.0;   // alpha
  double fading = 1.0;               // mu
  double shadowing = 1.0;            // xi
  double reference_gain = 1.0;       // beta
  double power_diff_threshold = 1.0; // P_th, SIC reliability margin
  double pu_rx_power = 5e-3;         // W, received PU power at the UAV
  int block_len = 64;                // complex symbols per subchannel per slot

  // timing
  double slot_duration = 1.0;  // s
  double t_max = 10.0;         // s, mission budget (C6)

  // mobility
  double su_perturbation = 1.0;  // m, per-axis uniform step bound
  double su_height_max = 2.0;    // m, ground users

  // PU occupancy chain, state 0 = idle, 1 = busy
  double pu_stay_idle = 0.9;
  double pu_stay_busy = 0.8;

  // learning
  double gng_learning_rate = 0.01;

  std::uint64_t seed = 1;

  double subchannel_bandwidth() const { return bandwidth / num_subchannels; }

  // throws std::invalid_argument on the first violated invariant
  void validate() const;
};

struct SuTrajectory {
  // positions[n][t], meters
  std::vector<std::vector<Eigen::Vector3d>> positions;
  int num_sus() const { return static_cast<int>(positions.size()); }
  int num_steps() const { return positions.empty() ? 0 : static_cast<int>(positions[0].size()); }
};

struct UavTrajectory {
  std::vector<Eigen::Vector2d> horizontal;  // q(t), meters
  double height = 0.0;
  int num_steps() const { return static_cast<int>(horizontal.size()); }
};

struct PuOccupancy {
  std::vector<Eigen::Matrix2d> transition;            // per subchannel, row-stochastic
  std::vector<std::vector<std::uint8_t>> occupied;    // [t][k]
  int num_subchannels() const { return static_cast<int>(transition.size()); }
  int num_steps() const { return static_cast<int>(occupied.size()); }
};

// raw draw in [0,1)^3, scaled by the callers into world coordinates
Eigen::Vector3d sample_normalized_position(Rng& rng);

SuTrajectory generate_su_mobility(const ScenarioConfig& config, Rng& rng);
UavTrajectory generate_uav_trajectory(const ScenarioConfig& config, Rng& rng);

// transition matrices from the config; occupied left empty
PuOccupancy make_pu_occupancy(const ScenarioConfig& config);

// samples occupancy at t+1 from the rows conditioned on occupied[t];
// throws std::out_of_range when t is not a filled index
std::vector<std::uint8_t> step_pu_occupancy(const PuOccupancy& model, int t, Rng& rng);

// fills occupied[0..T-1]; initial state drawn from each chain's stationary law
PuOccupancy generate_pu_occupancy(const ScenarioConfig& config, Rng& rng);

// CSV exports: entity,t,x,y,z and k,t,occupied
void export_trajectories_csv(const std::string& path, const SuTrajectory& su, const UavTrajectory& uav);
void export_occupancy_csv(const std::string& path, const PuOccupancy& pu);

}  // namespace cnoma::scenario
