#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cnoma/rng.hpp"
#include "cnoma/scenario.hpp"

namespace cnoma::phy {

struct NoiseModel {
  double density_dbm_hz = -174.0;
  double eta = 0.0;  // W per subchannel
};

// dBm/Hz density integrated over a bandwidth, in watts
double noise_power(double density_dbm_hz, double bandwidth_hz);

NoiseModel make_noise_model(const scenario::ScenarioConfig& config);

// sqrt(H^2 + ||q||^2), q = horizontal offset between UAV and user
double distance(const Eigen::Vector2d& horizontal_offset, double height);

// mu * xi * beta * d^(-alpha); throws std::invalid_argument for d <= 0
double channel_gain(double fading, double shadowing, double reference_gain, double d, double alpha);

struct ChannelRealization {
  Eigen::MatrixXd gains;  // K x N power gains
  double fading = 1.0;
  double shadowing = 1.0;
  double reference_gain = 1.0;
};

// per-slot K x N gains from the trajectories
ChannelRealization channel_at(const scenario::ScenarioConfig& config,
                              const scenario::SuTrajectory& su,
                              const scenario::UavTrajectory& uav, int t);

struct Allocation {
  Eigen::MatrixXi b;  // K x N, 1 = SU n transmits on subchannel k
  Eigen::MatrixXd p;  // K x N watts, zero wherever b is zero

  static Allocation zeros(int num_subchannels, int num_sus);
  int num_subchannels() const { return static_cast<int>(b.rows()); }
  int num_sus() const { return static_cast<int>(b.cols()); }
};

struct SicOrder {
  // per subchannel: assigned SU indices, decoded strongest-gain first
  std::vector<std::vector<int>> per_subchannel;
};

// gain-descending order of one subchannel's assigned set; ties break on the
// lower SU index; throws std::invalid_argument on an empty set
std::vector<int> sic_order_entry(const std::vector<std::pair<int, double>>& assigned_gains);

SicOrder sic_order(const Allocation& alloc, const ChannelRealization& channel);

// Shannon rate of SU n on subchannel k under SIC; the interference sum runs
// over users decoded after n; bits/s/Hz
double achievable_rate(int k, int n, const Allocation& alloc, const ChannelRealization& channel,
                       const SicOrder& order, double eta);

double sum_rate(const Allocation& alloc, const Eigen::MatrixXd& gains, double eta);
double sum_rate(const Allocation& alloc, const ChannelRealization& channel, double eta);

using SymbolBlock = std::vector<std::complex<double>>;

// phase offset giving each SU a distinct QPSK constellation
double constellation_rotation(int su, int num_sus);

// Superposed baseband block per subchannel: rotated QPSK per assigned SU with
// amplitude sqrt(p*g), a BPSK component on busy-PU subchannels, circular
// Gaussian noise of variance eta. Per-SU and noise streams are forked from
// the slot rng by (k, n) salts, so single-SU blocks superpose exactly.
// Throws std::invalid_argument when the allocation violates C1-C4.
std::vector<SymbolBlock> synthesize_received(const Allocation& alloc,
                                             const ChannelRealization& channel,
                                             const std::vector<std::uint8_t>& pu_busy,
                                             const NoiseModel& noise, double pu_rx_power,
                                             int block_len, const Rng& slot_rng);

struct ConstraintReport {
  bool c1 = true;  // per-SU power budget
  bool c2 = true;  // nonnegative powers
  bool c3 = true;  // binary assignment
  bool c4 = true;  // at most M SUs per subchannel
  bool c5 = true;  // UAV initial position
  bool c6 = true;  // mission duration budget
  bool sic_reliable = true;  // consecutive decoded powers differ by >= P_th * eta
  std::vector<std::string> violated;

  bool feasible_c1_c4() const { return c1 && c2 && c3 && c4; }
  bool all_pass() const { return feasible_c1_c4() && c5 && c6; }
};

// violations are reported, never thrown; pass uav = nullptr to skip C5
ConstraintReport check_constraints(const Allocation& alloc, const scenario::UavTrajectory* uav,
                                   const scenario::ScenarioConfig& config,
                                   const ChannelRealization* channel = nullptr);

// optional per-slot rate dump: t,k,n,rate
void append_rates_csv(std::string& buffer, int t, const Allocation& alloc,
                      const ChannelRealization& channel, double eta);

}  // namespace cnoma::phy
