#include "cnoma/phy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cnoma::phy {

double noise_power(double density_dbm_hz, double bandwidth_hz) {
  if (bandwidth_hz < 0.0) throw std::invalid_argument("noise_power: negative bandwidth");
  return std::pow(10.0, (density_dbm_hz - 30.0) / 10.0) * bandwidth_hz;
}

NoiseModel make_noise_model(const scenario::ScenarioConfig& config) {
  NoiseModel nm;
  nm.density_dbm_hz = config.noise_density_dbm;
  nm.eta = noise_power(config.noise_density_dbm, config.subchannel_bandwidth());
  return nm;
}

double distance(const Eigen::Vector2d& horizontal_offset, double height) {
  if (!(height > 0.0)) throw std::invalid_argument("distance: height must be positive");
  if (!horizontal_offset.allFinite()) throw std::invalid_argument("distance: non-finite offset");
  return std::sqrt(height * height + horizontal_offset.squaredNorm());
}

double channel_gain(double fading, double shadowing, double reference_gain, double d, double alpha) {
  if (!(d > 0.0)) throw std::invalid_argument("channel_gain: distance must be positive");
  return fading * shadowing * reference_gain * std::pow(d, -alpha);
}

ChannelRealization channel_at(const scenario::ScenarioConfig& config,
                              const scenario::SuTrajectory& su,
                              const scenario::UavTrajectory& uav, int t) {
  ChannelRealization ch;
  ch.fading = config.fading;
  ch.shadowing = config.shadowing;
  ch.reference_gain = config.reference_gain;
  ch.gains.resize(config.num_subchannels, config.num_sus);
  for (int n = 0; n < config.num_sus; n++) {
    const Eigen::Vector2d offset = uav.horizontal[t] - su.positions[n][t].head<2>();
    const double d = distance(offset, uav.height);
    const double g = channel_gain(ch.fading, ch.shadowing, ch.reference_gain, d,
                                  config.path_loss_exponent);
    for (int k = 0; k < config.num_subchannels; k++) ch.gains(k, n) = g;
  }
  return ch;
}

Allocation Allocation::zeros(int num_subchannels, int num_sus) {
  Allocation a;
  a.b = Eigen::MatrixXi::Zero(num_subchannels, num_sus);
  a.p = Eigen::MatrixXd::Zero(num_subchannels, num_sus);
  return a;
}

std::vector<int> sic_order_entry(const std::vector<std::pair<int, double>>& assigned_gains) {
  if (assigned_gains.empty()) throw std::invalid_argument("sic_order_entry: empty assigned set");
  std::vector<std::pair<int, double>> sorted = assigned_gains;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<int> order(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); i++) order[i] = sorted[i].first;
  return order;
}

SicOrder sic_order(const Allocation& alloc, const ChannelRealization& channel) {
  SicOrder order;
  order.per_subchannel.resize(alloc.num_subchannels());
  for (int k = 0; k < alloc.num_subchannels(); k++) {
    std::vector<std::pair<int, double>> assigned;
    for (int n = 0; n < alloc.num_sus(); n++)
      if (alloc.b(k, n) != 0) assigned.emplace_back(n, channel.gains(k, n));
    if (!assigned.empty()) order.per_subchannel[k] = sic_order_entry(assigned);
  }
  return order;
}

double achievable_rate(int k, int n, const Allocation& alloc, const ChannelRealization& channel,
                       const SicOrder& order, double eta) {
  if (alloc.b(k, n) == 0) return 0.0;
  const auto& sigma = order.per_subchannel[k];
  double interference = 0.0;
  bool after = false;
  for (int u : sigma) {
    if (after) interference += alloc.p(k, u) * channel.gains(k, u);
    if (u == n) after = true;
  }
  const double sinr = alloc.p(k, n) * channel.gains(k, n) / (interference + eta);
  return std::log2(1.0 + sinr);
}

double sum_rate(const Allocation& alloc, const Eigen::MatrixXd& gains, double eta) {
  ChannelRealization ch;
  ch.gains = gains;
  const SicOrder order = sic_order(alloc, ch);
  double total = 0.0;
  for (int k = 0; k < alloc.num_subchannels(); k++)
    for (int n : order.per_subchannel[k]) total += achievable_rate(k, n, alloc, ch, order, eta);
  return total;
}

double sum_rate(const Allocation& alloc, const ChannelRealization& channel, double eta) {
  return sum_rate(alloc, channel.gains, eta);
}

double constellation_rotation(int su, int num_sus) {
  // spreads the N rotations inside one quadrant's worth of phase
  return su * (1.5707963267948966 / std::max(num_sus, 1));
}

std::vector<SymbolBlock> synthesize_received(const Allocation& alloc,
                                             const ChannelRealization& channel,
                                             const std::vector<std::uint8_t>& pu_busy,
                                             const NoiseModel& noise, double pu_rx_power,
                                             int block_len, const Rng& slot_rng) {
  const int K = alloc.num_subchannels();
  const int N = alloc.num_sus();
  for (int k = 0; k < K; k++)
    for (int n = 0; n < N; n++) {
      const bool bad = alloc.p(k, n) < 0.0 || (alloc.b(k, n) != 0 && alloc.b(k, n) != 1) ||
                       (alloc.b(k, n) == 0 && alloc.p(k, n) != 0.0);
      if (bad) throw std::invalid_argument("synthesize_received: infeasible allocation");
    }

  const double inv_sqrt2 = 0.70710678118654752440;
  std::vector<SymbolBlock> blocks(K);
  for (int k = 0; k < K; k++) {
    SymbolBlock& y = blocks[k];
    y.assign(block_len, {0.0, 0.0});
    const std::uint64_t k_salt = mix64(0x53594eu, static_cast<std::uint64_t>(k));

    for (int n = 0; n < N; n++) {
      if (alloc.b(k, n) == 0 || alloc.p(k, n) == 0.0) continue;
      Rng su_rng = slot_rng.fork(mix64(k_salt, static_cast<std::uint64_t>(n)));
      const double amp = std::sqrt(alloc.p(k, n)) * std::sqrt(channel.gains(k, n));
      const double rot = constellation_rotation(n, N);
      const std::complex<double> phase(std::cos(rot), std::sin(rot));
      for (int i = 0; i < block_len; i++) {
        const int sym = su_rng.uniform_int(4);
        const std::complex<double> s((sym & 1) ? -inv_sqrt2 : inv_sqrt2,
                                     (sym & 2) ? -inv_sqrt2 : inv_sqrt2);
        y[i] += amp * phase * s;
      }
    }

    if (k < static_cast<int>(pu_busy.size()) && pu_busy[k]) {
      Rng pu_rng = slot_rng.fork(mix64(k_salt, 0x505553u));
      const double amp = std::sqrt(pu_rx_power);
      for (int i = 0; i < block_len; i++)
        y[i] += std::complex<double>(pu_rng.uniform_int(2) ? amp : -amp, 0.0);
    }

    if (noise.eta > 0.0) {
      Rng noise_rng = slot_rng.fork(mix64(k_salt, 0x4e4fu));
      const double s = std::sqrt(noise.eta / 2.0);
      for (int i = 0; i < block_len; i++) {
        const double re = noise_rng.normal(0.0, s);
        const double im = noise_rng.normal(0.0, s);
        y[i] += std::complex<double>(re, im);
      }
    }
  }
  return blocks;
}

ConstraintReport check_constraints(const Allocation& alloc, const scenario::UavTrajectory* uav,
                                   const scenario::ScenarioConfig& config,
                                   const ChannelRealization* channel) {
  ConstraintReport rep;
  const int K = alloc.num_subchannels();
  const int N = alloc.num_sus();

  for (int n = 0; n < N && rep.c1; n++) {
    double total = 0.0;
    for (int k = 0; k < K; k++)
      if (alloc.b(k, n) != 0) total += alloc.p(k, n);
    if (total > config.p_max * (1.0 + 1e-12)) rep.c1 = false;
  }
  for (int k = 0; k < K; k++)
    for (int n = 0; n < N; n++) {
      if (alloc.p(k, n) < 0.0) rep.c2 = false;
      if (alloc.b(k, n) != 0 && alloc.b(k, n) != 1) rep.c3 = false;
    }
  for (int k = 0; k < K; k++) {
    int assigned = 0;
    for (int n = 0; n < N; n++) assigned += (alloc.b(k, n) != 0);
    if (assigned > config.max_multiplexed) rep.c4 = false;
  }
  if (uav != nullptr && uav->num_steps() > 0) {
    const Eigen::Vector2d q1 = uav->horizontal[0];
    if (std::abs(q1.x() - config.uav_init_x) > 1e-9 || std::abs(q1.y() - config.uav_init_y) > 1e-9)
      rep.c5 = false;
  }
  if (config.num_time_steps * config.slot_duration > config.t_max + 1e-12) rep.c6 = false;

  if (channel != nullptr) {
    const double eta = make_noise_model(config).eta;
    const double margin = config.power_diff_threshold * eta;
    const SicOrder order = sic_order(alloc, *channel);
    for (int k = 0; k < K; k++) {
      const auto& sigma = order.per_subchannel[k];
      for (std::size_t i = 0; i + 1 < sigma.size(); i++) {
        const double a = alloc.p(k, sigma[i]) * channel->gains(k, sigma[i]);
        const double b = alloc.p(k, sigma[i + 1]) * channel->gains(k, sigma[i + 1]);
        if (std::abs(a - b) < margin) rep.sic_reliable = false;
      }
    }
  }

  if (!rep.c1) rep.violated.push_back("C1");
  if (!rep.c2) rep.violated.push_back("C2");
  if (!rep.c3) rep.violated.push_back("C3");
  if (!rep.c4) rep.violated.push_back("C4");
  if (!rep.c5) rep.violated.push_back("C5");
  if (!rep.c6) rep.violated.push_back("C6");
  return rep;
}

void append_rates_csv(std::string& buffer, int t, const Allocation& alloc,
                      const ChannelRealization& channel, double eta) {
  const SicOrder order = sic_order(alloc, channel);
  char line[96];
  for (int k = 0; k < alloc.num_subchannels(); k++)
    for (int n : order.per_subchannel[k]) {
      std::snprintf(line, sizeof(line), "%d,%d,%d,%.12g\n", t, k, n,
                    achievable_rate(k, n, alloc, channel, order, eta));
      buffer += line;
    }
}

}  // namespace cnoma::phy
