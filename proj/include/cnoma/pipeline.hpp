#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cnoma/gdbn.hpp"
#include "cnoma/mmjpf.hpp"
#include "cnoma/parallel.hpp"
#include "cnoma/phy.hpp"
#include "cnoma/rng.hpp"

namespace cnoma::pipeline {

// per-subchannel slot feature: [ln mean Re^2, ln mean Im^2]
Eigen::Vector2d encode_block(const phy::SymbolBlock& block, const gdbn::EncoderParams& params);

// feature a candidate is expected to produce: su_rx_power = sum of p*g on the
// subchannel, PU folded in by its occupancy probability
Eigen::Vector2d expected_feature(double su_rx_power, double pu_busy_prob, double pu_rx_power,
                                 double eta, const gdbn::EncoderParams& params);

// One static-evolution error generator plus one M-MJPF per subchannel.
// The static stage runs on raw features; the model-based filter runs in
// generalized-error coordinates and carries the expected signal class,
// re-initializing its belief when the class switches.
class FilterBank {
 public:
  FilterBank(const gdbn::GenerativeModel& model, int num_subchannels, int num_particles,
             const Rng& rng);

  struct StepResult {
    mmjpf::AbnormalitySignal abn;
    double static_abnormality = 0.0;  // the untrained reference on the same step
    int map_label = -1;
    gdbn::SignalClass cls = gdbn::SignalClass::noise;
    double ess = 0.0;
    bool warm = false;  // false on the first observation of a subchannel
  };

  StepResult step(int k, gdbn::SignalClass expected, const Eigen::Vector2d& raw_feature,
                  int pu_label, Rng& rng, Execution exec = Execution::parallel);

  // mismatch a candidate's expected feature would score against the class's
  // learned feature distribution
  double predicted_abnormality(gdbn::SignalClass expected,
                               const Eigen::Vector2d& expected_raw_feature) const;

  int map_label(int k) const { return chans_[k].map_label; }
  gdbn::SignalClass cls(int k) const { return chans_[k].cls; }
  int num_subchannels() const { return static_cast<int>(chans_.size()); }

 private:
  struct Chan {
    gdbn::StaticEvolutionFilter static_stage;
    gdbn::SignalClass cls = gdbn::SignalClass::noise;
    mmjpf::BeliefState belief;
    int map_label = -1;
  };

  const gdbn::GenerativeModel* model_;
  int num_particles_;
  std::uint64_t seed_;
  std::vector<Chan> chans_;
};

}  // namespace cnoma::pipeline
