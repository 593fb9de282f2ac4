#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cnoma/agent.hpp"
#include "cnoma/parallel.hpp"
#include "cnoma/phy.hpp"
#include "cnoma/rng.hpp"
#include "cnoma/scenario.hpp"

namespace cnoma::baselines {

const agent::JointAction& random_policy(const std::vector<agent::JointAction>& candidates,
                                        Rng& rng);

// top-M SUs per subchannel by gain; each SU's budget split equally across
// its assigned subchannels
agent::JointAction greedy_policy(const Eigen::MatrixXd& gains,
                                 const scenario::ScenarioConfig& config);

struct QTable {
  double learning_rate = 0.1;
  double discount = 0.9;
  double epsilon = 1.0;
  double epsilon_decay = 0.97;
  double epsilon_floor = 0.05;
  std::map<std::pair<std::uint64_t, int>, double> q;

  double get(std::uint64_t state, int action) const {
    const auto it = q.find({state, action});
    return it == q.end() ? 0.0 : it->second;
  }
};

// epsilon-greedy over [0, num_actions); greedy ties break on the lower index
int q_learning_policy(const QTable& table, std::uint64_t state, int num_actions, Rng& rng);

void q_update(QTable& table, std::uint64_t state, int action, double reward,
              std::uint64_t next_state, int num_actions);

struct OracleTooLarge : std::runtime_error {
  double enumeration_size;
  explicit OracleTooLarge(double size);
};

struct OracleResult {
  agent::JointAction best;
  double best_rate = 0.0;
  double enumeration_size = 0.0;
};

// Full scan of every feasible (assignment, power-grid) combination; the grid
// may contain 0 (meaning unassigned). Throws OracleTooLarge when
// |grid|^(K*N) exceeds max_enumeration. Serial and parallel scans return
// the identical (first-maximum) result.
OracleResult exhaustive_oracle(const Eigen::MatrixXd& gains,
                               const scenario::ScenarioConfig& config,
                               const std::vector<double>& power_grid,
                               Execution exec = Execution::parallel,
                               double max_enumeration = 1e7);

// feasible-by-construction sampling fallback when the oracle refuses
agent::JointAction random_search_allocation(const Eigen::MatrixXd& gains,
                                            const scenario::ScenarioConfig& config,
                                            const std::vector<double>& nonzero_grid,
                                            int samples, Rng& rng);

}  // namespace cnoma::baselines
