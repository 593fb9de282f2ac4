#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cnoma/mmjpf.hpp"
#include "cnoma/phy.hpp"
#include "cnoma/rng.hpp"
#include "cnoma/scenario.hpp"

namespace cnoma::agent {

struct JointAction {
  phy::Allocation alloc;
  double heading_increment = 0.0;  // radians

  // canonical key of the assignment pattern b
  std::uint64_t pattern_key() const;
  bool idle() const { return alloc.b.sum() == 0; }
};

struct AgentParams {
  int power_levels = 4;             // nonzero grid points in (0, p_max]
  int menu_size = 64;               // sampled candidates when enumeration is too large
  int exhaustive_menu_limit = 512;  // full enumeration below this many combos
  bool trajectory_action = false;
  double heading_delta = 0.17453292519943295;  // 10 degrees

  double temperature_initial = 1.0;
  double temperature_decay = 0.95;
  double temperature_floor = 0.05;

  double w_abnormality = 1.0;   // predicted-mismatch weight in selection
  double w_table = 1.0;         // learned-preference weight in selection
  double w_pu = 4.0;            // busy-subchannel penalty in selection
  double eval_abnormality_weight = 1.0;  // w in score = rate - w * abnormality
  double learn_step = 1.0;      // 0 disables all table updates
  double preference_var_floor = 1e-6;
};

// evenly spaced nonzero power levels up to p_max
std::vector<double> power_grid(double p_max, int levels);

// Finite feasible candidate menu: the full (level+off)^(K*N) enumeration when
// small, otherwise a seeded feasible sample plus the idle action. Every
// candidate satisfies C1-C4 by construction.
std::vector<JointAction> enumerate_feasible_actions(const scenario::ScenarioConfig& config,
                                                    const AgentParams& params, Rng& rng);

// table key: modal cluster label of the superposed-signal chain plus the
// last observed PU occupancy pattern
struct Context {
  int su_label = -1;
  std::uint32_t pu_pattern = 0;
  std::uint64_t key() const {
    return (static_cast<std::uint64_t>(su_label + 1) << 32) | pu_pattern;
  }
};

struct PuPredictor {
  std::vector<Eigen::Matrix2d> counts;      // raw transition counts per subchannel
  std::vector<Eigen::Matrix2d> transition;  // smoothed row-normalized estimate
  Eigen::VectorXd belief;                   // current busy probability per subchannel
  std::vector<std::uint8_t> last_occupancy;
  double smoothing = 1.0;

  explicit PuPredictor(int num_subchannels = 0);
  // seed the estimate from a learned chain instead of flat counts
  void prime(const std::vector<Eigen::Matrix2d>& learned, double pseudo_count);
  void refresh_transition();
  void observe(const std::vector<std::uint8_t>& occupancy);
  void predict_step();  // advance the belief one slot
  std::uint32_t pattern() const;
  void reset_belief();
};

struct CategoricalRow {
  Eigen::VectorXd prob;  // normalized
  double mass = 1.0;     // uniform-prior strength plus accumulated increments
  double visits = 0.0;
};

struct GaussianPreference {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  double weight = 0.0;
};

struct ActionTable {
  int num_patterns = 0;
  std::map<std::uint64_t, int> pattern_index;           // pattern key -> compact index
  std::map<std::uint64_t, CategoricalRow> discrete;     // context -> row over patterns
  CategoricalRow global_discrete;
  std::map<std::uint64_t, GaussianPreference> power;    // context -> preference over power vectors
  GaussianPreference global_power;
  std::map<std::uint64_t, GaussianPreference> heading;  // context -> preference over increments
  GaussianPreference global_heading;

  // running score normalization for exponentiated-score increments
  double score_count = 0.0, score_mean = 0.0, score_m2 = 0.0;
  double score_stddev() const;
};

enum class SelectionMode { explore, exploit };

struct SlotOutcome {
  Context context;
  int candidate = 0;
  double score = 0.0;
  std::vector<std::uint8_t> occupancy;  // realized, drives the PU counts
};

class ActiveGdbnAgent {
 public:
  ActiveGdbnAgent(std::vector<JointAction> menu, const AgentParams& params, int num_subchannels);

  const std::vector<JointAction>& menu() const { return menu_; }
  const ActionTable& tables() const { return table_; }
  double temperature() const { return temperature_; }
  void decay_temperature();

  // predicted_abnormality: per-candidate mismatch precomputed by the caller
  // from the generative model; exploit takes the arg-min score, explore
  // samples proportionally to exp(-score / temperature)
  int select_action(const Context& ctx, const std::vector<double>& predicted_abnormality,
                    const PuPredictor& pu, SelectionMode mode, Rng& rng) const;

  double evaluate_action(const mmjpf::AbnormalitySignal& abn, double realized_sum_rate) const;

  void update_model(const SlotOutcome& outcome, PuPredictor& pu);

  double candidate_score(const Context& ctx, int candidate, double predicted_abnormality,
                         const PuPredictor& pu) const;

  void save(const std::string& path, const PuPredictor& pu) const;
  void load(const std::string& path, PuPredictor& pu);

 private:
  std::vector<JointAction> menu_;
  std::vector<int> menu_pattern_;           // candidate -> pattern index
  std::vector<Eigen::VectorXd> menu_power_; // flattened power vectors
  AgentParams params_;
  ActionTable table_;
  double temperature_;
  int num_subchannels_;
};

}  // namespace cnoma::agent
