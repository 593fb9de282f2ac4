#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cnoma/rng.hpp"

namespace cnoma::gdbn {

// continuous latent: a signal value paired with its temporal derivative
struct GeneralizedState {
  Eigen::VectorXd value;
  Eigen::VectorXd derivative;

  int value_dim() const { return static_cast<int>(value.size()); }
  Eigen::VectorXd stacked() const;
  static GeneralizedState split(const Eigen::VectorXd& stacked);
};

struct Cluster {
  GeneralizedState mean;
  Eigen::MatrixXd covariance;      // over the stacked state, SPD
  Eigen::MatrixXd cov_inverse;     // cached
  double cov_logdet = 0.0;
};

struct DiscreteVocabulary {
  std::vector<Cluster> clusters;

  int size() const { return static_cast<int>(clusters.size()); }
  int value_dim() const { return clusters.empty() ? 0 : clusters[0].mean.value_dim(); }
  int state_dim() const { return 2 * value_dim(); }

  // recompute cached inverses/logdets after direct edits or deserialization
  void refresh_cache();
};

struct CoupledTransitions {
  // rows[other_prev](own_prev, own_next), each row stochastic
  std::vector<Eigen::MatrixXd> rows;

  bool empty() const { return rows.empty(); }
  int num_other() const { return static_cast<int>(rows.size()); }
  Eigen::RowVectorXd row(int own_prev, int other_prev) const { return rows[other_prev].row(own_prev); }
};

struct TransitionModel {
  Eigen::MatrixXd single;      // (from, to), row-stochastic
  CoupledTransitions coupled;  // may be empty

  int num_clusters() const { return static_cast<int>(single.rows()); }
};

// the untrained bootstrap: identity dynamics, zero control
struct StaticFilterParams {
  double process_noise = 0.03;      // per-axis
  double observation_noise = 0.03;  // per-axis
  double dt = 1.0;
};

class StaticEvolutionFilter {
 public:
  StaticEvolutionFilter(const StaticFilterParams& params, int dim);

  // Feeds one observation. From the second call on, returns the generalized
  // error: (innovation against the static prediction, finite-difference
  // derivative of the observation). The first call initializes and returns
  // a zero error.
  GeneralizedState step(const Eigen::VectorXd& z);

  // mismatch of the last step's predicted observation density vs the
  // observed evidence, -ln BC; 0 before the second observation
  double last_abnormality() const { return last_abnormality_; }

  const Eigen::VectorXd& mean() const { return mean_; }
  bool warm() const { return steps_ >= 2; }

 private:
  StaticFilterParams params_;
  Eigen::VectorXd mean_, var_;  // diagonal posterior
  Eigen::VectorXd prev_z_;
  double last_abnormality_ = 0.0;
  int steps_ = 0;
};

// errors of the static filter over a whole sequence (entries 1..T-1);
// throws std::invalid_argument for fewer than 2 observations
std::vector<GeneralizedState> generalized_errors(const std::vector<Eigen::VectorXd>& observations,
                                                 const StaticFilterParams& params);

struct GngParams {
  double learning_rate = 0.01;    // winner step
  double neighbor_rate = 0.005;   // topological-neighbor step
  int max_nodes = 30;
  int insertion_interval = 100;   // adaptation steps between insertions
  int edge_max_age = 50;
  double insert_error_decay = 0.5;
  double step_error_decay = 0.995;
  int passes = 5;                 // cyclic sweeps over the sample set
  double cov_min_eigenvalue = 1e-9;
};

// Standard growing neural gas over stacked generalized states. Covariances
// come from the final Voronoi memberships. When a quantization-error trace is
// requested it records the mean squared distance to the nearest node right
// after every insertion.
DiscreteVocabulary gng_learn(const std::vector<GeneralizedState>& samples, const GngParams& params,
                             std::vector<double>* quantization_trace = nullptr);

// label of the minimum-Mahalanobis cluster; ties break on the lower label
int assign_cluster(const GeneralizedState& x, const DiscreteVocabulary& vocab);

// row-normalized bigram counts with additive smoothing; rows with no
// evidence and zero smoothing fall back to uniform
TransitionModel estimate_transitions(const std::vector<int>& labels, int num_clusters,
                                     double smoothing);
TransitionModel estimate_transitions(const std::vector<std::vector<int>>& label_sequences,
                                     int num_clusters, double smoothing);

// rows indexed by the joint (own previous, other previous) pair
CoupledTransitions estimate_coupled_transitions(const std::vector<int>& labels_self,
                                                const std::vector<int>& labels_other,
                                                int num_self, int num_other, double smoothing);
CoupledTransitions estimate_coupled_transitions(
    const std::vector<std::vector<int>>& self_sequences,
    const std::vector<std::vector<int>>& other_sequences, int num_self, int num_other,
    double smoothing);

struct DynamicsParameters {
  Eigen::MatrixXd dynamic;            // C, state_dim x state_dim
  Eigen::MatrixXd control;            // D, state_dim x value_dim
  Eigen::MatrixXd process_noise;      // Q
  Eigen::MatrixXd observation;        // H, value_dim x state_dim
  Eigen::MatrixXd observation_noise;  // R

  int state_dim() const { return static_cast<int>(dynamic.rows()); }
  int obs_dim() const { return static_cast<int>(observation.rows()); }
};

// value block integrates the previous derivative; the derivative block is
// driven by the active cluster's control vector
DynamicsParameters default_dynamics(int value_dim, double dt, double observation_noise_var);

// one learned vocabulary with its transition structure and dynamics
struct ClassModel {
  DiscreteVocabulary vocab;
  TransitionModel transitions;
  DynamicsParameters dynamics;

  // raw-feature moments of the training streams; the history-free
  // preference reference for action scoring
  Eigen::VectorXd feature_mean;
  Eigen::MatrixXd feature_cov;

  // U_S: the cluster's mean derivative
  Eigen::VectorXd control_for(int cluster) const { return vocab.clusters[cluster].mean.derivative; }
};

enum class SignalClass { noise = 0, pu = 1, su = 2 };
const char* signal_class_name(SignalClass e);

struct EncoderParams {
  int block_len = 64;
  double power_floor = 1e-30;  // keeps the log finite on silent blocks
};

struct GenerativeModel {
  int version = 1;
  EncoderParams encoder;
  StaticFilterParams static_filter;
  ClassModel noise, pu, su;
  std::vector<Eigen::Matrix2d> t_pu;  // learned PU chain per subchannel

  const ClassModel& cls(SignalClass e) const;
  ClassModel& cls(SignalClass e);

  void save(const std::string& path) const;
  static GenerativeModel load(const std::string& path);
};

}  // namespace cnoma::gdbn
