#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cnoma/gdbn.hpp"
#include "cnoma/parallel.hpp"
#include "cnoma/rng.hpp"

namespace cnoma::mmjpf {

struct Particle {
  int label = 0;
  double weight = 0.0;
  Eigen::VectorXd mean;    // stacked generalized state
  Eigen::MatrixXd cov;
};

struct BeliefState {
  std::vector<Particle> particles;

  int size() const { return static_cast<int>(particles.size()); }
  double effective_sample_size() const;
  Eigen::VectorXd weighted_mean() const;
  Eigen::MatrixXd weighted_covariance() const;  // moment-matched mixture
  Eigen::VectorXd label_distribution(int num_clusters) const;
};

struct AbnormalitySignal {
  double continuous = 0.0;
  double discrete = 0.0;
  double total() const { return continuous + discrete; }
};

// other_label < 0 selects the single-chain transition rows
struct PredictContext {
  int other_label = -1;
};

// Bhattacharyya distance -ln BC between two Gaussians;
// throws std::invalid_argument on dimension mismatch or a non-PD covariance
double abnormality(const Eigen::VectorXd& mean_a, const Eigen::MatrixXd& cov_a,
                   const Eigen::VectorXd& mean_b, const Eigen::MatrixXd& cov_b);

// KL(p || q) with an epsilon guard; the discrete-level mismatch measure
double categorical_kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

// equal weights; labels uniform over clusters, Gaussians from the clusters
BeliefState init_belief(const gdbn::ClassModel& model, int num_particles, Rng& rng);

// Per particle: resample the label from its (coupled) transition row; on a
// self-transition advance the Gaussian by the dynamics with the cluster's
// control vector, on a regime switch re-anchor it to the new cluster.
// Weights unchanged.
void predict(BeliefState& belief, const gdbn::ClassModel& model, const PredictContext& ctx,
             Rng& rng, Execution exec = Execution::parallel);

// Per-particle Kalman update against the observation model, weights scaled
// by the marginal likelihood, systematic resampling when ESS < L/2.
// Abnormality is computed from the pre-update (predicted) messages.
AbnormalitySignal update(BeliefState& belief, const Eigen::VectorXd& observation,
                         const gdbn::ClassModel& model, Rng& rng,
                         Execution exec = Execution::parallel);

// throws std::runtime_error on all-zero weights (filter divergence)
void systematic_resample(BeliefState& belief, Rng& rng);

struct PredictedObservation {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// one-step-ahead observation-space message, marginalized over each
// particle's transition row; does not mutate the belief
PredictedObservation predicted_observation(const BeliefState& belief,
                                           const gdbn::ClassModel& model,
                                           const PredictContext& ctx);

}  // namespace cnoma::mmjpf
