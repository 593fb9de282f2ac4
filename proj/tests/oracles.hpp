// independent reference implementations used only by tests
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracles {

// textbook Kalman filter, Joseph-form covariance update
struct ReferenceKalman {
  Eigen::MatrixXd A, B, Q, H, R;
  Eigen::VectorXd control;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  void predict() {
    mean = A * mean + (B.size() > 0 ? Eigen::VectorXd(B * control)
                                    : Eigen::VectorXd::Zero(mean.size()));
    cov = A * cov * A.transpose() + Q;
  }
  void update(const Eigen::VectorXd& z) {
    const Eigen::VectorXd innov = z - H * mean;
    const Eigen::MatrixXd S = H * cov * H.transpose() + R;
    const Eigen::MatrixXd K = cov * H.transpose() * S.inverse();
    mean += K * innov;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
    cov = (I - K * H) * cov * (I - K * H).transpose() + K * R * K.transpose();
  }
};

// exact forward algorithm over a discrete chain with Gaussian emissions
inline Eigen::VectorXd hmm_forward_step(const Eigen::VectorXd& alpha,
                                        const Eigen::MatrixXd& transition,
                                        const Eigen::VectorXd& emission_mean,
                                        double emission_var, double z) {
  Eigen::VectorXd predicted = transition.transpose() * alpha;
  Eigen::VectorXd out(predicted.size());
  for (int s = 0; s < predicted.size(); s++) {
    const double d = z - emission_mean(s);
    out(s) = predicted(s) * std::exp(-0.5 * d * d / emission_var);
  }
  return out / out.sum();
}

inline double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  return 0.5 * (p - q).cwiseAbs().sum();
}

// Lloyd's algorithm with k=2, best of a few deterministic starts
inline double kmeans2_quantization(const std::vector<Eigen::VectorXd>& data) {
  const int n = static_cast<int>(data.size());
  double best = std::numeric_limits<double>::infinity();
  for (int start = 0; start < 4; start++) {
    Eigen::VectorXd c0 = data[(start * 7919) % n];
    Eigen::VectorXd c1 = data[(start * 104729 + n / 2) % n];
    if ((c0 - c1).squaredNorm() == 0.0) c1 = data[(start * 104729 + n / 2 + 1) % n];
    for (int it = 0; it < 50; it++) {
      Eigen::VectorXd s0 = Eigen::VectorXd::Zero(c0.size()), s1 = s0;
      int n0 = 0, n1 = 0;
      for (const auto& x : data) {
        if ((x - c0).squaredNorm() <= (x - c1).squaredNorm()) {
          s0 += x;
          n0++;
        } else {
          s1 += x;
          n1++;
        }
      }
      if (n0 > 0) c0 = s0 / n0;
      if (n1 > 0) c1 = s1 / n1;
    }
    double qe = 0.0;
    for (const auto& x : data) qe += std::min((x - c0).squaredNorm(), (x - c1).squaredNorm());
    best = std::min(best, qe / n);
  }
  return best;
}

// value iteration for a small tabular MDP: value[s], q[s][a]
inline std::vector<std::vector<double>> value_iteration(
    const std::vector<std::vector<std::vector<double>>>& prob,  // [s][a][s']
    const std::vector<std::vector<double>>& reward,              // [s][a]
    double gamma, int iters) {
  const int S = static_cast<int>(prob.size());
  const int A = static_cast<int>(prob[0].size());
  std::vector<double> v(S, 0.0);
  std::vector<std::vector<double>> q(S, std::vector<double>(A, 0.0));
  for (int it = 0; it < iters; it++) {
    for (int s = 0; s < S; s++)
      for (int a = 0; a < A; a++) {
        double acc = reward[s][a];
        for (int s2 = 0; s2 < S; s2++) acc += gamma * prob[s][a][s2] * v[s2];
        q[s][a] = acc;
      }
    for (int s = 0; s < S; s++) v[s] = *std::max_element(q[s].begin(), q[s].end());
  }
  return q;
}

}  // namespace oracles
