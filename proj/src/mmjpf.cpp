#include "cnoma/mmjpf.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cnoma::mmjpf {

double BeliefState::effective_sample_size() const {
  double sumsq = 0.0;
  for (const auto& p : particles) sumsq += p.weight * p.weight;
  return sumsq > 0.0 ? 1.0 / sumsq : 0.0;
}

Eigen::VectorXd BeliefState::weighted_mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(particles[0].mean.size());
  for (const auto& p : particles) m += p.weight * p.mean;
  return m;
}

Eigen::MatrixXd BeliefState::weighted_covariance() const {
  const Eigen::VectorXd m = weighted_mean();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m.size(), m.size());
  for (const auto& p : particles) {
    const Eigen::VectorXd d = p.mean - m;
    cov += p.weight * (p.cov + d * d.transpose());
  }
  return cov;
}

Eigen::VectorXd BeliefState::label_distribution(int num_clusters) const {
  Eigen::VectorXd dist = Eigen::VectorXd::Zero(num_clusters);
  for (const auto& p : particles) dist(p.label) += p.weight;
  return dist;
}

double abnormality(const Eigen::VectorXd& mean_a, const Eigen::MatrixXd& cov_a,
                   const Eigen::VectorXd& mean_b, const Eigen::MatrixXd& cov_b) {
  if (mean_a.size() != mean_b.size() || cov_a.rows() != cov_b.rows())
    throw std::invalid_argument("abnormality: dimension mismatch");
  const Eigen::MatrixXd avg = 0.5 * (cov_a + cov_b);
  Eigen::LLT<Eigen::MatrixXd> llt_avg(avg);
  Eigen::LLT<Eigen::MatrixXd> llt_a(cov_a);
  Eigen::LLT<Eigen::MatrixXd> llt_b(cov_b);
  if (llt_avg.info() != Eigen::Success || llt_a.info() != Eigen::Success ||
      llt_b.info() != Eigen::Success)
    throw std::invalid_argument("abnormality: covariance not positive-definite");

  auto logdet = [](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    const Eigen::MatrixXd L = llt.matrixL();
    return 2.0 * L.diagonal().array().log().sum();
  };
  const Eigen::VectorXd d = mean_a - mean_b;
  const double maha = d.dot(llt_avg.solve(d));
  return 0.125 * maha + 0.5 * (logdet(llt_avg) - 0.5 * (logdet(llt_a) + logdet(llt_b)));
}

double categorical_kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  constexpr double eps = 1e-12;
  double kl = 0.0;
  for (int i = 0; i < p.size(); i++) {
    if (p(i) <= eps) continue;
    kl += p(i) * std::log(p(i) / std::max(q(i), eps));
  }
  return std::max(kl, 0.0);
}

BeliefState init_belief(const gdbn::ClassModel& model, int num_particles, Rng& rng) {
  const int C = model.vocab.size();
  BeliefState belief;
  belief.particles.resize(num_particles);
  for (int i = 0; i < num_particles; i++) {
    Particle& p = belief.particles[i];
    p.label = rng.uniform_int(C);
    p.weight = 1.0 / num_particles;
    p.mean = model.vocab.clusters[p.label].mean.stacked();
    p.cov = model.vocab.clusters[p.label].covariance;
  }
  return belief;
}

namespace {

int sample_row(const Eigen::RowVectorXd& row, double u) {
  double acc = 0.0;
  for (int j = 0; j < row.size(); j++) {
    acc += row(j);
    if (u < acc) return j;
  }
  return static_cast<int>(row.size()) - 1;
}

void predict_one(Particle& p, const gdbn::ClassModel& model, const PredictContext& ctx,
                 std::uint64_t step_salt, int index) {
  Rng prng(mix64(step_salt, static_cast<std::uint64_t>(index)));
  const Eigen::RowVectorXd row = (ctx.other_label >= 0 && !model.transitions.coupled.empty())
                                     ? model.transitions.coupled.row(p.label, ctx.other_label)
                                     : Eigen::RowVectorXd(model.transitions.single.row(p.label));
  const int next = sample_row(row, prng.uniform01());
  if (next != p.label) {
    p.mean = model.vocab.clusters[next].mean.stacked();
    p.cov = model.vocab.clusters[next].covariance;
  } else {
    const auto& dyn = model.dynamics;
    p.mean = dyn.dynamic * p.mean + dyn.control * model.control_for(next);
    p.cov = dyn.dynamic * p.cov * dyn.dynamic.transpose() + dyn.process_noise;
  }
  p.label = next;
}

}  // namespace

void predict(BeliefState& belief, const gdbn::ClassModel& model, const PredictContext& ctx,
             Rng& rng, Execution exec) {
  if (model.vocab.state_dim() != belief.particles[0].mean.size())
    throw std::invalid_argument("predict: model/belief dimension mismatch");
  const std::uint64_t step_salt = rng.next_u64();
  const int L = belief.size();
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < L; i++) predict_one(belief.particles[i], model, ctx, step_salt, i);
  } else {
    for (int i = 0; i < L; i++) predict_one(belief.particles[i], model, ctx, step_salt, i);
  }
}

namespace {

struct UpdateScratch {
  double loglike = 0.0;
};

void update_one(Particle& p, const Eigen::VectorXd& z, const gdbn::DynamicsParameters& dyn,
                UpdateScratch& scratch) {
  const Eigen::MatrixXd& H = dyn.observation;
  const Eigen::VectorXd innov = z - H * p.mean;
  const Eigen::MatrixXd S = H * p.cov * H.transpose() + dyn.observation_noise;
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  const Eigen::MatrixXd L = llt.matrixL();
  const double logdet = 2.0 * L.diagonal().array().log().sum();
  const double maha = innov.dot(llt.solve(innov));
  scratch.loglike =
      -0.5 * (logdet + maha + z.size() * 1.8378770664093454835606594728112);
  const Eigen::MatrixXd K = p.cov * H.transpose() * llt.solve(
      Eigen::MatrixXd::Identity(S.rows(), S.cols()));
  p.mean += K * innov;
  p.cov = (Eigen::MatrixXd::Identity(p.cov.rows(), p.cov.cols()) - K * H) * p.cov;
}

}  // namespace

AbnormalitySignal update(BeliefState& belief, const Eigen::VectorXd& observation,
                         const gdbn::ClassModel& model, Rng& rng, Execution exec) {
  if (!observation.allFinite()) throw std::invalid_argument("update: non-finite observation");
  const auto& dyn = model.dynamics;
  if (observation.size() != dyn.obs_dim())
    throw std::invalid_argument("update: observation dimension mismatch");

  const int L = belief.size();
  const int C = model.vocab.size();

  // predicted observation-space message, moment-matched over particles
  AbnormalitySignal abn;
  {
    const Eigen::MatrixXd& H = dyn.observation;
    Eigen::VectorXd zbar = Eigen::VectorXd::Zero(observation.size());
    for (const auto& p : belief.particles) zbar += p.weight * (H * p.mean);
    Eigen::MatrixXd zcov = Eigen::MatrixXd::Zero(observation.size(), observation.size());
    for (const auto& p : belief.particles) {
      const Eigen::VectorXd zm = H * p.mean - zbar;
      zcov += p.weight * (H * p.cov * H.transpose() + zm * zm.transpose());
    }
    zcov += dyn.observation_noise;
    abn.continuous = abnormality(zbar, zcov, observation, dyn.observation_noise);
  }
  const Eigen::VectorXd predicted_labels = belief.label_distribution(C);

  std::vector<UpdateScratch> scratch(L);
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < L; i++) update_one(belief.particles[i], observation, dyn, scratch[i]);
  } else {
    for (int i = 0; i < L; i++) update_one(belief.particles[i], observation, dyn, scratch[i]);
  }

  double maxll = -std::numeric_limits<double>::infinity();
  for (const auto& s : scratch) maxll = std::max(maxll, s.loglike);
  if (std::isfinite(maxll)) {
    double total = 0.0;
    for (int i = 0; i < L; i++) {
      belief.particles[i].weight *= std::exp(scratch[i].loglike - maxll);
      total += belief.particles[i].weight;
    }
    if (total > 0.0) {
      for (auto& p : belief.particles) p.weight /= total;
    } else {
      // degenerate evidence: flatten rather than divide by zero; the
      // abnormality above already reports the mismatch
      for (auto& p : belief.particles) p.weight = 1.0 / L;
    }
  }
  // non-finite max likelihood (e.g. infinite observation noise) leaves the
  // weights untouched: the evidence carries no information

  abn.discrete = categorical_kl(predicted_labels, belief.label_distribution(C));

  if (belief.effective_sample_size() < 0.5 * L) systematic_resample(belief, rng);
  return abn;
}

void systematic_resample(BeliefState& belief, Rng& rng) {
  const int L = belief.size();
  double total = 0.0;
  for (const auto& p : belief.particles) total += p.weight;
  if (total <= 0.0) throw std::runtime_error("systematic_resample: all weights zero");

  const double u0 = rng.uniform01() / L;
  std::vector<Particle> out;
  out.reserve(L);
  double cum = belief.particles[0].weight / total;
  int idx = 0;
  for (int i = 0; i < L; i++) {
    const double u = u0 + static_cast<double>(i) / L;
    while (u > cum && idx + 1 < L) {
      idx++;
      cum += belief.particles[idx].weight / total;
    }
    Particle p = belief.particles[idx];
    p.weight = 1.0 / L;
    out.push_back(std::move(p));
  }
  belief.particles = std::move(out);
}

PredictedObservation predicted_observation(const BeliefState& belief,
                                           const gdbn::ClassModel& model,
                                           const PredictContext& ctx) {
  const auto& dyn = model.dynamics;
  const Eigen::MatrixXd& H = dyn.observation;
  const int C = model.vocab.size();

  // advance each cluster hypothesis once; mix over (particle, next label)
  std::vector<Eigen::VectorXd> anchor_mean(C);
  std::vector<Eigen::MatrixXd> anchor_cov(C);
  for (int c = 0; c < C; c++) {
    anchor_mean[c] = H * model.vocab.clusters[c].mean.stacked();
    anchor_cov[c] = H * model.vocab.clusters[c].covariance * H.transpose();
  }

  PredictedObservation out;
  out.mean = Eigen::VectorXd::Zero(H.rows());
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(H.rows(), H.rows());
  for (const auto& p : belief.particles) {
    const Eigen::RowVectorXd row = (ctx.other_label >= 0 && !model.transitions.coupled.empty())
                                       ? model.transitions.coupled.row(p.label, ctx.other_label)
                                       : Eigen::RowVectorXd(model.transitions.single.row(p.label));
    for (int c = 0; c < C; c++) {
      const double w = p.weight * row(c);
      if (w <= 0.0) continue;
      Eigen::VectorXd m;
      Eigen::MatrixXd v;
      if (c != p.label) {
        m = anchor_mean[c];
        v = anchor_cov[c];
      } else {
        const Eigen::VectorXd adv = dyn.dynamic * p.mean + dyn.control * model.control_for(c);
        m = H * adv;
        v = H * (dyn.dynamic * p.cov * dyn.dynamic.transpose() + dyn.process_noise) * H.transpose();
      }
      out.mean += w * m;
      second += w * (v + m * m.transpose());
    }
  }
  out.cov = second - out.mean * out.mean.transpose() + dyn.observation_noise;
  return out;
}

}  // namespace cnoma::mmjpf
