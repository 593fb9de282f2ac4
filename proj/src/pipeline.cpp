#include "cnoma/pipeline.hpp"

#include <cmath>

namespace cnoma::pipeline {

Eigen::Vector2d encode_block(const phy::SymbolBlock& block, const gdbn::EncoderParams& params) {
  double pi = 0.0, pq = 0.0;
  for (const auto& y : block) {
    pi += y.real() * y.real();
    pq += y.imag() * y.imag();
  }
  const double inv = 1.0 / static_cast<double>(block.size());
  return {std::log(pi * inv + params.power_floor), std::log(pq * inv + params.power_floor)};
}

Eigen::Vector2d expected_feature(double su_rx_power, double pu_busy_prob, double pu_rx_power,
                                 double eta, const gdbn::EncoderParams& params) {
  const double pi = 0.5 * su_rx_power + pu_busy_prob * pu_rx_power + 0.5 * eta;
  const double pq = 0.5 * su_rx_power + 0.5 * eta;
  return {std::log(pi + params.power_floor), std::log(pq + params.power_floor)};
}

FilterBank::FilterBank(const gdbn::GenerativeModel& model, int num_subchannels, int num_particles,
                       const Rng& rng)
    : model_(&model), num_particles_(num_particles), seed_(rng.seed()) {
  chans_.reserve(num_subchannels);
  for (int k = 0; k < num_subchannels; k++) {
    Chan c{gdbn::StaticEvolutionFilter(model.static_filter, 2), gdbn::SignalClass::noise,
           mmjpf::BeliefState{}, -1};
    Rng init_rng = rng.fork(mix64(0x42414e4bu, static_cast<std::uint64_t>(k)));
    c.belief = mmjpf::init_belief(model.cls(c.cls), num_particles, init_rng);
    chans_.push_back(std::move(c));
  }

}

FilterBank::StepResult FilterBank::step(int k, gdbn::SignalClass expected,
                                        const Eigen::Vector2d& raw_feature, int pu_label,
                                        Rng& rng, Execution exec) {
  Chan& c = chans_[k];
  StepResult out;

  const gdbn::GeneralizedState err = c.static_stage.step(raw_feature);
  out.static_abnormality = c.static_stage.last_abnormality();
  if (!c.static_stage.warm()) return out;  // first observation only primes the stage
  out.warm = true;

  if (expected != c.cls) {
    c.cls = expected;
    Rng reinit = rng.fork(mix64(0x52494e49u, static_cast<std::uint64_t>(k)));
    c.belief = mmjpf::init_belief(model_->cls(expected), num_particles_, reinit);
  }
  const auto& cm = model_->cls(c.cls);

  mmjpf::PredictContext ctx;
  ctx.other_label = pu_label;
  Rng step_rng = rng.fork(mix64(0x53544550u, static_cast<std::uint64_t>(k)));
  mmjpf::predict(c.belief, cm, ctx, step_rng, exec);
  out.abn = mmjpf::update(c.belief, err.value, cm, step_rng, exec);

  const Eigen::VectorXd dist = c.belief.label_distribution(cm.vocab.size());
  int best = 0;
  for (int j = 1; j < dist.size(); j++)
    if (dist(j) > dist(best)) best = j;
  c.map_label = best;
  out.map_label = best;
  out.cls = c.cls;
  out.ess = c.belief.effective_sample_size();
  return out;
}

double FilterBank::predicted_abnormality(gdbn::SignalClass expected,
                                         const Eigen::Vector2d& expected_raw_feature) const {
  // history-free preference mismatch: the candidate's expected raw feature
  // against the class's training-stream feature distribution
  const auto& cm = model_->cls(expected);
  const Eigen::Matrix2d enc_noise =
      model_->static_filter.observation_noise * Eigen::Matrix2d::Identity();
  return mmjpf::abnormality(cm.feature_mean, cm.feature_cov, expected_raw_feature, enc_noise);
}

}  // namespace cnoma::pipeline
