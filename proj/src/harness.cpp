#include "cnoma/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "cnoma/mmjpf.hpp"
#include "cnoma/phy.hpp"
#include "cnoma/pipeline.hpp"

namespace cnoma::harness {

namespace salt {
constexpr std::uint64_t train = 0x545241494eull;
constexpr std::uint64_t episode = 0x455050ull;
constexpr std::uint64_t slot_synth = 0x534c4f54ull;
constexpr std::uint64_t search = 0x534843ull;
constexpr std::uint64_t policy = 0x504f4cull;
constexpr std::uint64_t filters = 0x46494cull;
constexpr std::uint64_t menu = 0x4d4e55ull;
constexpr std::uint64_t class_su = 0x6355ull;
constexpr std::uint64_t class_pu = 0x6350ull;
constexpr std::uint64_t class_no = 0x634eull;
}  // namespace salt

const std::vector<std::string>& known_policies() {
  static const std::vector<std::string> p = {"active_gdbn", "random", "greedy", "qlearning",
                                             "oracle"};
  return p;
}

Rng episode_rng(std::uint64_t seed, int episode) {
  return Rng(mix64(mix64(seed, salt::episode), static_cast<std::uint64_t>(episode)));
}

std::vector<agent::JointAction> experiment_menu(const ExperimentSpec& spec) {
  Rng menu_rng(mix64(spec.scenario.seed, salt::menu));
  return agent::enumerate_feasible_actions(spec.scenario, spec.agent, menu_rng);
}

void ExperimentSpec::validate() const {
  scenario.validate();
  if (seeds.empty()) throw std::invalid_argument("ExperimentSpec: empty seed list");
  if (episodes < 1) throw std::invalid_argument("ExperimentSpec: episodes must be >= 1");
  if (format != "csv" && format != "json")
    throw std::invalid_argument("ExperimentSpec: format must be csv or json");
  const auto& names = known_policies();
  if (std::find(names.begin(), names.end(), policy) == names.end())
    throw std::invalid_argument("ExperimentSpec: unknown policy '" + policy + "'");
  if (num_particles < 1) throw std::invalid_argument("ExperimentSpec: num_particles must be >= 1");
}

namespace {

Eigen::MatrixXd gains_from_positions(const scenario::ScenarioConfig& cfg,
                                     const std::vector<Eigen::Vector3d>& su_pos,
                                     const Eigen::Vector2d& uav_pos) {
  Eigen::MatrixXd g(cfg.num_subchannels, cfg.num_sus);
  for (int n = 0; n < cfg.num_sus; n++) {
    const Eigen::Vector2d offset = uav_pos - su_pos[n].head<2>();
    const double d = phy::distance(offset, cfg.uav_height);
    const double gain =
        phy::channel_gain(cfg.fading, cfg.shadowing, cfg.reference_gain, d, cfg.path_loss_exponent);
    for (int k = 0; k < cfg.num_subchannels; k++) g(k, n) = gain;
  }
  return g;
}

std::vector<Eigen::Vector3d> su_positions_at(const scenario::SuTrajectory& su, int t) {
  std::vector<Eigen::Vector3d> out(su.num_sus());
  for (int n = 0; n < su.num_sus(); n++) out[n] = su.positions[n][t];
  return out;
}

struct ClassStreams {
  // per (episode, subchannel): one feature sequence per class plus the
  // aligned occupancy labels
  std::vector<std::vector<Eigen::VectorXd>> su, pu, noise;
  std::vector<std::vector<int>> occupancy;
};

ClassStreams build_training_streams(const ExperimentSpec& spec, bool use_oracle,
                                    const std::vector<double>& oracle_grid,
                                    const std::vector<double>& nonzero_grid) {
  const auto& cfg = spec.scenario;
  const phy::NoiseModel noise_model = phy::make_noise_model(cfg);
  ClassStreams streams;

  for (int ep = 0; ep < spec.train.episodes; ep++) {
    Rng ep_rng(mix64(mix64(cfg.seed, salt::train), static_cast<std::uint64_t>(ep)));
    const auto su_traj = scenario::generate_su_mobility(cfg, ep_rng);
    const auto uav_traj = scenario::generate_uav_trajectory(cfg, ep_rng);
    const auto pu_occ = scenario::generate_pu_occupancy(cfg, ep_rng);

    std::vector<std::vector<Eigen::VectorXd>> su_seq(cfg.num_subchannels);
    std::vector<std::vector<Eigen::VectorXd>> pu_seq(cfg.num_subchannels);
    std::vector<std::vector<Eigen::VectorXd>> no_seq(cfg.num_subchannels);

    const std::vector<std::uint8_t> all_idle(cfg.num_subchannels, 0);
    const std::vector<std::uint8_t> all_busy(cfg.num_subchannels, 1);
    const phy::Allocation silent = phy::Allocation::zeros(cfg.num_subchannels, cfg.num_sus);

    for (int t = 0; t < cfg.num_time_steps; t++) {
      const Eigen::MatrixXd gains =
          gains_from_positions(cfg, su_positions_at(su_traj, t), uav_traj.horizontal[t]);

      agent::JointAction labeled;
      if (use_oracle) {
        labeled = baselines::exhaustive_oracle(gains, cfg, oracle_grid, Execution::parallel,
                                               spec.train.oracle_max_enumeration)
                      .best;
      } else {
        Rng search_rng = ep_rng.fork(mix64(salt::search, static_cast<std::uint64_t>(t)));
        labeled = baselines::random_search_allocation(gains, cfg, nonzero_grid,
                                                      spec.train.search_samples, search_rng);
      }

      const Rng synth_rng = ep_rng.fork(mix64(salt::slot_synth, static_cast<std::uint64_t>(t)));
      const auto su_blocks = phy::synthesize_received(labeled.alloc, {gains}, all_idle, noise_model,
                                                      cfg.pu_rx_power, cfg.block_len,
                                                      synth_rng.fork(salt::class_su));
      const auto pu_blocks = phy::synthesize_received(silent, {gains}, all_busy, noise_model,
                                                      cfg.pu_rx_power, cfg.block_len,
                                                      synth_rng.fork(salt::class_pu));
      const auto no_blocks = phy::synthesize_received(silent, {gains}, all_idle, noise_model,
                                                      cfg.pu_rx_power, cfg.block_len,
                                                      synth_rng.fork(salt::class_no));
      gdbn::EncoderParams enc;
      enc.block_len = cfg.block_len;
      for (int k = 0; k < cfg.num_subchannels; k++) {
        su_seq[k].push_back(pipeline::encode_block(su_blocks[k], enc));
        pu_seq[k].push_back(pipeline::encode_block(pu_blocks[k], enc));
        no_seq[k].push_back(pipeline::encode_block(no_blocks[k], enc));
      }
    }

    for (int k = 0; k < cfg.num_subchannels; k++) {
      streams.su.push_back(std::move(su_seq[k]));
      streams.pu.push_back(std::move(pu_seq[k]));
      streams.noise.push_back(std::move(no_seq[k]));
      // occupancy aligned with the generalized errors (indices 1..T-1)
      std::vector<int> occ;
      for (int t = 1; t < cfg.num_time_steps; t++) occ.push_back(pu_occ.occupied[t][k]);
      streams.occupancy.push_back(std::move(occ));
    }
  }
  return streams;
}

gdbn::ClassModel learn_class(const std::vector<std::vector<Eigen::VectorXd>>& sequences,
                             const gdbn::StaticFilterParams& sf, const gdbn::GngParams& gng,
                             double smoothing, double dt,
                             std::vector<std::vector<int>>* labels_out) {
  std::vector<gdbn::GeneralizedState> samples;
  std::vector<std::vector<gdbn::GeneralizedState>> per_seq;
  for (const auto& seq : sequences) {
    auto errors = gdbn::generalized_errors(seq, sf);
    samples.insert(samples.end(), errors.begin(), errors.end());
    per_seq.push_back(std::move(errors));
  }

  gdbn::ClassModel cm;
  cm.vocab = gdbn::gng_learn(samples, gng);
  const int C = cm.vocab.size();

  // raw-feature moments over every training observation
  {
    long n = 0;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
    for (const auto& seq : sequences)
      for (const auto& z : seq) { mean += z; n++; }
    mean /= static_cast<double>(n);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
    for (const auto& seq : sequences)
      for (const auto& z : seq) cov += (z - mean) * (z - mean).transpose();
    cov /= static_cast<double>(n);
    cov += 1e-6 * Eigen::MatrixXd::Identity(2, 2);
    cm.feature_mean = mean;
    cm.feature_cov = cov;
  }

  std::vector<std::vector<int>> label_seqs;
  for (const auto& errors : per_seq) {
    std::vector<int> labels;
    labels.reserve(errors.size());
    for (const auto& e : errors) labels.push_back(gdbn::assign_cluster(e, cm.vocab));
    label_seqs.push_back(std::move(labels));
  }
  cm.transitions = gdbn::estimate_transitions(label_seqs, C, smoothing);

  cm.dynamics = gdbn::default_dynamics(cm.vocab.value_dim(), dt, sf.observation_noise);

  // process noise from self-transition residuals
  const int d2 = cm.vocab.state_dim();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d2, d2);
  long count = 0;
  for (std::size_t s = 0; s < per_seq.size(); s++) {
    const auto& errors = per_seq[s];
    const auto& labels = label_seqs[s];
    for (std::size_t t = 0; t + 1 < errors.size(); t++) {
      if (labels[t] != labels[t + 1]) continue;
      const Eigen::VectorXd pred = cm.dynamics.dynamic * errors[t].stacked() +
                                   cm.dynamics.control * cm.control_for(labels[t + 1]);
      const Eigen::VectorXd r = errors[t + 1].stacked() - pred;
      acc += r * r.transpose();
      count++;
    }
  }
  if (count >= 5) {
    acc /= static_cast<double>(count);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (acc + acc.transpose()));
    cm.dynamics.process_noise =
        es.eigenvectors() * es.eigenvalues().cwiseMax(1e-9).asDiagonal() *
        es.eigenvectors().transpose();
  }

  if (labels_out != nullptr) *labels_out = std::move(label_seqs);
  return cm;
}

}  // namespace

gdbn::GenerativeModel train_offline(const ExperimentSpec& spec) {
  spec.validate();
  const auto& cfg = spec.scenario;

  std::vector<double> nonzero_grid = agent::power_grid(cfg.p_max, spec.train.oracle_grid_levels);
  std::vector<double> oracle_grid = {0.0};
  oracle_grid.insert(oracle_grid.end(), nonzero_grid.begin(), nonzero_grid.end());

  const double enum_size =
      std::pow(static_cast<double>(oracle_grid.size()), cfg.num_subchannels * cfg.num_sus);
  bool use_oracle;
  if (spec.train.labels == "oracle") {
    if (enum_size > spec.train.oracle_max_enumeration) throw baselines::OracleTooLarge(enum_size);
    use_oracle = true;
  } else if (spec.train.labels == "search") {
    use_oracle = false;
  } else {
    use_oracle = enum_size <= spec.train.oracle_max_enumeration;
  }

  const ClassStreams streams = build_training_streams(spec, use_oracle, oracle_grid, nonzero_grid);

  gdbn::GngParams gng = spec.train.gng;
  gng.learning_rate = cfg.gng_learning_rate;
  gdbn::StaticFilterParams sf = spec.train.static_filter;
  sf.dt = cfg.slot_duration;

  gdbn::GenerativeModel model;
  model.encoder.block_len = cfg.block_len;
  model.static_filter = sf;

  std::vector<std::vector<int>> su_labels;
  model.su = learn_class(streams.su, sf, gng, spec.train.transition_smoothing, cfg.slot_duration,
                         &su_labels);
  model.pu = learn_class(streams.pu, sf, gng, spec.train.transition_smoothing, cfg.slot_duration,
                         nullptr);
  model.noise = learn_class(streams.noise, sf, gng, spec.train.transition_smoothing,
                            cfg.slot_duration, nullptr);

  model.su.transitions.coupled = gdbn::estimate_coupled_transitions(
      su_labels, streams.occupancy, model.su.vocab.size(), 2, spec.train.transition_smoothing);

  // PU chain estimate pooled from the training occupancy
  std::vector<Eigen::Matrix2d> counts(cfg.num_subchannels, Eigen::Matrix2d::Zero());
  for (std::size_t s = 0; s < streams.occupancy.size(); s++) {
    const int k = static_cast<int>(s) % cfg.num_subchannels;
    const auto& occ = streams.occupancy[s];
    for (std::size_t t = 0; t + 1 < occ.size(); t++) counts[k](occ[t], occ[t + 1]) += 1.0;
  }
  model.t_pu.resize(cfg.num_subchannels);
  for (int k = 0; k < cfg.num_subchannels; k++)
    for (int s = 0; s < 2; s++) {
      const double total = counts[k].row(s).sum() + 2.0;
      for (int j = 0; j < 2; j++) model.t_pu[k](s, j) = (counts[k](s, j) + 1.0) / total;
    }
  return model;
}

namespace {

struct BlockCollectors {
  std::string trace;   // t,k,abn_cont,abn_disc,ess
  std::string rates;   // t,k,n,rate
  bool want_world = false;
  bool collected_world = false;
  scenario::SuTrajectory world_su;
  scenario::UavTrajectory world_uav;
  scenario::PuOccupancy world_pu;
};

int modal_su_label(const pipeline::FilterBank& bank) {
  std::map<int, int> votes;
  for (int k = 0; k < bank.num_subchannels(); k++)
    if (bank.cls(k) == gdbn::SignalClass::su && bank.map_label(k) >= 0) votes[bank.map_label(k)]++;
  int best = -1, best_votes = 0;
  for (const auto& [label, v] : votes)
    if (v > best_votes) { best = label; best_votes = v; }
  return best;
}

std::vector<EpisodeMetrics> run_seed_block(const ExperimentSpec& spec,
                                           const gdbn::GenerativeModel& model, std::uint64_t seed,
                                           BlockCollectors* collect,
                                           const RunOptions* options) {
  const auto& cfg = spec.scenario;
  const int K = cfg.num_subchannels;
  const int T = cfg.num_time_steps;
  const phy::NoiseModel noise_model = phy::make_noise_model(cfg);
  const double eta = noise_model.eta;
  gdbn::EncoderParams enc = model.encoder;

  // one menu per experiment, shared by every policy and seed
  const std::vector<agent::JointAction> menu = experiment_menu(spec);
  const int A = static_cast<int>(menu.size());

  const bool is_agent = spec.policy == "active_gdbn";
  const bool is_q = spec.policy == "qlearning";
  const bool is_random = spec.policy == "random";
  const bool is_greedy = spec.policy == "greedy";

  agent::ActiveGdbnAgent gdbn_agent(menu, spec.agent, K);
  agent::PuPredictor predictor(K);
  predictor.prime(model.t_pu, spec.train.pu_prime_weight);
  if (options != nullptr && !options->agent_state_in.empty() && is_agent)
    gdbn_agent.load(options->agent_state_in, predictor);
  baselines::QTable qtable;

  std::vector<double> oracle_grid = {0.0};
  for (double g : agent::power_grid(cfg.p_max, spec.train.oracle_grid_levels))
    oracle_grid.push_back(g);

  std::vector<EpisodeMetrics> episodes;
  episodes.reserve(spec.episodes);

  for (int e = 0; e < spec.episodes; e++) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng ep_rng = episode_rng(seed, e);
    const auto su_traj = scenario::generate_su_mobility(cfg, ep_rng);
    const auto base_uav = scenario::generate_uav_trajectory(cfg, ep_rng);
    const auto pu_occ = scenario::generate_pu_occupancy(cfg, ep_rng);

    if (collect != nullptr && collect->want_world && !collect->collected_world) {
      collect->world_su = su_traj;
      collect->world_uav = base_uav;
      collect->world_pu = pu_occ;
      collect->collected_world = true;
    }

    pipeline::FilterBank bank(model, K, spec.num_particles, ep_rng.fork(salt::filters));
    predictor.reset_belief();
    Rng policy_rng = ep_rng.fork(salt::policy);

    // heading state used only when the trajectory action is enabled
    double heading = std::atan2(base_uav.horizontal.size() > 1
                                    ? (base_uav.horizontal[1] - base_uav.horizontal[0]).y()
                                    : 0.0,
                                base_uav.horizontal.size() > 1
                                    ? (base_uav.horizontal[1] - base_uav.horizontal[0]).x()
                                    : 1.0);
    Eigen::Vector2d uav_pos = base_uav.horizontal[0];

    EpisodeMetrics em;
    em.seed = seed;
    em.episode = e;
    em.slots.resize(T);
    double cum = 0.0;

    for (int t = 0; t < T; t++) {
      const Eigen::Vector2d pos = spec.agent.trajectory_action ? uav_pos : base_uav.horizontal[t];
      const Eigen::MatrixXd gains = gains_from_positions(cfg, su_positions_at(su_traj, t), pos);

      predictor.predict_step();
      std::vector<int> pu_pred(K);
      for (int k = 0; k < K; k++) pu_pred[k] = predictor.belief(k) > 0.5 ? 1 : 0;

      agent::Context ctx;
      ctx.su_label = modal_su_label(bank);
      ctx.pu_pattern = predictor.pattern();

      auto expected_class = [&](const agent::JointAction& a, int k) {
        if (a.alloc.b.row(k).sum() > 0) return gdbn::SignalClass::su;
        return pu_pred[k] ? gdbn::SignalClass::pu : gdbn::SignalClass::noise;
      };

      int choice = -1;
      agent::JointAction action;
      if (is_agent) {
        // candidates are scored against the preference model (the su-class
        // vocabulary learned from the optimizer's decisions) on every
        // subchannel: outcomes the optimizer would not have produced, idle
        // channels included, predict as surprising
        std::vector<double> predicted(A, 0.0);
        for (int a = 0; a < A; a++) {
          double total = 0.0;
          for (int k = 0; k < K; k++) {
            double su_rx = 0.0;
            for (int n = 0; n < cfg.num_sus; n++)
              if (menu[a].alloc.b(k, n)) su_rx += menu[a].alloc.p(k, n) * gains(k, n);
            const Eigen::Vector2d feat = pipeline::expected_feature(
                su_rx, predictor.belief(k), cfg.pu_rx_power, eta, enc);
            total += bank.predicted_abnormality(gdbn::SignalClass::su, feat);
          }
          predicted[a] = total;
        }
        const auto mode = gdbn_agent.temperature() > spec.agent.temperature_floor
                              ? agent::SelectionMode::explore
                              : agent::SelectionMode::exploit;
        choice = gdbn_agent.select_action(ctx, predicted, predictor, mode, policy_rng);
        action = menu[choice];
      } else if (is_random) {
        choice = policy_rng.uniform_int(A);
        action = menu[choice];
      } else if (is_q) {
        choice = baselines::q_learning_policy(qtable, ctx.key(), A, policy_rng);
        action = menu[choice];
      } else if (is_greedy) {
        action = baselines::greedy_policy(gains, cfg);
      } else {  // oracle
        action = baselines::exhaustive_oracle(gains, cfg, oracle_grid, Execution::serial).best;
      }

      if (spec.agent.trajectory_action) {
        heading += action.heading_increment;
        uav_pos += cfg.uav_speed * cfg.slot_duration *
                   Eigen::Vector2d(std::cos(heading), std::sin(heading));
      }

      const auto& occupancy = pu_occ.occupied[t];
      const Rng synth_rng = ep_rng.fork(mix64(salt::slot_synth, static_cast<std::uint64_t>(t)));
      const auto blocks = phy::synthesize_received(action.alloc, {gains}, occupancy, noise_model,
                                                   cfg.pu_rx_power, cfg.block_len, synth_rng);

      mmjpf::AbnormalitySignal abn_total;
      Rng filt_rng = ep_rng.fork(mix64(salt::filters, static_cast<std::uint64_t>(t) + 1));
      for (int k = 0; k < K; k++) {
        const Eigen::Vector2d feat = pipeline::encode_block(blocks[k], enc);
        const auto res = bank.step(k, expected_class(action, k), feat, pu_pred[k], filt_rng,
                                   Execution::serial);
        if (res.warm) {
          abn_total.continuous += res.abn.continuous;
          abn_total.discrete += res.abn.discrete;
        }
        if (collect != nullptr && e == 0) {
          collect->trace += std::to_string(t) + ',' + std::to_string(k) + ',' +
                            format_double(res.abn.continuous) + ',' +
                            format_double(res.abn.discrete) + ',' + format_double(res.ess) + '\n';
        }
      }

      const double rate = phy::sum_rate(action.alloc, gains, eta);
      if (collect != nullptr && e == 0) {
        phy::ChannelRealization ch;
        ch.gains = gains;
        phy::append_rates_csv(collect->rates, t, action.alloc, ch, eta);
      }
      const auto rep = phy::check_constraints(action.alloc, nullptr, cfg);
      int violations = 0;
      for (const auto& v : rep.violated)
        if (v == "C1" || v == "C2" || v == "C3" || v == "C4") violations++;

      if (is_agent) {
        agent::SlotOutcome outcome;
        outcome.context = ctx;
        outcome.candidate = choice;
        outcome.score = gdbn_agent.evaluate_action(abn_total, rate);
        outcome.occupancy.assign(occupancy.begin(), occupancy.end());
        gdbn_agent.update_model(outcome, predictor);
      } else {
        predictor.observe(std::vector<std::uint8_t>(occupancy.begin(), occupancy.end()));
        if (is_q) {
          agent::Context next_ctx;
          next_ctx.su_label = modal_su_label(bank);
          next_ctx.pu_pattern = predictor.pattern();
          baselines::q_update(qtable, ctx.key(), choice, rate, next_ctx.key(), A);
        }
      }

      cum += rate;
      em.slots[t] = {rate, cum, abn_total.continuous, abn_total.discrete, violations};
    }

    em.episode_rate = cum;
    em.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    episodes.push_back(std::move(em));

    if (is_agent) gdbn_agent.decay_temperature();
    if (is_q) qtable.epsilon = std::max(qtable.epsilon * qtable.epsilon_decay, qtable.epsilon_floor);
  }
  if (options != nullptr && !options->agent_state_out.empty() && is_agent)
    gdbn_agent.save(options->agent_state_out, predictor);
  return episodes;
}

}  // namespace

std::vector<EpisodeMetrics> run_experiment(const ExperimentSpec& spec,
                                           const gdbn::GenerativeModel& model,
                                           const RunOptions& options) {
  spec.validate();
  const int S = static_cast<int>(spec.seeds.size());
  std::vector<std::vector<EpisodeMetrics>> blocks(S);
  std::vector<std::string> errors(S);

  BlockCollectors collect;
  collect.want_world = !options.world_path.empty();

  if (options.exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int si = 0; si < S; si++) {
      try {
        blocks[si] = run_seed_block(spec, model, spec.seeds[si], si == 0 ? &collect : nullptr,
                                    si == 0 ? &options : nullptr);
      } catch (const std::exception& ex) {
        errors[si] = ex.what();
      }
    }
  } else {
    for (int si = 0; si < S; si++) {
      try {
        blocks[si] = run_seed_block(spec, model, spec.seeds[si], si == 0 ? &collect : nullptr,
                                    si == 0 ? &options : nullptr);
      } catch (const std::exception& ex) {
        errors[si] = ex.what();
      }
    }
  }
  for (const auto& err : errors)
    if (!err.empty()) throw std::runtime_error(err);

  if (!options.world_path.empty() && collect.collected_world) {
    scenario::export_trajectories_csv(options.world_path, collect.world_su, collect.world_uav);
    scenario::export_occupancy_csv(options.world_path + ".occupancy.csv", collect.world_pu);
  }
  if (!options.trace_path.empty()) {
    std::ofstream out(options.trace_path);
    if (!out) throw std::runtime_error("cannot open " + options.trace_path);
    out << "t,k,abn_cont,abn_disc,ess\n" << collect.trace;
  }
  if (!options.rates_path.empty()) {
    std::ofstream out(options.rates_path);
    if (!out) throw std::runtime_error("cannot open " + options.rates_path);
    out << "t,k,n,rate\n" << collect.rates;
  }

  std::vector<EpisodeMetrics> all;
  for (auto& b : blocks)
    for (auto& em : b) all.push_back(std::move(em));
  return all;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<MetricsRow> flatten(const std::vector<EpisodeMetrics>& metrics,
                                const std::string& policy) {
  std::vector<MetricsRow> rows;
  for (const auto& em : metrics)
    for (std::size_t t = 0; t < em.slots.size(); t++) {
      const auto& s = em.slots[t];
      rows.push_back({policy, em.seed, em.episode, static_cast<int>(t), s.sum_rate,
                      s.cum_sum_rate, s.abn_cont, s.abn_disc, s.violations});
    }
  return rows;
}

void emit_metrics(const std::vector<EpisodeMetrics>& metrics, const std::string& policy,
                  const std::string& format, const std::string& path) {
  if (metrics.empty()) throw std::invalid_argument("emit_metrics: empty metrics");
  const auto rows = flatten(metrics, policy);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);

  if (format == "csv") {
    out << "policy,seed,episode,slot,sum_rate,cum_sum_rate,abn_cont,abn_disc,violations\n";
    for (const auto& r : rows)
      out << r.policy << ',' << r.seed << ',' << r.episode << ',' << r.slot << ','
          << format_double(r.sum_rate) << ',' << format_double(r.cum_sum_rate) << ','
          << format_double(r.abn_cont) << ',' << format_double(r.abn_disc) << ','
          << r.violations << '\n';
  } else if (format == "json") {
    out << "[\n";
    for (std::size_t i = 0; i < rows.size(); i++) {
      const auto& r = rows[i];
      out << " {\"policy\":\"" << r.policy << "\",\"seed\":" << r.seed
          << ",\"episode\":" << r.episode << ",\"slot\":" << r.slot
          << ",\"sum_rate\":" << format_double(r.sum_rate)
          << ",\"cum_sum_rate\":" << format_double(r.cum_sum_rate)
          << ",\"abn_cont\":" << format_double(r.abn_cont)
          << ",\"abn_disc\":" << format_double(r.abn_disc) << ",\"violations\":" << r.violations
          << '}' << (i + 1 < rows.size() ? "," : "") << '\n';
    }
    out << "]\n";
  } else {
    throw std::invalid_argument("emit_metrics: format must be csv or json");
  }
}

namespace {

std::vector<MetricsRow> load_metrics_csv_stream(std::istream& in) {
  std::vector<MetricsRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, r.policy, ',');
    std::getline(ss, field, ',');
    r.seed = std::stoull(field);
    std::getline(ss, field, ',');
    r.episode = std::stoi(field);
    std::getline(ss, field, ',');
    r.slot = std::stoi(field);
    std::getline(ss, field, ',');
    r.sum_rate = std::stod(field);
    std::getline(ss, field, ',');
    r.cum_sum_rate = std::stod(field);
    std::getline(ss, field, ',');
    r.abn_cont = std::stod(field);
    std::getline(ss, field, ',');
    r.abn_disc = std::stod(field);
    std::getline(ss, field, ',');
    r.violations = std::stoi(field);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

std::vector<MetricsRow> load_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const int first = in.peek();
  if (first == '[') {
    nlohmann::json j;
    in >> j;
    std::vector<MetricsRow> rows;
    for (const auto& e : j) {
      MetricsRow r;
      r.policy = e.at("policy").get<std::string>();
      r.seed = e.at("seed").get<std::uint64_t>();
      r.episode = e.at("episode").get<int>();
      r.slot = e.at("slot").get<int>();
      r.sum_rate = e.at("sum_rate").get<double>();
      r.cum_sum_rate = e.at("cum_sum_rate").get<double>();
      r.abn_cont = e.at("abn_cont").get<double>();
      r.abn_disc = e.at("abn_disc").get<double>();
      r.violations = e.at("violations").get<int>();
      rows.push_back(std::move(r));
    }
    return rows;
  }
  return load_metrics_csv_stream(in);
}

namespace {

struct EpisodeKey {
  std::string policy;
  std::uint64_t seed;
  int episode;
  bool operator<(const EpisodeKey& o) const {
    if (policy != o.policy) return policy < o.policy;
    if (seed != o.seed) return seed < o.seed;
    return episode < o.episode;
  }
};

}  // namespace

std::vector<PolicySummary> summarize(const std::vector<MetricsRow>& rows) {
  // per-episode totals
  std::map<EpisodeKey, double> totals;
  for (const auto& r : rows) totals[{r.policy, r.seed, r.episode}] += r.sum_rate;

  std::map<std::string, std::map<std::uint64_t, std::vector<double>>> by_policy_seed;
  for (const auto& [key, total] : totals)
    by_policy_seed[key.policy][key.seed].push_back(total);  // episode order via map key order

  std::vector<PolicySummary> out;
  for (const auto& [policy, seeds] : by_policy_seed) {
    PolicySummary ps;
    ps.policy = policy;
    std::vector<double> all;
    for (const auto& [seed, rates] : seeds) {
      SeedSummary s;
      s.seed = seed;
      const int E = static_cast<int>(rates.size());
      double mean = 0.0;
      for (double r : rates) mean += r;
      mean /= E;
      double var = 0.0;
      for (double r : rates) var += (r - mean) * (r - mean);
      s.mean_episode_rate = mean;
      s.stddev_episode_rate = E > 1 ? std::sqrt(var / (E - 1)) : 0.0;

      const int tail = std::min(20, E);
      double target = 0.0;
      for (int i = E - tail; i < E; i++) target += rates[i];
      target /= tail;
      s.final20_mean = target;
      s.convergence_episode = E - 1;
      for (int i = 0; i < E; i++) {
        const bool close = target == 0.0 ? std::abs(rates[i]) <= 1e-12
                                         : std::abs(rates[i] - target) <= 0.10 * std::abs(target);
        if (close) {
          s.convergence_episode = i;
          break;
        }
      }
      ps.seeds.push_back(s);
      all.insert(all.end(), rates.begin(), rates.end());
    }
    double mean = 0.0;
    for (double r : all) mean += r;
    mean /= all.size();
    double var = 0.0;
    for (double r : all) var += (r - mean) * (r - mean);
    ps.mean_episode_rate = mean;
    ps.stddev_episode_rate = all.size() > 1 ? std::sqrt(var / (all.size() - 1)) : 0.0;
    out.push_back(std::move(ps));
  }
  return out;
}

void write_summary_csv(const std::string& path, const std::vector<PolicySummary>& summaries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "policy,seed,mean_episode_rate,stddev_episode_rate,convergence_episode,final20_mean\n";
  for (const auto& ps : summaries)
    for (const auto& s : ps.seeds)
      out << ps.policy << ',' << s.seed << ',' << format_double(s.mean_episode_rate) << ','
          << format_double(s.stddev_episode_rate) << ',' << s.convergence_episode << ','
          << format_double(s.final20_mean) << '\n';
}

void write_plot_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::map<EpisodeKey, double> totals;
  for (const auto& r : rows) totals[{r.policy, r.seed, r.episode}] += r.sum_rate;

  std::map<std::pair<std::string, int>, std::vector<double>> by_policy_episode;
  for (const auto& [key, total] : totals)
    by_policy_episode[{key.policy, key.episode}].push_back(total);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "policy,episode,mean_episode_rate,stddev_episode_rate\n";
  for (const auto& [key, vals] : by_policy_episode) {
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= vals.size();
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double sd = vals.size() > 1 ? std::sqrt(var / (vals.size() - 1)) : 0.0;
    out << key.first << ',' << key.second << ',' << format_double(mean) << ','
        << format_double(sd) << '\n';
  }
}

std::string summary_table(const std::vector<PolicySummary>& summaries) {
  std::string s;
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %10s %10s %12s\n", "policy", "mean", "stddev",
                "convergence");
  s += line;
  for (const auto& ps : summaries) {
    double conv = 0.0;
    for (const auto& seed : ps.seeds) conv += seed.convergence_episode;
    conv /= ps.seeds.empty() ? 1.0 : static_cast<double>(ps.seeds.size());
    std::snprintf(line, sizeof(line), "%-12s %10.3f %10.3f %12.1f\n", ps.policy.c_str(),
                  ps.mean_episode_rate, ps.stddev_episode_rate, conv);
    s += line;
  }
  return s;
}

}  // namespace cnoma::harness
