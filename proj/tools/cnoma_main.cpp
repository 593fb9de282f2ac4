// command-line front end: train / run / oracle / report

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cnoma/baselines.hpp"
#include "cnoma/harness.hpp"
#include "cnoma/phy.hpp"
#include "cnoma/pipeline.hpp"

namespace {

using cnoma::harness::ExperimentSpec;

void add_config_options(CLI::App* cmd, ExperimentSpec& spec) {
  auto& sc = spec.scenario;
  cmd->add_option("--cell_radius", sc.cell_radius, "cell radius [m]");
  cmd->add_option("--uav_height", sc.uav_height, "UAV flight height H [m]");
  cmd->add_option("--uav_speed", sc.uav_speed, "UAV speed [m/s]");
  cmd->add_option("--uav_init_x", sc.uav_init_x, "initial UAV x [m]");
  cmd->add_option("--uav_init_y", sc.uav_init_y, "initial UAV y [m]");
  cmd->add_option("--time_steps", sc.num_time_steps, "slots per episode T");
  cmd->add_option("--num_sus", sc.num_sus, "secondary users N");
  cmd->add_option("--num_subchannels", sc.num_subchannels, "subchannels K");
  cmd->add_option("--max_multiplexed", sc.max_multiplexed, "max SUs per subchannel M");
  cmd->add_option("--p_max", sc.p_max, "per-SU power budget [W]");
  cmd->add_option("--bandwidth", sc.bandwidth, "system bandwidth [Hz]");
  cmd->add_option("--noise_density", sc.noise_density_dbm, "noise density [dBm/Hz]");
  cmd->add_option("--path_loss_exponent", sc.path_loss_exponent, "path-loss exponent alpha");
  cmd->add_option("--fading", sc.fading, "small-scale fading factor mu");
  cmd->add_option("--shadowing", sc.shadowing, "shadowing factor xi");
  cmd->add_option("--reference_gain", sc.reference_gain, "reference link gain beta");
  cmd->add_option("--power_diff_threshold", sc.power_diff_threshold, "SIC margin P_th");
  cmd->add_option("--pu_rx_power", sc.pu_rx_power, "received PU power [W]");
  cmd->add_option("--block_len", sc.block_len, "symbols per subchannel per slot");
  cmd->add_option("--slot_duration", sc.slot_duration, "slot duration [s]");
  cmd->add_option("--t_max", sc.t_max, "mission duration budget [s]");
  cmd->add_option("--su_perturbation", sc.su_perturbation, "SU per-step perturbation bound [m]");
  cmd->add_option("--su_height_max", sc.su_height_max, "SU height range [m]");
  cmd->add_option("--pu_stay_idle", sc.pu_stay_idle, "PU chain idle->idle probability");
  cmd->add_option("--pu_stay_busy", sc.pu_stay_busy, "PU chain busy->busy probability");
  cmd->add_option("--gng_learning_rate", sc.gng_learning_rate, "GNG winner learning rate");

  auto& ag = spec.agent;
  cmd->add_option("--power_levels", ag.power_levels, "nonzero power grid levels");
  cmd->add_option("--menu_size", ag.menu_size, "sampled candidate menu size");
  cmd->add_option("--temperature_initial", ag.temperature_initial);
  cmd->add_option("--temperature_decay", ag.temperature_decay);
  cmd->add_option("--temperature_floor", ag.temperature_floor);
  cmd->add_option("--w_abnormality", ag.w_abnormality);
  cmd->add_option("--w_table", ag.w_table);
  cmd->add_option("--w_pu", ag.w_pu);
  cmd->add_option("--eval_abnormality_weight", ag.eval_abnormality_weight);
  cmd->add_option("--learn_step", ag.learn_step);
  cmd->add_flag("--trajectory_action", ag.trajectory_action, "enable heading increments");

  auto& tr = spec.train;
  cmd->add_option("--train_episodes", tr.episodes, "offline training episodes");
  cmd->add_option("--labels", tr.labels, "training labeler: auto|oracle|search");
  cmd->add_option("--oracle_grid_levels", tr.oracle_grid_levels);
  cmd->add_option("--search_samples", tr.search_samples);
  cmd->add_option("--transition_smoothing", tr.transition_smoothing);
  cmd->add_option("--gng_max_nodes", tr.gng.max_nodes);
  cmd->add_option("--gng_passes", tr.gng.passes);
  cmd->add_option("--static_process_noise", tr.static_filter.process_noise);
  cmd->add_option("--static_observation_noise", tr.static_filter.observation_noise);

  cmd->add_option("--particles", spec.num_particles, "particles per subchannel filter");

  cmd->set_config("--config", "", "key=value configuration file");
}

int run_train(ExperimentSpec& spec, const std::string& out) {
  const auto model = cnoma::harness::train_offline(spec);
  model.save(out);
  std::cout << "model written to " << out << " (su clusters: " << model.su.vocab.size()
            << ", pu: " << model.pu.vocab.size() << ", noise: " << model.noise.vocab.size()
            << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uplink UAV cognitive-NOMA simulator with an active-inference agent"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "learn a generative model offline");
  ExperimentSpec train_spec;
  std::string train_out = "model.json";
  std::uint64_t train_seed = 1;
  add_config_options(train, train_spec);
  train->add_option("--seed", train_seed, "scenario seed");
  train->add_option("--episodes", train_spec.train.episodes, "training episodes");
  train->add_option("--out", train_out, "model output path");

  // run
  auto* run = app.add_subcommand("run", "evaluate a policy against a trained model");
  ExperimentSpec run_spec;
  std::string model_path = "model.json";
  std::uint64_t run_seed = 1;
  int num_seeds = 1;
  cnoma::harness::RunOptions run_options;
  std::string agent_out;
  bool serial = false;
  add_config_options(run, run_spec);
  run->add_option("--model", model_path, "trained model path");
  run->add_option("--policy", run_spec.policy, "active_gdbn|random|greedy|qlearning|oracle");
  run->add_option("--episodes", run_spec.episodes, "episodes per seed");
  run->add_option("--seed", run_seed, "first run seed");
  run->add_option("--num-seeds", num_seeds, "consecutive seeds starting at --seed");
  run->add_option("--out", run_spec.out_path, "metrics output path")->required();
  run->add_option("--format", run_spec.format, "csv|json");
  run->add_option("--trace-out", run_options.trace_path, "per-slot abnormality trace CSV");
  run->add_option("--rates-out", run_options.rates_path, "per-user rate CSV");
  run->add_option("--world-out", run_options.world_path, "episode-0 trajectory CSV");
  run->add_option("--agent-out", agent_out, "agent state output (applies to the first seed)");
  run->add_option("--agent-in", run_options.agent_state_in, "resume agent state (first seed)");
  run->add_flag("--serial", serial, "disable the parallel seed pool");

  // oracle
  auto* oracle = app.add_subcommand("oracle", "exhaustive optimum of one slot");
  ExperimentSpec oracle_spec;
  std::uint64_t oracle_seed = 1;
  int oracle_slot = 0;
  add_config_options(oracle, oracle_spec);
  oracle->add_option("--seed", oracle_seed, "scenario seed");
  oracle->add_option("--slot", oracle_slot, "slot index");

  // report
  auto* report = app.add_subcommand("report", "summarize a metrics file");
  std::string report_in, report_out, plot_out;
  report->add_option("--in", report_in, "metrics CSV/JSON path")->required();
  report->add_option("--out", report_out, "summary CSV path");
  report->add_option("--plot-out", plot_out, "plot-ready per-episode CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      train_spec.scenario.seed = train_seed;
      return run_train(train_spec, train_out);
    }

    if (run->parsed()) {
      run_spec.scenario.validate();
      run_spec.seeds.clear();
      for (int i = 0; i < num_seeds; i++) run_spec.seeds.push_back(run_seed + i);
      run_options.exec = serial ? cnoma::Execution::serial : cnoma::Execution::parallel;
      run_options.agent_state_out = agent_out;
      const auto model = cnoma::gdbn::GenerativeModel::load(model_path);
      const auto metrics = cnoma::harness::run_experiment(run_spec, model, run_options);
      cnoma::harness::emit_metrics(metrics, run_spec.policy, run_spec.format, run_spec.out_path);
      const auto summaries =
          cnoma::harness::summarize(cnoma::harness::flatten(metrics, run_spec.policy));
      std::cout << cnoma::harness::summary_table(summaries);
      double wall = 0.0;
      for (const auto& em : metrics) wall += em.wall_seconds;
      std::fprintf(stdout, "metrics written to %s (%zu episodes, %.2f s simulated wall time)\n",
                   run_spec.out_path.c_str(), metrics.size(), wall);
      if (!agent_out.empty()) std::cout << "agent state written to " << agent_out << "\n";
      return 0;
    }

    if (oracle->parsed()) {
      oracle_spec.scenario.seed = oracle_seed;
      const auto& cfg = oracle_spec.scenario;
      cfg.validate();
      cnoma::Rng ep_rng = cnoma::harness::episode_rng(oracle_seed, 0);
      const auto su = cnoma::scenario::generate_su_mobility(cfg, ep_rng);
      const auto uav = cnoma::scenario::generate_uav_trajectory(cfg, ep_rng);
      const auto ch = cnoma::phy::channel_at(cfg, su, uav, oracle_slot);
      std::vector<double> grid = {0.0};
      for (double g : cnoma::agent::power_grid(cfg.p_max, oracle_spec.train.oracle_grid_levels))
        grid.push_back(g);
      const auto result = cnoma::baselines::exhaustive_oracle(ch.gains, cfg, grid);
      std::printf("enumerated %.0f combinations, best sum rate %.6f bit/s/Hz\n",
                  result.enumeration_size, result.best_rate);
      for (int k = 0; k < cfg.num_subchannels; k++) {
        std::printf("subchannel %d:", k);
        for (int n = 0; n < cfg.num_sus; n++)
          if (result.best.alloc.b(k, n))
            std::printf(" su%d@%.3gW", n, result.best.alloc.p(k, n));
        std::printf("\n");
      }
      return 0;
    }

    if (report->parsed()) {
      const auto rows = cnoma::harness::load_metrics(report_in);
      const auto summaries = cnoma::harness::summarize(rows);
      std::cout << cnoma::harness::summary_table(summaries);
      if (!report_out.empty()) cnoma::harness::write_summary_csv(report_out, summaries);
      if (!plot_out.empty()) cnoma::harness::write_plot_csv(plot_out, rows);
      return 0;
    }
  } catch (const cnoma::baselines::OracleTooLarge& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
