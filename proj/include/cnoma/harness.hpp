#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cnoma/agent.hpp"
#include "cnoma/baselines.hpp"
#include "cnoma/gdbn.hpp"
#include "cnoma/parallel.hpp"
#include "cnoma/scenario.hpp"

namespace cnoma::harness {

struct TrainParams {
  int episodes = 24;
  std::string labels = "auto";  // auto | oracle | search
  int oracle_grid_levels = 3;   // nonzero levels; 0 joins the grid implicitly
  double oracle_max_enumeration = 1e7;
  int search_samples = 1500;
  double transition_smoothing = 1e-3;
  double pu_prime_weight = 50.0;  // pseudo-observations seeding the online predictor
  gdbn::GngParams gng;
  gdbn::StaticFilterParams static_filter;
};

struct ExperimentSpec {
  scenario::ScenarioConfig scenario;
  agent::AgentParams agent;
  TrainParams train;
  std::string policy = "active_gdbn";
  int episodes = 100;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int num_particles = 200;
  std::string out_path;
  std::string format = "csv";  // csv | json

  void validate() const;  // throws on unknown policy, empty seeds, bad format
};

const std::vector<std::string>& known_policies();

// the per-episode stream root used by run_experiment and train_offline
Rng episode_rng(std::uint64_t seed, int episode);

// the fixed candidate menu an experiment uses (shared by every policy/seed)
std::vector<agent::JointAction> experiment_menu(const ExperimentSpec& spec);

// Builds the generative model from scenario episodes labeled by the
// exhaustive oracle (or seeded random search when the instance is too
// large); deterministic in the scenario seed.
gdbn::GenerativeModel train_offline(const ExperimentSpec& spec);

struct SlotRecord {
  double sum_rate = 0.0;
  double cum_sum_rate = 0.0;
  double abn_cont = 0.0;
  double abn_disc = 0.0;
  int violations = 0;
};

struct EpisodeMetrics {
  std::uint64_t seed = 0;
  int episode = 0;
  std::vector<SlotRecord> slots;
  double episode_rate = 0.0;  // sum over slots
  double wall_seconds = 0.0;  // diagnostics only, never serialized
};

struct RunOptions {
  Execution exec = Execution::parallel;  // parallel runs one seed per thread
  std::string trace_path;                // optional t,k,abn_cont,abn_disc,ess CSV
  std::string rates_path;                // optional t,k,n,rate CSV
  std::string world_path;                // optional episode-0 trajectory CSV
  std::string agent_state_in;            // resume tables/predictor (first seed)
  std::string agent_state_out;           // persist tables/predictor (first seed)
};

// policy episodes for every seed, ordered by (seed, episode)
std::vector<EpisodeMetrics> run_experiment(const ExperimentSpec& spec,
                                           const gdbn::GenerativeModel& model,
                                           const RunOptions& options = {});

// round-trip-exact decimal with at least 12 significant digits
std::string format_double(double v);

struct MetricsRow {
  std::string policy;
  std::uint64_t seed = 0;
  int episode = 0;
  int slot = 0;
  double sum_rate = 0.0;
  double cum_sum_rate = 0.0;
  double abn_cont = 0.0;
  double abn_disc = 0.0;
  int violations = 0;
};

std::vector<MetricsRow> flatten(const std::vector<EpisodeMetrics>& metrics,
                                const std::string& policy);

void emit_metrics(const std::vector<EpisodeMetrics>& metrics, const std::string& policy,
                  const std::string& format, const std::string& path);
std::vector<MetricsRow> load_metrics(const std::string& path);  // sniffs csv vs json

struct SeedSummary {
  std::uint64_t seed = 0;
  double mean_episode_rate = 0.0;
  double stddev_episode_rate = 0.0;
  int convergence_episode = 0;  // first episode within 10% of the final-20 mean
  double final20_mean = 0.0;
};

struct PolicySummary {
  std::string policy;
  std::vector<SeedSummary> seeds;
  double mean_episode_rate = 0.0;
  double stddev_episode_rate = 0.0;
};

std::vector<PolicySummary> summarize(const std::vector<MetricsRow>& rows);
void write_summary_csv(const std::string& path, const std::vector<PolicySummary>& summaries);
// plot-ready: policy,episode,mean_episode_rate,stddev_episode_rate across seeds
void write_plot_csv(const std::string& path, const std::vector<MetricsRow>& rows);
std::string summary_table(const std::vector<PolicySummary>& summaries);

}  // namespace cnoma::harness
