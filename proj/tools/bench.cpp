// serial vs OpenMP timing for the three hot kernels: the per-particle filter
// step, the exhaustive-oracle scan, and the episode pool

#include <chrono>
#include <cstdio>
#include <vector>

#include "cnoma/baselines.hpp"
#include "cnoma/gdbn.hpp"
#include "cnoma/harness.hpp"
#include "cnoma/mmjpf.hpp"
#include "cnoma/parallel.hpp"

using namespace cnoma;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

gdbn::ClassModel toy_model() {
  gdbn::ClassModel cm;
  for (double center : {-2.0, 0.0, 2.0}) {
    gdbn::Cluster c;
    c.mean.value = Eigen::VectorXd::Constant(2, center);
    c.mean.derivative = Eigen::VectorXd::Constant(2, 0.1 * center);
    c.covariance = 0.05 * Eigen::MatrixXd::Identity(4, 4);
    cm.vocab.clusters.push_back(std::move(c));
  }
  cm.vocab.refresh_cache();
  cm.transitions.single.resize(3, 3);
  cm.transitions.single << 0.8, 0.1, 0.1, 0.1, 0.8, 0.1, 0.1, 0.1, 0.8;
  cm.dynamics = gdbn::default_dynamics(2, 1.0, 0.05);
  return cm;
}

double bench_filter(Execution exec, int particles, int steps) {
  const auto cm = toy_model();
  Rng rng(7);
  auto belief = mmjpf::init_belief(cm, particles, rng);
  Eigen::VectorXd z(2);
  const auto t0 = std::chrono::steady_clock::now();
  for (int t = 0; t < steps; t++) {
    mmjpf::predict(belief, cm, {}, rng, exec);
    z << std::sin(0.1 * t), std::cos(0.1 * t);
    mmjpf::update(belief, z, cm, rng, exec);
  }
  return seconds_since(t0);
}

double bench_oracle(Execution exec) {
  scenario::ScenarioConfig cfg;
  cfg.num_subchannels = 2;
  cfg.num_sus = 5;
  cfg.max_multiplexed = 3;
  Rng rng(11);
  Eigen::MatrixXd gains(2, 5);
  for (int k = 0; k < 2; k++)
    for (int n = 0; n < 5; n++) gains(k, n) = 1e-4 * (1.0 + rng.uniform01());
  std::vector<double> grid = {0.0, 5.0, 10.0, 15.0, 20.0};
  const auto t0 = std::chrono::steady_clock::now();
  baselines::exhaustive_oracle(gains, cfg, grid, exec);  // 5^10 combinations
  return seconds_since(t0);
}

double bench_episodes(Execution exec) {
  harness::ExperimentSpec spec;
  spec.policy = "random";
  spec.episodes = 12;
  spec.seeds = {1, 2, 3, 4};
  spec.train.episodes = 4;
  spec.scenario.num_time_steps = 10;
  const auto model = harness::train_offline(spec);
  harness::RunOptions opt;
  opt.exec = exec;
  const auto t0 = std::chrono::steady_clock::now();
  harness::run_experiment(spec, model, opt);
  return seconds_since(t0);
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-24s %10.3f s %10.3f s %8.2fx\n", name, serial, parallel, serial / parallel);
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", max_threads());
  std::printf("%-24s %12s %12s %9s\n", "kernel", "serial", "openmp", "speedup");
  report("mmjpf step (L=40000)", bench_filter(Execution::serial, 40000, 30),
         bench_filter(Execution::parallel, 40000, 30));
  report("oracle scan (5^10)", bench_oracle(Execution::serial), bench_oracle(Execution::parallel));
  report("episode pool (4 seeds)", bench_episodes(Execution::serial),
         bench_episodes(Execution::parallel));
  return 0;
}
