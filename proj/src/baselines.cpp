#include "cnoma/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cnoma::baselines {

const agent::JointAction& random_policy(const std::vector<agent::JointAction>& candidates,
                                        Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("random_policy: empty candidate set");
  return candidates[rng.uniform_int(static_cast<int>(candidates.size()))];
}

agent::JointAction greedy_policy(const Eigen::MatrixXd& gains,
                                 const scenario::ScenarioConfig& config) {
  const int K = config.num_subchannels;
  const int N = config.num_sus;
  agent::JointAction a;
  a.alloc = phy::Allocation::zeros(K, N);

  for (int k = 0; k < K; k++) {
    std::vector<int> order(N);
    for (int n = 0; n < N; n++) order[n] = n;
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
      if (gains(k, x) != gains(k, y)) return gains(k, x) > gains(k, y);
      return x < y;
    });
    for (int i = 0; i < std::min(config.max_multiplexed, N); i++) a.alloc.b(k, order[i]) = 1;
  }
  for (int n = 0; n < N; n++) {
    int assigned = 0;
    for (int k = 0; k < K; k++) assigned += a.alloc.b(k, n);
    if (assigned == 0) continue;
    const double share = config.p_max / assigned;
    for (int k = 0; k < K; k++)
      if (a.alloc.b(k, n)) a.alloc.p(k, n) = share;
  }
  return a;
}

int q_learning_policy(const QTable& table, std::uint64_t state, int num_actions, Rng& rng) {
  if (rng.uniform01() < table.epsilon) return rng.uniform_int(num_actions);
  int best = 0;
  double best_q = table.get(state, 0);
  for (int a = 1; a < num_actions; a++) {
    const double qa = table.get(state, a);
    if (qa > best_q) { best_q = qa; best = a; }
  }
  return best;
}

void q_update(QTable& table, std::uint64_t state, int action, double reward,
              std::uint64_t next_state, int num_actions) {
  double best_next = 0.0;
  for (int a = 0; a < num_actions; a++) best_next = std::max(best_next, table.get(next_state, a));
  double& q = table.q[{state, action}];
  q += table.learning_rate * (reward + table.discount * best_next - q);
}

OracleTooLarge::OracleTooLarge(double size)
    : std::runtime_error("exhaustive_oracle: enumeration size " + std::to_string(size) +
                         " exceeds the limit; shrink K, N, or the power grid"),
      enumeration_size(size) {}

namespace {

struct ScanBest {
  double rate = -1.0;
  long index = -1;
};

// evaluates one combo; returns -1 when infeasible
double combo_rate(long idx, const Eigen::MatrixXd& gains,
                  const scenario::ScenarioConfig& config, const std::vector<double>& grid,
                  Eigen::MatrixXi& b, Eigen::MatrixXd& p) {
  const int K = config.num_subchannels;
  const int N = config.num_sus;
  const int radix = static_cast<int>(grid.size());
  long v = idx;
  for (int k = 0; k < K; k++) {
    int assigned = 0;
    for (int n = 0; n < N; n++) {
      const double pw = grid[v % radix];
      v /= radix;
      p(k, n) = pw;
      b(k, n) = pw > 0.0 ? 1 : 0;
      assigned += b(k, n);
    }
    if (assigned > config.max_multiplexed) return -1.0;
  }
  for (int n = 0; n < N; n++) {
    double total = 0.0;
    for (int k = 0; k < K; k++) total += p(k, n);
    if (total > config.p_max * (1.0 + 1e-12)) return -1.0;
  }
  phy::Allocation alloc;
  alloc.b = b;
  alloc.p = p;
  return phy::sum_rate(alloc, gains, phy::make_noise_model(config).eta);
}

}  // namespace

OracleResult exhaustive_oracle(const Eigen::MatrixXd& gains,
                               const scenario::ScenarioConfig& config,
                               const std::vector<double>& power_grid, Execution exec,
                               double max_enumeration) {
  if (power_grid.empty()) throw std::invalid_argument("exhaustive_oracle: empty power grid");
  const int cells = config.num_subchannels * config.num_sus;
  const double size = std::pow(static_cast<double>(power_grid.size()), cells);
  if (size > max_enumeration) throw OracleTooLarge(size);
  const long count = static_cast<long>(size);

  ScanBest best;
  if (exec == Execution::parallel) {
    const int T = max_threads();
    std::vector<ScanBest> local(T);
#pragma omp parallel num_threads(T)
    {
#ifdef _OPENMP
      const int tid = omp_get_thread_num();
#else
      const int tid = 0;
#endif
      Eigen::MatrixXi b(config.num_subchannels, config.num_sus);
      Eigen::MatrixXd p(config.num_subchannels, config.num_sus);
      ScanBest mine;
#pragma omp for schedule(static)
      for (long idx = 0; idx < count; idx++) {
        const double r = combo_rate(idx, gains, config, power_grid, b, p);
        if (r > mine.rate) { mine.rate = r; mine.index = idx; }
      }
      local[tid] = mine;
    }
    for (const auto& m : local) {
      if (m.index < 0) continue;
      if (m.rate > best.rate || (m.rate == best.rate && m.index < best.index))
        best = m;
    }
  } else {
    Eigen::MatrixXi b(config.num_subchannels, config.num_sus);
    Eigen::MatrixXd p(config.num_subchannels, config.num_sus);
    for (long idx = 0; idx < count; idx++) {
      const double r = combo_rate(idx, gains, config, power_grid, b, p);
      if (r > best.rate) { best.rate = r; best.index = idx; }
    }
  }

  OracleResult result;
  result.enumeration_size = size;
  if (best.index < 0) throw std::runtime_error("exhaustive_oracle: no feasible combination");
  Eigen::MatrixXi b(config.num_subchannels, config.num_sus);
  Eigen::MatrixXd p(config.num_subchannels, config.num_sus);
  result.best_rate = combo_rate(best.index, gains, config, power_grid, b, p);
  result.best.alloc.b = b;
  result.best.alloc.p = p;
  return result;
}

agent::JointAction random_search_allocation(const Eigen::MatrixXd& gains,
                                            const scenario::ScenarioConfig& config,
                                            const std::vector<double>& nonzero_grid,
                                            int samples, Rng& rng) {
  const int K = config.num_subchannels;
  const int N = config.num_sus;
  const double eta = phy::make_noise_model(config).eta;
  Rng search_rng = rng.fork(0x534541u);

  agent::JointAction best;
  best.alloc = phy::Allocation::zeros(K, N);
  double best_rate = 0.0;

  for (int s = 0; s < samples; s++) {
    agent::JointAction cand;
    cand.alloc = phy::Allocation::zeros(K, N);
    for (int n = 0; n < N; n++) {
      const int active = search_rng.uniform_int(K + 1);
      std::vector<int> chans(K);
      for (int k = 0; k < K; k++) chans[k] = k;
      for (int i = 0; i < active; i++) {
        const int j = i + search_rng.uniform_int(K - i);
        std::swap(chans[i], chans[j]);
      }
      double budget = config.p_max;
      for (int i = 0; i < active; i++) {
        std::vector<double> usable;
        for (double g : nonzero_grid)
          if (g <= budget * (1.0 + 1e-12)) usable.push_back(g);
        if (usable.empty()) continue;
        const double pw = usable[search_rng.uniform_int(static_cast<int>(usable.size()))];
        cand.alloc.b(chans[i], n) = 1;
        cand.alloc.p(chans[i], n) = pw;
        budget -= pw;
      }
    }
    for (int k = 0; k < K; k++) {
      int kept = 0;
      for (int n = 0; n < N; n++) {
        if (cand.alloc.b(k, n) == 0) continue;
        if (kept >= config.max_multiplexed) {
          cand.alloc.b(k, n) = 0;
          cand.alloc.p(k, n) = 0.0;
        } else {
          kept++;
        }
      }
    }
    const double r = phy::sum_rate(cand.alloc, gains, eta);
    if (r > best_rate) {
      best_rate = r;
      best = cand;
    }
  }
  return best;
}

}  // namespace cnoma::baselines
