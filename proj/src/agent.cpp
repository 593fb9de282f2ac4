#include "cnoma/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace cnoma::agent {

std::uint64_t JointAction::pattern_key() const {
  // FNV-1a over the row-major assignment bits
  std::uint64_t h = 1469598103934665603ULL;
  for (int k = 0; k < alloc.num_subchannels(); k++)
    for (int n = 0; n < alloc.num_sus(); n++) {
      h ^= static_cast<std::uint64_t>(alloc.b(k, n) != 0);
      h *= 1099511628211ULL;
    }
  return h;
}

std::vector<double> power_grid(double p_max, int levels) {
  std::vector<double> grid(levels);
  for (int l = 1; l <= levels; l++) grid[l - 1] = p_max * l / levels;
  return grid;
}

namespace {

JointAction action_from_digits(const std::vector<int>& digits, const std::vector<double>& grid,
                               int K, int N) {
  JointAction a;
  a.alloc = phy::Allocation::zeros(K, N);
  for (int k = 0; k < K; k++)
    for (int n = 0; n < N; n++) {
      const int d = digits[k * N + n];
      if (d > 0) {
        a.alloc.b(k, n) = 1;
        a.alloc.p(k, n) = grid[d - 1];
      }
    }
  return a;
}

bool digits_feasible(const std::vector<int>& digits, const std::vector<double>& grid,
                     const scenario::ScenarioConfig& config) {
  const int K = config.num_subchannels;
  const int N = config.num_sus;
  for (int k = 0; k < K; k++) {
    int assigned = 0;
    for (int n = 0; n < N; n++) assigned += (digits[k * N + n] > 0);
    if (assigned > config.max_multiplexed) return false;
  }
  for (int n = 0; n < N; n++) {
    double total = 0.0;
    for (int k = 0; k < K; k++) {
      const int d = digits[k * N + n];
      if (d > 0) total += grid[d - 1];
    }
    if (total > config.p_max * (1.0 + 1e-12)) return false;
  }
  return true;
}

}  // namespace

std::vector<JointAction> enumerate_feasible_actions(const scenario::ScenarioConfig& config,
                                                    const AgentParams& params, Rng& rng) {
  config.validate();
  const int K = config.num_subchannels;
  const int N = config.num_sus;
  const int cells = K * N;
  const std::vector<double> grid = power_grid(config.p_max, params.power_levels);
  const int radix = params.power_levels + 1;

  const double total = std::pow(static_cast<double>(radix), cells);
  std::set<std::vector<int>> seen;
  std::vector<JointAction> menu;

  if (total <= static_cast<double>(params.exhaustive_menu_limit)) {
    std::vector<int> digits(cells, 0);
    const long count = static_cast<long>(total);
    for (long idx = 0; idx < count; idx++) {
      long v = idx;
      for (int c = 0; c < cells; c++) {
        digits[c] = static_cast<int>(v % radix);
        v /= radix;
      }
      if (digits_feasible(digits, grid, config)) menu.push_back(action_from_digits(digits, grid, K, N));
    }
  } else {
    // idle first, then distinct feasible samples built under the budget
    menu.push_back(action_from_digits(std::vector<int>(cells, 0), grid, K, N));
    seen.insert(std::vector<int>(cells, 0));
    Rng menu_rng = rng.fork(0x4d454e55u);
    int attempts = 0;
    while (static_cast<int>(menu.size()) < params.menu_size && attempts < params.menu_size * 64) {
      attempts++;
      std::vector<int> digits(cells, 0);
      for (int n = 0; n < N; n++) {
        const int active = menu_rng.uniform_int(K + 1);
        std::vector<int> chans(K);
        for (int k = 0; k < K; k++) chans[k] = k;
        for (int i = 0; i < active; i++) {
          const int j = i + menu_rng.uniform_int(K - i);
          std::swap(chans[i], chans[j]);
        }
        double budget = config.p_max;
        for (int i = 0; i < active; i++) {
          int max_level = 0;
          for (int l = params.power_levels; l >= 1; l--)
            if (grid[l - 1] <= budget * (1.0 + 1e-12)) { max_level = l; break; }
          if (max_level == 0) continue;
          const int level = 1 + menu_rng.uniform_int(max_level);
          digits[chans[i] * N + n] = level;
          budget -= grid[level - 1];
        }
      }
      // repair C4 deterministically: keep the lowest-indexed M per subchannel
      for (int k = 0; k < K; k++) {
        int kept = 0;
        for (int n = 0; n < N; n++) {
          if (digits[k * N + n] == 0) continue;
          if (kept >= config.max_multiplexed)
            digits[k * N + n] = 0;
          else
            kept++;
        }
      }
      if (!digits_feasible(digits, grid, config)) continue;
      if (seen.insert(digits).second) menu.push_back(action_from_digits(digits, grid, K, N));
    }
  }

  if (params.trajectory_action) {
    const std::size_t base = menu.size();
    for (std::size_t i = 0; i < base; i++) {
      for (double inc : {-params.heading_delta, params.heading_delta}) {
        JointAction a = menu[i];
        a.heading_increment = inc;
        menu.push_back(std::move(a));
      }
    }
  }
  return menu;
}

PuPredictor::PuPredictor(int num_subchannels)
    : counts(num_subchannels, Eigen::Matrix2d::Zero()),
      transition(num_subchannels, (Eigen::Matrix2d() << 0.5, 0.5, 0.5, 0.5).finished()),
      belief(Eigen::VectorXd::Constant(num_subchannels, 0.5)) {}

void PuPredictor::prime(const std::vector<Eigen::Matrix2d>& learned, double pseudo_count) {
  for (std::size_t k = 0; k < counts.size() && k < learned.size(); k++)
    counts[k] = learned[k] * pseudo_count;
  refresh_transition();
}

void PuPredictor::refresh_transition() {
  for (std::size_t k = 0; k < counts.size(); k++)
    for (int s = 0; s < 2; s++) {
      const double total = counts[k].row(s).sum() + 2.0 * smoothing;
      for (int j = 0; j < 2; j++) transition[k](s, j) = (counts[k](s, j) + smoothing) / total;
    }
}

void PuPredictor::observe(const std::vector<std::uint8_t>& occupancy) {
  if (!last_occupancy.empty()) {
    for (std::size_t k = 0; k < occupancy.size(); k++)
      counts[k](last_occupancy[k], occupancy[k]) += 1.0;
    refresh_transition();
  }
  last_occupancy = occupancy;
  for (std::size_t k = 0; k < occupancy.size(); k++) belief(k) = occupancy[k] ? 1.0 : 0.0;
}

void PuPredictor::predict_step() {
  for (int k = 0; k < belief.size(); k++) {
    const double busy = belief(k);
    belief(k) = (1.0 - busy) * transition[k](0, 1) + busy * transition[k](1, 1);
  }
}

std::uint32_t PuPredictor::pattern() const {
  std::uint32_t bits = 0;
  for (std::size_t k = 0; k < last_occupancy.size(); k++)
    if (last_occupancy[k]) bits |= (1u << k);
  return bits;
}

void PuPredictor::reset_belief() {
  belief.setConstant(0.5);
  last_occupancy.clear();
}

double ActionTable::score_stddev() const {
  if (score_count < 2.0) return 0.0;
  return std::sqrt(std::max(score_m2 / (score_count - 1.0), 0.0));
}

ActiveGdbnAgent::ActiveGdbnAgent(std::vector<JointAction> menu, const AgentParams& params,
                                 int num_subchannels)
    : menu_(std::move(menu)),
      params_(params),
      temperature_(params.temperature_initial),
      num_subchannels_(num_subchannels) {
  if (menu_.empty()) throw std::invalid_argument("ActiveGdbnAgent: empty menu");
  for (const auto& a : menu_) {
    const std::uint64_t key = a.pattern_key();
    auto [it, fresh] = table_.pattern_index.try_emplace(key, table_.num_patterns);
    if (fresh) table_.num_patterns++;
    menu_pattern_.push_back(it->second);
    Eigen::VectorXd flat(a.alloc.p.size());
    int c = 0;
    for (int k = 0; k < a.alloc.num_subchannels(); k++)
      for (int n = 0; n < a.alloc.num_sus(); n++) flat(c++) = a.alloc.p(k, n);
    menu_power_.push_back(std::move(flat));
  }
  table_.global_discrete.prob =
      Eigen::VectorXd::Constant(table_.num_patterns, 1.0 / table_.num_patterns);
}

void ActiveGdbnAgent::decay_temperature() {
  temperature_ = std::max(temperature_ * params_.temperature_decay, params_.temperature_floor);
}

namespace {

double gaussian_penalty(const GaussianPreference& pref, const Eigen::VectorXd& x,
                        double var_floor) {
  if (pref.weight <= 0.0) return 0.0;
  double nll = 0.0;
  for (int i = 0; i < x.size(); i++) {
    const double v = std::max(pref.var(i), var_floor);
    const double d = x(i) - pref.mean(i);
    nll += 0.5 * (d * d / v + std::log(v));
  }
  return nll / static_cast<double>(x.size());
}

}  // namespace

double ActiveGdbnAgent::candidate_score(const Context& ctx, int candidate,
                                        double predicted_abnormality,
                                        const PuPredictor& pu) const {
  const JointAction& a = menu_[candidate];
  double s = params_.w_abnormality * predicted_abnormality;

  // busy-channel avoidance from the occupancy belief
  if (params_.w_pu != 0.0) {
    double overlap = 0.0;
    for (int k = 0; k < num_subchannels_ && k < static_cast<int>(pu.belief.size()); k++)
      if (a.alloc.b.row(k).sum() > 0) overlap += pu.belief(k);
    s += params_.w_pu * overlap;
  }

  if (params_.w_table != 0.0) {
    const int pattern = menu_pattern_[candidate];
    const auto it = table_.discrete.find(ctx.key());
    double p_ctx = 1.0 / table_.num_patterns;
    double n_ctx = 0.0;
    if (it != table_.discrete.end()) {
      p_ctx = it->second.prob(pattern);
      n_ctx = it->second.visits;
    }
    const double p_glob = table_.global_discrete.prob(pattern);
    // context rows fade in with visits; the global row carries early episodes
    const double blend = (n_ctx * p_ctx + 4.0 * p_glob) / (n_ctx + 4.0);
    s -= params_.w_table * std::log(std::max(blend, 1e-12));

    const auto pit = table_.power.find(ctx.key());
    const GaussianPreference& pref = pit != table_.power.end() ? pit->second : table_.global_power;
    s += params_.w_table * gaussian_penalty(pref, menu_power_[candidate], params_.preference_var_floor);

    if (params_.trajectory_action) {
      const auto hit = table_.heading.find(ctx.key());
      const GaussianPreference& hpref =
          hit != table_.heading.end() ? hit->second : table_.global_heading;
      Eigen::VectorXd inc(1);
      inc << a.heading_increment;
      s += params_.w_table * gaussian_penalty(hpref, inc, params_.preference_var_floor);
    }
  }
  return s;
}

int ActiveGdbnAgent::select_action(const Context& ctx,
                                   const std::vector<double>& predicted_abnormality,
                                   const PuPredictor& pu, SelectionMode mode, Rng& rng) const {
  const int A = static_cast<int>(menu_.size());
  if (static_cast<int>(predicted_abnormality.size()) != A)
    throw std::invalid_argument("select_action: abnormality vector size mismatch");

  std::vector<double> score(A);
  for (int a = 0; a < A; a++) score[a] = candidate_score(ctx, a, predicted_abnormality[a], pu);

  if (mode == SelectionMode::exploit) {
    int best = 0;
    for (int a = 1; a < A; a++)
      if (score[a] < score[best]) best = a;
    return best;
  }

  const double temp = std::max(temperature_, 1e-9);
  const double smin = *std::min_element(score.begin(), score.end());
  std::vector<double> w(A);
  double total = 0.0;
  for (int a = 0; a < A; a++) {
    w[a] = std::exp(-(score[a] - smin) / temp);
    total += w[a];
  }
  const double u = rng.uniform01() * total;
  double acc = 0.0;
  for (int a = 0; a < A; a++) {
    acc += w[a];
    if (u < acc) return a;
  }
  return A - 1;
}

double ActiveGdbnAgent::evaluate_action(const mmjpf::AbnormalitySignal& abn,
                                        double realized_sum_rate) const {
  return realized_sum_rate - params_.eval_abnormality_weight * abn.total();
}

void ActiveGdbnAgent::update_model(const SlotOutcome& outcome, PuPredictor& pu) {
  if (!outcome.occupancy.empty()) pu.observe(outcome.occupancy);
  if (params_.learn_step == 0.0) return;

  // normalized exponentiated-score increment
  table_.score_count += 1.0;
  const double delta = outcome.score - table_.score_mean;
  table_.score_mean += delta / table_.score_count;
  table_.score_m2 += delta * (outcome.score - table_.score_mean);
  const double scale = std::max(table_.score_stddev(), 1e-6);
  const double zscore = std::clamp((outcome.score - table_.score_mean) / scale, -20.0, 20.0);
  const double increment = params_.learn_step * std::exp(zscore);

  const int pattern = menu_pattern_[outcome.candidate];
  auto bump = [&](CategoricalRow& row) {
    if (row.prob.size() == 0) {
      row.prob = Eigen::VectorXd::Constant(table_.num_patterns, 1.0 / table_.num_patterns);
      row.mass = 1.0;
    }
    row.prob *= row.mass;
    row.prob(pattern) += increment;
    row.mass += increment;
    row.prob /= row.mass;
    row.visits += 1.0;
  };
  bump(table_.global_discrete);
  bump(table_.discrete[outcome.context.key()]);

  auto nudge = [&](GaussianPreference& pref, const Eigen::VectorXd& x) {
    if (pref.weight <= 0.0) {
      pref.mean = x;
      pref.var = Eigen::VectorXd::Constant(x.size(), 1.0);
      pref.weight = increment;
      return;
    }
    const double w_new = pref.weight + increment;
    const Eigen::VectorXd old_mean = pref.mean;
    pref.mean = (pref.weight * pref.mean + increment * x) / w_new;
    pref.var = (pref.weight * (pref.var + (old_mean - pref.mean).cwiseAbs2()).array() +
                increment * (x - pref.mean).cwiseAbs2().array())
                   .matrix() /
               w_new;
    pref.var = pref.var.cwiseMax(params_.preference_var_floor);
    pref.weight = w_new;
  };
  nudge(table_.global_power, menu_power_[outcome.candidate]);
  nudge(table_.power[outcome.context.key()], menu_power_[outcome.candidate]);
  if (params_.trajectory_action) {
    Eigen::VectorXd inc(1);
    inc << menu_[outcome.candidate].heading_increment;
    nudge(table_.global_heading, inc);
    nudge(table_.heading[outcome.context.key()], inc);
  }
}

namespace {

nlohmann::json vec_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < v.size(); i++) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vec_from(const nlohmann::json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); i++) v(static_cast<int>(i)) = a[i].get<double>();
  return v;
}

nlohmann::json pref_json(const GaussianPreference& p) {
  return {{"mean", p.weight > 0 ? vec_json(p.mean) : nlohmann::json::array()},
          {"var", p.weight > 0 ? vec_json(p.var) : nlohmann::json::array()},
          {"weight", p.weight}};
}

GaussianPreference pref_from(const nlohmann::json& j) {
  GaussianPreference p;
  p.weight = j.at("weight").get<double>();
  if (p.weight > 0) {
    p.mean = vec_from(j.at("mean"));
    p.var = vec_from(j.at("var"));
  }
  return p;
}

}  // namespace

void ActiveGdbnAgent::save(const std::string& path, const PuPredictor& pu) const {
  nlohmann::json j;
  j["version"] = 1;
  j["temperature"] = temperature_;
  j["num_patterns"] = table_.num_patterns;
  j["score"] = {{"count", table_.score_count},
                {"mean", table_.score_mean},
                {"m2", table_.score_m2}};
  j["global_discrete"] = {{"prob", vec_json(table_.global_discrete.prob)},
                          {"mass", table_.global_discrete.mass},
                          {"visits", table_.global_discrete.visits}};
  nlohmann::json rows = nlohmann::json::object();
  for (const auto& [key, row] : table_.discrete)
    rows[std::to_string(key)] = {{"prob", vec_json(row.prob)}, {"mass", row.mass},
                                 {"visits", row.visits}};
  j["discrete"] = rows;
  j["global_power"] = pref_json(table_.global_power);
  nlohmann::json powers = nlohmann::json::object();
  for (const auto& [key, pref] : table_.power) powers[std::to_string(key)] = pref_json(pref);
  j["power"] = powers;
  j["global_heading"] = pref_json(table_.global_heading);
  nlohmann::json headings = nlohmann::json::object();
  for (const auto& [key, pref] : table_.heading) headings[std::to_string(key)] = pref_json(pref);
  j["heading"] = headings;
  nlohmann::json pu_state = nlohmann::json::object();
  nlohmann::json cnt = nlohmann::json::array();
  for (const auto& m : pu.counts)
    cnt.push_back({m(0, 0), m(0, 1), m(1, 0), m(1, 1)});
  pu_state["counts"] = cnt;
  j["pu"] = pu_state;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(1) << '\n';
}

void ActiveGdbnAgent::load(const std::string& path, PuPredictor& pu) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("num_patterns").get<int>() != table_.num_patterns)
    throw std::runtime_error("agent state incompatible with the current menu");
  temperature_ = j.at("temperature").get<double>();
  table_.score_count = j.at("score").at("count").get<double>();
  table_.score_mean = j.at("score").at("mean").get<double>();
  table_.score_m2 = j.at("score").at("m2").get<double>();
  table_.global_discrete.prob = vec_from(j.at("global_discrete").at("prob"));
  table_.global_discrete.mass = j.at("global_discrete").at("mass").get<double>();
  table_.global_discrete.visits = j.at("global_discrete").at("visits").get<double>();
  table_.discrete.clear();
  for (const auto& [key, row] : j.at("discrete").items())
    table_.discrete[std::stoull(key)] = {vec_from(row.at("prob")), row.at("mass").get<double>(),
                                         row.at("visits").get<double>()};
  table_.global_power = pref_from(j.at("global_power"));
  table_.power.clear();
  for (const auto& [key, pref] : j.at("power").items())
    table_.power[std::stoull(key)] = pref_from(pref);
  table_.global_heading = pref_from(j.at("global_heading"));
  table_.heading.clear();
  for (const auto& [key, pref] : j.at("heading").items())
    table_.heading[std::stoull(key)] = pref_from(pref);
  const auto& cnt = j.at("pu").at("counts");
  for (std::size_t k = 0; k < pu.counts.size() && k < cnt.size(); k++) {
    pu.counts[k] << cnt[k][0].get<double>(), cnt[k][1].get<double>(), cnt[k][2].get<double>(),
        cnt[k][3].get<double>();
  }
  pu.refresh_transition();
}

}  // namespace cnoma::agent
