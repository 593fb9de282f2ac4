#include "cnoma/gdbn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <stdexcept>

namespace cnoma::gdbn {

Eigen::VectorXd GeneralizedState::stacked() const {
  Eigen::VectorXd x(value.size() + derivative.size());
  x << value, derivative;
  return x;
}

GeneralizedState GeneralizedState::split(const Eigen::VectorXd& stacked) {
  const int d = static_cast<int>(stacked.size()) / 2;
  GeneralizedState g;
  g.value = stacked.head(d);
  g.derivative = stacked.tail(d);
  return g;
}

namespace {

// eigenvalue floor keeping the matrix symmetric positive-definite
Eigen::MatrixXd regularize_spd(const Eigen::MatrixXd& m, double min_eig) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(min_eig);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

void DiscreteVocabulary::refresh_cache() {
  for (auto& c : clusters) {
    Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
    if (llt.info() != Eigen::Success) {
      c.covariance = regularize_spd(c.covariance, 1e-9);
      llt.compute(c.covariance);
    }
    const Eigen::MatrixXd L = llt.matrixL();
    c.cov_logdet = 2.0 * L.diagonal().array().log().sum();
    c.cov_inverse = llt.solve(Eigen::MatrixXd::Identity(c.covariance.rows(), c.covariance.cols()));
  }
}

StaticEvolutionFilter::StaticEvolutionFilter(const StaticFilterParams& params, int dim)
    : params_(params),
      mean_(Eigen::VectorXd::Zero(dim)),
      var_(Eigen::VectorXd::Constant(dim, params.observation_noise)),
      prev_z_(Eigen::VectorXd::Zero(dim)) {}

GeneralizedState StaticEvolutionFilter::step(const Eigen::VectorXd& z) {
  if (!z.allFinite()) throw std::invalid_argument("StaticEvolutionFilter: non-finite observation");
  const int d = static_cast<int>(mean_.size());
  GeneralizedState err;
  err.value = Eigen::VectorXd::Zero(d);
  err.derivative = Eigen::VectorXd::Zero(d);

  if (steps_ == 0) {
    mean_ = z;
    prev_z_ = z;
    steps_ = 1;
    last_abnormality_ = 0.0;
    return err;
  }

  // identity-dynamics predict, then the generalized error against it
  const Eigen::VectorXd pred_var = var_.array() + params_.process_noise;
  err.value = z - mean_;
  err.derivative = (z - prev_z_) / params_.dt;

  // -ln BC of the diagonal predicted observation density vs the evidence
  const double r = params_.observation_noise;
  double abn = 0.0;
  for (int i = 0; i < d; i++) {
    const double s = pred_var(i) + r;
    const double avg = 0.5 * (s + r);
    abn += 0.125 * err.value(i) * err.value(i) / avg + 0.5 * std::log(avg / std::sqrt(s * r));
  }
  last_abnormality_ = abn;

  const Eigen::VectorXd gain = pred_var.array() / (pred_var.array() + r);
  mean_ += gain.cwiseProduct(err.value);
  var_ = (1.0 - gain.array()) * pred_var.array();
  prev_z_ = z;
  steps_++;
  return err;
}

std::vector<GeneralizedState> generalized_errors(const std::vector<Eigen::VectorXd>& observations,
                                                 const StaticFilterParams& params) {
  if (observations.size() < 2)
    throw std::invalid_argument("generalized_errors: need at least 2 observations");
  StaticEvolutionFilter filter(params, static_cast<int>(observations[0].size()));
  std::vector<GeneralizedState> errors;
  errors.reserve(observations.size() - 1);
  for (std::size_t t = 0; t < observations.size(); t++) {
    GeneralizedState e = filter.step(observations[t]);
    if (t >= 1) errors.push_back(std::move(e));
  }
  return errors;
}

namespace {

struct GngNode {
  Eigen::VectorXd pos;
  double error = 0.0;
  bool alive = true;
};

struct GngEdge {
  int a = 0, b = 0, age = 0;
};

double quantization_error(const std::vector<Eigen::VectorXd>& data,
                          const std::vector<GngNode>& nodes) {
  double total = 0.0;
  for (const auto& x : data) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& n : nodes)
      if (n.alive) best = std::min(best, (x - n.pos).squaredNorm());
    total += best;
  }
  return total / static_cast<double>(data.size());
}

}  // namespace

DiscreteVocabulary gng_learn(const std::vector<GeneralizedState>& samples, const GngParams& params,
                             std::vector<double>* quantization_trace) {
  if (samples.size() < 2) throw std::invalid_argument("gng_learn: need at least 2 samples");

  std::vector<Eigen::VectorXd> data;
  data.reserve(samples.size());
  for (const auto& s : samples) data.push_back(s.stacked());
  const int dim = static_cast<int>(data[0].size());

  std::vector<GngNode> nodes;
  nodes.push_back({data[0], 0.0, true});
  std::size_t second = 1;
  while (second < data.size() && (data[second] - data[0]).squaredNorm() == 0.0) second++;
  const bool degenerate = second == data.size();
  nodes.push_back({data[degenerate ? 0 : second], 0.0, true});

  std::vector<GngEdge> edges;
  auto touch_edge = [&](int a, int b) {
    for (auto& e : edges)
      if ((e.a == a && e.b == b) || (e.a == b && e.b == a)) {
        e.age = 0;
        return;
      }
    edges.push_back({a, b, 0});
  };

  int alive_count = 2;
  long step = 0;
  const long total_steps = static_cast<long>(params.passes) * static_cast<long>(data.size());
  for (long it = 0; it < total_steps; it++) {
    const Eigen::VectorXd& x = data[static_cast<std::size_t>(it % static_cast<long>(data.size()))];

    int s1 = -1, s2 = -1;
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = d1;
    for (int i = 0; i < static_cast<int>(nodes.size()); i++) {
      if (!nodes[i].alive) continue;
      const double d = (x - nodes[i].pos).squaredNorm();
      if (d < d1) {
        d2 = d1; s2 = s1;
        d1 = d; s1 = i;
      } else if (d < d2) {
        d2 = d; s2 = i;
      }
    }

    nodes[s1].error += d1;
    nodes[s1].pos += params.learning_rate * (x - nodes[s1].pos);
    for (auto& e : edges) {
      if (e.a == s1 || e.b == s1) {
        const int other = e.a == s1 ? e.b : e.a;
        nodes[other].pos += params.neighbor_rate * (x - nodes[other].pos);
        e.age++;
      }
    }
    if (s2 >= 0) touch_edge(s1, s2);

    edges.erase(std::remove_if(edges.begin(), edges.end(),
                               [&](const GngEdge& e) { return e.age > params.edge_max_age; }),
                edges.end());
    for (int i = 0; i < static_cast<int>(nodes.size()); i++) {
      if (!nodes[i].alive || alive_count <= 2) continue;
      bool connected = false;
      for (const auto& e : edges)
        if (e.a == i || e.b == i) { connected = true; break; }
      if (!connected) {
        nodes[i].alive = false;
        alive_count--;
      }
    }

    step++;
    if (step % params.insertion_interval == 0 && alive_count < params.max_nodes) {
      int q = -1;
      double max_err = -1.0;
      for (int i = 0; i < static_cast<int>(nodes.size()); i++)
        if (nodes[i].alive && nodes[i].error > max_err) { max_err = nodes[i].error; q = i; }
      int f = -1;
      max_err = -1.0;
      for (const auto& e : edges) {
        if (e.a == q && nodes[e.b].error > max_err) { max_err = nodes[e.b].error; f = e.b; }
        if (e.b == q && nodes[e.a].error > max_err) { max_err = nodes[e.a].error; f = e.a; }
      }
      if (f >= 0) {
        GngNode fresh;
        fresh.pos = 0.5 * (nodes[q].pos + nodes[f].pos);
        nodes[q].error *= params.insert_error_decay;
        nodes[f].error *= params.insert_error_decay;
        fresh.error = nodes[q].error;
        nodes.push_back(fresh);
        const int r = static_cast<int>(nodes.size()) - 1;
        edges.erase(std::remove_if(edges.begin(), edges.end(),
                                   [&](const GngEdge& e) {
                                     return (e.a == q && e.b == f) || (e.a == f && e.b == q);
                                   }),
                    edges.end());
        touch_edge(q, r);
        touch_edge(r, f);
        alive_count++;
        if (quantization_trace != nullptr)
          quantization_trace->push_back(quantization_error(data, nodes));
      }
    }
    for (auto& n : nodes)
      if (n.alive) n.error *= params.step_error_decay;
  }

  // final Voronoi membership for means kept as-is and sample covariances
  std::vector<int> live;
  for (int i = 0; i < static_cast<int>(nodes.size()); i++)
    if (nodes[i].alive) live.push_back(i);
  if (degenerate) live.resize(1);

  std::vector<std::vector<const Eigen::VectorXd*>> members(live.size());
  for (const auto& x : data) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int j = 0; j < static_cast<int>(live.size()); j++) {
      const double d = (x - nodes[live[j]].pos).squaredNorm();
      if (d < bd) { bd = d; best = j; }
    }
    members[best].push_back(&x);
  }

  Eigen::MatrixXd global_cov = Eigen::MatrixXd::Zero(dim, dim);
  {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& x : data) mean += x;
    mean /= static_cast<double>(data.size());
    for (const auto& x : data) global_cov += (x - mean) * (x - mean).transpose();
    global_cov /= static_cast<double>(data.size());
  }

  DiscreteVocabulary vocab;
  for (int j = 0; j < static_cast<int>(live.size()); j++) {
    Cluster c;
    c.mean = GeneralizedState::split(nodes[live[j]].pos);
    Eigen::MatrixXd cov;
    if (members[j].size() >= 2) {
      Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim);
      for (const auto* x : members[j]) mu += *x;
      mu /= static_cast<double>(members[j].size());
      cov = Eigen::MatrixXd::Zero(dim, dim);
      for (const auto* x : members[j]) cov += (*x - mu) * (*x - mu).transpose();
      cov /= static_cast<double>(members[j].size());
    } else {
      cov = global_cov;
    }
    c.covariance = regularize_spd(cov, params.cov_min_eigenvalue);
    vocab.clusters.push_back(std::move(c));
  }
  vocab.refresh_cache();
  return vocab;
}

int assign_cluster(const GeneralizedState& x, const DiscreteVocabulary& vocab) {
  if (vocab.clusters.empty()) throw std::invalid_argument("assign_cluster: empty vocabulary");
  const Eigen::VectorXd v = x.stacked();
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (int j = 0; j < vocab.size(); j++) {
    const Eigen::VectorXd diff = v - vocab.clusters[j].mean.stacked();
    const double d = diff.dot(vocab.clusters[j].cov_inverse * diff);
    if (d < bd) { bd = d; best = j; }
  }
  return best;
}

namespace {

Eigen::MatrixXd normalize_rows(Eigen::MatrixXd counts, double smoothing) {
  counts.array() += smoothing;
  for (int i = 0; i < counts.rows(); i++) {
    const double total = counts.row(i).sum();
    if (total > 0.0)
      counts.row(i) /= total;
    else
      counts.row(i).setConstant(1.0 / static_cast<double>(counts.cols()));
  }
  return counts;
}

}  // namespace

TransitionModel estimate_transitions(const std::vector<std::vector<int>>& label_sequences,
                                     int num_clusters, double smoothing) {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(num_clusters, num_clusters);
  bool any = false;
  for (const auto& labels : label_sequences) {
    if (labels.size() >= 2) any = true;
    for (std::size_t t = 0; t + 1 < labels.size(); t++) counts(labels[t], labels[t + 1]) += 1.0;
  }
  if (!any) throw std::invalid_argument("estimate_transitions: no sequence of length >= 2");
  TransitionModel model;
  model.single = normalize_rows(std::move(counts), smoothing);
  return model;
}

TransitionModel estimate_transitions(const std::vector<int>& labels, int num_clusters,
                                     double smoothing) {
  return estimate_transitions(std::vector<std::vector<int>>{labels}, num_clusters, smoothing);
}

CoupledTransitions estimate_coupled_transitions(
    const std::vector<std::vector<int>>& self_sequences,
    const std::vector<std::vector<int>>& other_sequences, int num_self, int num_other,
    double smoothing) {
  if (self_sequences.size() != other_sequences.size())
    throw std::invalid_argument("estimate_coupled_transitions: sequence count mismatch");
  std::vector<Eigen::MatrixXd> counts(num_other, Eigen::MatrixXd::Zero(num_self, num_self));
  for (std::size_t s = 0; s < self_sequences.size(); s++) {
    const auto& self = self_sequences[s];
    const auto& other = other_sequences[s];
    if (self.size() != other.size())
      throw std::invalid_argument("estimate_coupled_transitions: length mismatch");
    for (std::size_t t = 0; t + 1 < self.size(); t++)
      counts[other[t]](self[t], self[t + 1]) += 1.0;
  }
  CoupledTransitions coupled;
  for (auto& c : counts) coupled.rows.push_back(normalize_rows(std::move(c), smoothing));
  return coupled;
}

CoupledTransitions estimate_coupled_transitions(const std::vector<int>& labels_self,
                                                const std::vector<int>& labels_other,
                                                int num_self, int num_other, double smoothing) {
  if (labels_self.size() != labels_other.size())
    throw std::invalid_argument("estimate_coupled_transitions: length mismatch");
  if (labels_self.size() < 2)
    throw std::invalid_argument("estimate_coupled_transitions: need length >= 2");
  return estimate_coupled_transitions(std::vector<std::vector<int>>{labels_self},
                                      std::vector<std::vector<int>>{labels_other}, num_self,
                                      num_other, smoothing);
}

DynamicsParameters default_dynamics(int value_dim, double dt, double observation_noise_var) {
  const int d = value_dim;
  DynamicsParameters dyn;
  dyn.dynamic = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  dyn.dynamic.topLeftCorner(d, d) = Eigen::MatrixXd::Identity(d, d);
  dyn.dynamic.topRightCorner(d, d) = dt * Eigen::MatrixXd::Identity(d, d);
  dyn.control = Eigen::MatrixXd::Zero(2 * d, d);
  dyn.control.bottomRows(d) = Eigen::MatrixXd::Identity(d, d);
  dyn.process_noise = 1e-6 * Eigen::MatrixXd::Identity(2 * d, 2 * d);
  dyn.observation = Eigen::MatrixXd::Zero(d, 2 * d);
  dyn.observation.leftCols(d) = Eigen::MatrixXd::Identity(d, d);
  dyn.observation_noise = observation_noise_var * Eigen::MatrixXd::Identity(d, d);
  return dyn;
}

const char* signal_class_name(SignalClass e) {
  switch (e) {
    case SignalClass::noise: return "noise";
    case SignalClass::pu: return "pu";
    case SignalClass::su: return "su";
  }
  return "?";
}

const ClassModel& GenerativeModel::cls(SignalClass e) const {
  switch (e) {
    case SignalClass::noise: return noise;
    case SignalClass::pu: return pu;
    default: return su;
  }
}

ClassModel& GenerativeModel::cls(SignalClass e) {
  switch (e) {
    case SignalClass::noise: return noise;
    case SignalClass::pu: return pu;
    default: return su;
  }
}

}  // namespace cnoma::gdbn
