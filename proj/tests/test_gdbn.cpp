#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>

#include "cnoma/gdbn.hpp"
#include "cnoma/rng.hpp"
#include "oracles.hpp"

using namespace cnoma;

namespace {

std::vector<Eigen::VectorXd> scalar_seq(const std::vector<double>& values) {
  std::vector<Eigen::VectorXd> out;
  for (double v : values) {
    Eigen::VectorXd z(1);
    z << v;
    out.push_back(z);
  }
  return out;
}

}  // namespace

TEST_CASE("generalized errors: constant input converges to zero") {
  std::vector<double> values(30, 4.2);
  gdbn::StaticFilterParams sf;
  const auto errors = gdbn::generalized_errors(scalar_seq(values), sf);
  REQUIRE(errors.size() == values.size() - 1);
  CHECK(errors[0].value.norm() < 1e-12);  // filter initialized at the first observation
  for (std::size_t t = 9; t < errors.size(); t++) {
    CHECK(errors[t].value.norm() < 1e-10);
    CHECK(errors[t].derivative.norm() < 1e-12);
  }
}

TEST_CASE("generalized errors: ramp derivative equals the slope") {
  std::vector<double> values;
  for (int t = 0; t < 25; t++) values.push_back(0.7 * t - 3.0);
  gdbn::StaticFilterParams sf;
  sf.dt = 1.0;
  const auto errors = gdbn::generalized_errors(scalar_seq(values), sf);
  for (const auto& e : errors) CHECK(e.derivative(0) == doctest::Approx(0.7).epsilon(1e-12));
  // the static filter lags a ramp, so the innovation settles at a positive level
  CHECK(errors.back().value(0) > 0.0);
}

TEST_CASE("generalized errors: deterministic and length-checked") {
  Rng rng(3);
  std::vector<double> values;
  for (int t = 0; t < 40; t++) values.push_back(rng.normal());
  gdbn::StaticFilterParams sf;
  const auto a = gdbn::generalized_errors(scalar_seq(values), sf);
  const auto b = gdbn::generalized_errors(scalar_seq(values), sf);
  for (std::size_t t = 0; t < a.size(); t++) {
    CHECK(a[t].value(0) == b[t].value(0));
    CHECK(a[t].derivative(0) == b[t].derivative(0));
  }
  CHECK_THROWS(gdbn::generalized_errors(scalar_seq({1.0}), sf));
}

namespace {

std::vector<gdbn::GeneralizedState> gaussian_blob(Rng& rng, const Eigen::Vector2d& center,
                                                  double sigma, int count) {
  std::vector<gdbn::GeneralizedState> out;
  for (int i = 0; i < count; i++) {
    gdbn::GeneralizedState g;
    g.value = Eigen::VectorXd(1);
    g.derivative = Eigen::VectorXd(1);
    g.value << center.x() + sigma * rng.normal();
    g.derivative << center.y() + sigma * rng.normal();
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace

TEST_CASE("gng: zero learning rate never moves nodes") {
  Rng rng(4);
  auto samples = gaussian_blob(rng, {0.0, 0.0}, 1.0, 200);
  gdbn::GngParams params;
  params.learning_rate = 0.0;
  params.neighbor_rate = 0.0;
  params.max_nodes = 2;
  const auto vocab = gdbn::gng_learn(samples, params);
  REQUIRE(vocab.size() == 2);
  // initial nodes are the first two (distinct) samples
  CHECK(vocab.clusters[0].mean.stacked() == samples[0].stacked());
  CHECK(vocab.clusters[1].mean.stacked() == samples[1].stacked());
}

TEST_CASE("gng: one repeated point collapses to a single regularized cluster") {
  std::vector<gdbn::GeneralizedState> samples;
  for (int i = 0; i < 100; i++) {
    gdbn::GeneralizedState g;
    g.value = Eigen::VectorXd::Constant(1, 2.5);
    g.derivative = Eigen::VectorXd::Constant(1, -1.0);
    samples.push_back(g);
  }
  const auto vocab = gdbn::gng_learn(samples, {});
  REQUIRE(vocab.size() == 1);
  CHECK(vocab.clusters[0].mean.value(0) == doctest::Approx(2.5).epsilon(1e-12));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(vocab.clusters[0].covariance);
  CHECK(es.eigenvalues().minCoeff() >= 1e-9 * (1.0 - 1e-12));
}

TEST_CASE("gng: two separated blobs vs a 2-means oracle") {
  Rng rng(5);
  auto samples = gaussian_blob(rng, {0.0, 0.0}, 0.1, 400);
  auto far = gaussian_blob(rng, {10.0, 10.0}, 0.1, 400);
  // interleave so cyclic presentation sees both blobs
  std::vector<gdbn::GeneralizedState> mixed;
  for (int i = 0; i < 400; i++) {
    mixed.push_back(samples[i]);
    mixed.push_back(far[i]);
  }
  gdbn::GngParams params;
  params.learning_rate = 0.05;
  params.max_nodes = 6;
  std::vector<double> trace;
  const auto vocab = gdbn::gng_learn(mixed, params, &trace);

  bool near_a = false, near_b = false;
  for (const auto& c : vocab.clusters) {
    const Eigen::VectorXd m = c.mean.stacked();
    if ((m - Eigen::Vector2d(0, 0)).norm() < 2.0) near_a = true;
    if ((m - Eigen::Vector2d(10, 10)).norm() < 2.0) near_b = true;
  }
  CHECK(near_a);
  CHECK(near_b);

  double qe = 0.0;
  std::vector<Eigen::VectorXd> data;
  for (const auto& s : mixed) data.push_back(s.stacked());
  for (const auto& x : data) {
    double best = 1e300;
    for (const auto& c : vocab.clusters) best = std::min(best, (x - c.mean.stacked()).squaredNorm());
    qe += best;
  }
  qe /= data.size();
  CHECK(qe <= 2.0 * oracles::kmeans2_quantization(data) + 1e-9);

  // quantization error does not increase across insertion epochs
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); i++) CHECK(trace[i] <= trace[i - 1] + 1e-12);
}

TEST_CASE("assign cluster") {
  gdbn::DiscreteVocabulary vocab;
  for (double center : {-1.0, 0.5, 1.0, 3.0}) {
    gdbn::Cluster c;
    c.mean.value = Eigen::VectorXd::Constant(1, center);
    c.mean.derivative = Eigen::VectorXd::Zero(1);
    c.covariance = Eigen::MatrixXd::Identity(2, 2);
    vocab.clusters.push_back(std::move(c));
  }
  vocab.refresh_cache();

  gdbn::GeneralizedState x;
  x.value = Eigen::VectorXd::Constant(1, 3.0);
  x.derivative = Eigen::VectorXd::Zero(1);
  CHECK(gdbn::assign_cluster(x, vocab) == 3);

  // exact tie between clusters 0 (-1) and 2 (+1) resolves to the lower label
  x.value(0) = 0.0;
  gdbn::DiscreteVocabulary two;
  two.clusters = {vocab.clusters[0], vocab.clusters[2]};
  two.refresh_cache();
  CHECK(gdbn::assign_cluster(x, two) == 0);

  // brute-force scan oracle on random inputs
  Rng rng(6);
  for (int i = 0; i < 200; i++) {
    x.value(0) = rng.uniform(-5, 5);
    x.derivative(0) = rng.uniform(-5, 5);
    int best = 0;
    double bd = 1e300;
    for (int j = 0; j < vocab.size(); j++) {
      const Eigen::VectorXd d = x.stacked() - vocab.clusters[j].mean.stacked();
      const double dist = d.dot(vocab.clusters[j].cov_inverse * d);
      if (dist < bd) {
        bd = dist;
        best = j;
      }
    }
    CHECK(gdbn::assign_cluster(x, vocab) == best);
  }
  CHECK_THROWS(gdbn::assign_cluster(x, gdbn::DiscreteVocabulary{}));
}

TEST_CASE("estimate transitions") {
  const auto model = gdbn::estimate_transitions({0, 0, 1, 1}, 2, 0.0);
  CHECK(model.single(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(model.single(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(model.single(1, 0) == 0.0);
  CHECK(model.single(1, 1) == doctest::Approx(1.0).epsilon(1e-12));

  const auto constant = gdbn::estimate_transitions({2, 2, 2, 2, 2}, 3, 0.0);
  CHECK(constant.single(2, 2) == doctest::Approx(1.0).epsilon(1e-12));
  // unseen rows fall back to uniform
  CHECK(constant.single(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  Rng rng(7);
  std::vector<int> labels;
  for (int i = 0; i < 200000; i++) labels.push_back(rng.uniform_int(4));
  const auto uniform = gdbn::estimate_transitions(labels, 4, 0.0);
  for (int i = 0; i < 4; i++)
    for (int j = 0; j < 4; j++) CHECK(uniform.single(i, j) == doctest::Approx(0.25).epsilon(0.08));

  // rows sum to one for random streams and smoothings
  for (int trial = 0; trial < 20; trial++) {
    std::vector<int> seq;
    const int C = 2 + rng.uniform_int(5);
    for (int i = 0; i < 50; i++) seq.push_back(rng.uniform_int(C));
    const double delta = rng.uniform01() * 0.1;
    const auto m = gdbn::estimate_transitions(seq, C, delta);
    for (int i = 0; i < C; i++) {
      CHECK(m.single.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
      for (int j = 0; j < C; j++) {
        CHECK(m.single(i, j) >= 0.0);
        CHECK(m.single(i, j) <= 1.0);
      }
    }
  }
}

TEST_CASE("coupled transitions") {
  Rng rng(8);

  SUBCASE("constant other chain reduces to the single-chain rows") {
    std::vector<int> self, other;
    for (int i = 0; i < 500; i++) {
      self.push_back(rng.uniform_int(3));
      other.push_back(1);
    }
    const auto coupled = gdbn::estimate_coupled_transitions(self, other, 3, 2, 0.0);
    const auto single = gdbn::estimate_transitions(self, 3, 0.0);
    for (int i = 0; i < 3; i++)
      for (int j = 0; j < 3; j++) CHECK(coupled.rows[1](i, j) == single.single(i, j));
  }

  SUBCASE("one-step copy gives one-hot rows") {
    std::vector<int> other;
    for (int i = 0; i < 400; i++) other.push_back(rng.uniform_int(3));
    std::vector<int> self(other.size());
    self[0] = 0;
    for (std::size_t t = 1; t < other.size(); t++) self[t] = other[t - 1];
    const auto coupled = gdbn::estimate_coupled_transitions(self, other, 3, 3, 0.0);
    for (int o = 0; o < 3; o++)
      for (int s = 0; s < 3; s++) {
        const Eigen::RowVectorXd row = coupled.row(s, o);
        if (row.maxCoeff() > 0.99) {
          // seen pair: the next self label is exactly the previous other label
          CHECK(row(o) == doctest::Approx(1.0).epsilon(1e-12));
        } else {
          // unseen pair falls back to uniform
          CHECK(row(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        }
      }
  }

  SUBCASE("independent chains marginalize to the single rows") {
    std::vector<int> self, other;
    for (int i = 0; i < 200000; i++) {
      self.push_back(rng.uniform_int(2));
      other.push_back(rng.uniform_int(2));
    }
    const auto coupled = gdbn::estimate_coupled_transitions(self, other, 2, 2, 0.0);
    const auto single = gdbn::estimate_transitions(self, 2, 0.0);
    for (int o = 0; o < 2; o++)
      for (int i = 0; i < 2; i++)
        for (int j = 0; j < 2; j++)
          CHECK(std::abs(coupled.rows[o](i, j) - single.single(i, j)) < 0.03);
  }

  CHECK_THROWS(gdbn::estimate_coupled_transitions({0, 1}, {0}, 2, 2, 0.0));
}

TEST_CASE("default dynamics shape") {
  const auto dyn = gdbn::default_dynamics(2, 0.5, 0.03);
  CHECK(dyn.state_dim() == 4);
  CHECK(dyn.obs_dim() == 2);
  CHECK(dyn.dynamic(0, 2) == 0.5);   // value integrates the derivative
  CHECK(dyn.dynamic(2, 2) == 0.0);   // derivative is control-driven
  CHECK(dyn.control(2, 0) == 1.0);
  CHECK(dyn.observation(0, 0) == 1.0);
  CHECK(dyn.observation(0, 2) == 0.0);  // derivative unobserved
}

TEST_CASE("model serialization round-trip") {
  Rng rng(9);
  auto samples = gaussian_blob(rng, {1.0, -1.0}, 0.3, 300);
  gdbn::GngParams params;
  params.learning_rate = 0.05;
  params.max_nodes = 4;

  gdbn::GenerativeModel model;
  model.su.vocab = gdbn::gng_learn(samples, params);
  model.su.transitions = gdbn::estimate_transitions({0, 1, 0, 1, 1, 0}, model.su.vocab.size(), 1e-3);
  model.su.transitions.coupled =
      gdbn::estimate_coupled_transitions({0, 1, 0, 1}, {1, 0, 1, 0}, model.su.vocab.size(), 2, 1e-3);
  model.su.dynamics = gdbn::default_dynamics(1, 1.0, 0.03);
  model.su.feature_mean = Eigen::VectorXd::Constant(2, -5.0);
  model.su.feature_cov = Eigen::MatrixXd::Identity(2, 2);
  model.pu = model.su;
  model.noise = model.su;
  model.t_pu = {(Eigen::Matrix2d() << 0.9, 0.1, 0.2, 0.8).finished()};

  model.save("/tmp/cnoma_test_model.json");
  const auto loaded = gdbn::GenerativeModel::load("/tmp/cnoma_test_model.json");
  CHECK(loaded.su.vocab.size() == model.su.vocab.size());
  for (int c = 0; c < model.su.vocab.size(); c++) {
    CHECK((loaded.su.vocab.clusters[c].mean.stacked() -
           model.su.vocab.clusters[c].mean.stacked()).norm() == 0.0);
    CHECK((loaded.su.vocab.clusters[c].covariance -
           model.su.vocab.clusters[c].covariance).norm() == 0.0);
  }
  CHECK((loaded.su.transitions.single - model.su.transitions.single).norm() == 0.0);
  CHECK((loaded.su.transitions.coupled.rows[0] - model.su.transitions.coupled.rows[0]).norm() ==
        0.0);
  CHECK((loaded.t_pu[0] - model.t_pu[0]).norm() == 0.0);
  CHECK((loaded.su.feature_mean - model.su.feature_mean).norm() == 0.0);

  // byte-identical re-save
  loaded.save("/tmp/cnoma_test_model2.json");
  std::ifstream f1("/tmp/cnoma_test_model.json"), f2("/tmp/cnoma_test_model2.json");
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
}
