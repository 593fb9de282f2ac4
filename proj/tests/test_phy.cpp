#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <set>

#include "cnoma/phy.hpp"
#include "cnoma/rng.hpp"

using namespace cnoma;

TEST_CASE("distance") {
  CHECK(phy::distance({0.0, 0.0}, 50.0) == doctest::Approx(50.0).epsilon(1e-15));
  CHECK(phy::distance({30.0, 40.0}, 50.0) == doctest::Approx(70.710678118654755).epsilon(1e-13));

  Rng rng(3);
  for (int i = 0; i < 100; i++) {
    const Eigen::Vector2d q(rng.uniform(-100, 100), rng.uniform(-100, 100));
    const double theta = rng.uniform(0, 6.28);
    Eigen::Matrix2d rot;
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    CHECK(phy::distance(rot * q, 50.0) == doctest::Approx(phy::distance(q, 50.0)).epsilon(1e-12));
  }
  CHECK(phy::distance({1.0, 1.0}, 50.0) >= 50.0);
  CHECK_THROWS(phy::distance({0.0, 0.0}, 0.0));
  CHECK_THROWS(phy::distance({std::nan(""), 0.0}, 50.0));
}

TEST_CASE("channel gain") {
  CHECK(phy::channel_gain(1, 1, 1, 1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(phy::channel_gain(1, 1, 1, 1.0, 3.7) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(phy::channel_gain(1, 1, 1, 50.0, 2.0) == doctest::Approx(4.0e-4).epsilon(1e-13));

  Rng rng(4);
  for (int i = 0; i < 100; i++) {
    const double d = rng.uniform(1.0, 200.0);
    CHECK(phy::channel_gain(1, 1, 1, 2 * d, 2.0) ==
          doctest::Approx(phy::channel_gain(1, 1, 1, d, 2.0) / 4.0).epsilon(1e-12));
  }
  CHECK_THROWS(phy::channel_gain(1, 1, 1, 0.0, 2.0));
  CHECK_THROWS(phy::channel_gain(1, 1, 1, -3.0, 2.0));
}

TEST_CASE("noise power") {
  CHECK(phy::noise_power(-174.0, 0.0) == 0.0);
  CHECK(phy::noise_power(-90.0, 0.0) == 0.0);
  CHECK(phy::noise_power(-174.0, 1.0) == doctest::Approx(3.9810717055349858e-21).epsilon(1e-12));
  CHECK(phy::noise_power(-174.0, 1.4e6 / 6.0) ==
        doctest::Approx(9.2891673129149676e-16).epsilon(1e-12));
  scenario::ScenarioConfig cfg;
  cfg.num_subchannels = 6;
  cfg.bandwidth = 1.4e6;
  CHECK(phy::make_noise_model(cfg).eta == doctest::Approx(9.2891673129149676e-16).epsilon(1e-12));
}

TEST_CASE("sic order") {
  CHECK(phy::sic_order_entry({{0, 1e-3}, {1, 1e-4}}) == std::vector<int>{0, 1});
  CHECK(phy::sic_order_entry({{4, 0.5}}) == std::vector<int>{4});
  CHECK(phy::sic_order_entry({{2, 0.125}, {1, 0.125}}) == std::vector<int>{1, 2});
  CHECK_THROWS(phy::sic_order_entry({}));
}

namespace {

phy::ChannelRealization two_user_channel() {
  phy::ChannelRealization ch;
  ch.gains.resize(1, 2);
  ch.gains << 1e-3, 1e-4;
  return ch;
}

phy::Allocation two_user_alloc() {
  phy::Allocation a = phy::Allocation::zeros(1, 2);
  a.b << 1, 1;
  a.p << 10.0, 10.0;
  return a;
}

}  // namespace

TEST_CASE("achievable rate") {
  // single user with p*g/eta = 3
  phy::ChannelRealization ch;
  ch.gains.resize(1, 1);
  ch.gains << 3e-4;
  phy::Allocation a = phy::Allocation::zeros(1, 1);
  a.b << 1;
  a.p << 1.0;
  const auto order = phy::sic_order(a, ch);
  CHECK(phy::achievable_rate(0, 0, a, ch, order, 1e-4) == doctest::Approx(2.0).epsilon(1e-12));

  // hand-evaluated two-user SIC case
  const auto ch2 = two_user_channel();
  const auto a2 = two_user_alloc();
  const auto order2 = phy::sic_order(a2, ch2);
  CHECK(order2.per_subchannel[0] == std::vector<int>{0, 1});
  CHECK(phy::achievable_rate(0, 0, a2, ch2, order2, 1e-4) ==
        doctest::Approx(3.334984247712808).epsilon(1e-12));
  CHECK(phy::achievable_rate(0, 1, a2, ch2, order2, 1e-4) ==
        doctest::Approx(3.459431618637297).epsilon(1e-12));

  // unassigned user rates zero
  phy::Allocation a3 = phy::Allocation::zeros(1, 2);
  a3.b << 1, 0;
  a3.p << 10.0, 0.0;
  const auto order3 = phy::sic_order(a3, ch2);
  CHECK(phy::achievable_rate(0, 1, a3, ch2, order3, 1e-4) == 0.0);
}

TEST_CASE("rate monotonicity") {
  phy::ChannelRealization ch;
  ch.gains.resize(1, 1);
  phy::Allocation a = phy::Allocation::zeros(1, 1);
  a.b << 1;
  Rng rng(9);
  for (int i = 0; i < 50; i++) {
    const double g = rng.uniform(1e-6, 1e-3);
    const double p = rng.uniform(0.1, 20.0);
    const double eta = rng.uniform(1e-7, 1e-4);
    ch.gains << g;
    a.p << p;
    const auto order = phy::sic_order(a, ch);
    const double base = phy::achievable_rate(0, 0, a, ch, order, eta);
    a.p << p * 1.5;
    CHECK(phy::achievable_rate(0, 0, a, ch, order, eta) > base);
    a.p << p;
    ch.gains << g * 1.5;
    CHECK(phy::achievable_rate(0, 0, a, ch, order, eta) > base);
    ch.gains << g;
    CHECK(phy::achievable_rate(0, 0, a, ch, order, eta * 1.5) < base);
  }
}

TEST_CASE("sic denominator structure") {
  // last decoded sees only eta; first sees everyone else
  phy::ChannelRealization ch;
  ch.gains.resize(1, 3);
  ch.gains << 5e-4, 3e-4, 1e-4;
  phy::Allocation a = phy::Allocation::zeros(1, 3);
  a.b << 1, 1, 1;
  a.p << 8.0, 6.0, 4.0;
  const double eta = 2e-5;
  const auto order = phy::sic_order(a, ch);
  CHECK(phy::achievable_rate(0, 2, a, ch, order, eta) ==
        doctest::Approx(std::log2(1.0 + 4.0 * 1e-4 / eta)).epsilon(1e-12));
  const double interference = 6.0 * 3e-4 + 4.0 * 1e-4;
  CHECK(phy::achievable_rate(0, 0, a, ch, order, eta) ==
        doctest::Approx(std::log2(1.0 + 8.0 * 5e-4 / (interference + eta))).epsilon(1e-12));
}

TEST_CASE("sum rate") {
  const auto ch = two_user_channel();
  CHECK(phy::sum_rate(phy::Allocation::zeros(1, 2), ch, 1e-4) == 0.0);
  CHECK(phy::sum_rate(two_user_alloc(), ch, 1e-4) ==
        doctest::Approx(6.794415866350105).epsilon(1e-12));

  // random instances against a test-local recomputation
  Rng rng(17);
  for (int trial = 0; trial < 40; trial++) {
    const int K = 1 + rng.uniform_int(3);
    const int N = 1 + rng.uniform_int(4);
    phy::ChannelRealization chr;
    chr.gains.resize(K, N);
    phy::Allocation alloc = phy::Allocation::zeros(K, N);
    for (int k = 0; k < K; k++)
      for (int n = 0; n < N; n++) {
        chr.gains(k, n) = rng.uniform(1e-6, 1e-3);
        if (rng.uniform01() < 0.6) {
          alloc.b(k, n) = 1;
          alloc.p(k, n) = rng.uniform(0.0, 5.0);
        }
      }
    const double eta = 1e-5;

    double expected = 0.0;
    for (int k = 0; k < K; k++) {
      std::vector<std::pair<int, double>> users;
      for (int n = 0; n < N; n++)
        if (alloc.b(k, n)) users.emplace_back(n, chr.gains(k, n));
      std::sort(users.begin(), users.end(), [](auto& x, auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
      });
      for (std::size_t i = 0; i < users.size(); i++) {
        double interference = 0.0;
        for (std::size_t j = i + 1; j < users.size(); j++)
          interference += alloc.p(k, users[j].first) * users[j].second;
        expected += std::log2(1.0 + alloc.p(k, users[i].first) * users[i].second /
                                        (interference + eta));
      }
    }
    CHECK(phy::sum_rate(alloc, chr, eta) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("synthesize: noise only variance") {
  phy::Allocation a = phy::Allocation::zeros(2, 2);
  phy::ChannelRealization ch;
  ch.gains = Eigen::MatrixXd::Constant(2, 2, 1e-4);
  phy::NoiseModel nm{-174.0, 1e-6};
  const auto blocks = phy::synthesize_received(a, ch, {0, 0}, nm, 1e-3, 10000, Rng(5));
  for (const auto& block : blocks) {
    double var = 0.0;
    for (const auto& y : block) var += std::norm(y);
    var /= block.size();
    CHECK(var == doctest::Approx(1e-6).epsilon(0.05));
  }
}

TEST_CASE("synthesize: single SU constellation") {
  phy::Allocation a = phy::Allocation::zeros(1, 1);
  a.b << 1;
  a.p << 4.0;
  phy::ChannelRealization ch;
  ch.gains.resize(1, 1);
  ch.gains << 1e-2;
  phy::NoiseModel nm{-174.0, 0.0};
  const auto blocks = phy::synthesize_received(a, ch, {0}, nm, 1e-3, 4096, Rng(6));
  std::set<std::pair<long, long>> points;
  const double amp = std::sqrt(4.0 * 1e-2);
  for (const auto& y : blocks[0]) {
    CHECK(std::abs(y) == doctest::Approx(amp).epsilon(1e-12));
    points.insert({std::lround(y.real() * 1e9), std::lround(y.imag() * 1e9)});
  }
  CHECK(points.size() == 4);
}

TEST_CASE("synthesize: superposition linearity") {
  phy::ChannelRealization ch;
  ch.gains.resize(1, 2);
  ch.gains << 1e-3, 5e-4;
  phy::NoiseModel nm{-174.0, 0.0};
  const Rng slot(77);

  phy::Allocation both = phy::Allocation::zeros(1, 2);
  both.b << 1, 1;
  both.p << 9.0, 4.0;
  phy::Allocation solo0 = phy::Allocation::zeros(1, 2);
  solo0.b << 1, 0;
  solo0.p << 9.0, 0.0;
  phy::Allocation solo1 = phy::Allocation::zeros(1, 2);
  solo1.b << 0, 1;
  solo1.p << 0.0, 4.0;

  const auto yb = phy::synthesize_received(both, ch, {0}, nm, 1e-3, 256, slot);
  const auto y0 = phy::synthesize_received(solo0, ch, {0}, nm, 1e-3, 256, slot);
  const auto y1 = phy::synthesize_received(solo1, ch, {0}, nm, 1e-3, 256, slot);
  for (int i = 0; i < 256; i++) {
    CHECK(yb[0][i].real() == y0[0][i].real() + y1[0][i].real());
    CHECK(yb[0][i].imag() == y0[0][i].imag() + y1[0][i].imag());
  }
}

TEST_CASE("synthesize: infeasible allocation rejected") {
  phy::Allocation a = phy::Allocation::zeros(1, 1);
  a.b << 1;
  a.p << -1.0;
  phy::ChannelRealization ch;
  ch.gains.resize(1, 1);
  ch.gains << 1e-3;
  CHECK_THROWS(phy::synthesize_received(a, ch, {0}, {-174.0, 1e-9}, 1e-3, 8, Rng(1)));
}

TEST_CASE("check constraints") {
  scenario::ScenarioConfig cfg;
  cfg.num_subchannels = 2;
  cfg.num_sus = 3;
  cfg.max_multiplexed = 2;
  cfg.p_max = 20.0;

  // C1 pass at 19 W total
  phy::Allocation a = phy::Allocation::zeros(2, 3);
  a.b(0, 0) = 1;
  a.p(0, 0) = 10.0;
  a.b(1, 0) = 1;
  a.p(1, 0) = 9.0;
  auto rep = phy::check_constraints(a, nullptr, cfg);
  CHECK(rep.c1);
  CHECK(rep.feasible_c1_c4());
  CHECK(rep.violated.empty());

  a.p(1, 0) = 11.0;  // 21 W
  rep = phy::check_constraints(a, nullptr, cfg);
  CHECK_FALSE(rep.c1);

  phy::Allocation neg = phy::Allocation::zeros(2, 3);
  neg.b(0, 0) = 1;
  neg.p(0, 0) = -1.0;
  rep = phy::check_constraints(neg, nullptr, cfg);
  CHECK_FALSE(rep.c2);

  phy::Allocation crowded = phy::Allocation::zeros(2, 3);
  for (int n = 0; n < 3; n++) {
    crowded.b(0, n) = 1;
    crowded.p(0, n) = 1.0;
  }
  rep = phy::check_constraints(crowded, nullptr, cfg);
  CHECK_FALSE(rep.c4);
  CHECK(rep.violated == std::vector<std::string>{"C4"});

  // C5 against the configured initial position
  scenario::UavTrajectory uav;
  uav.height = 50.0;
  uav.horizontal = {{0.0, 0.0}, {5.0, 0.0}};
  CHECK(phy::check_constraints(phy::Allocation::zeros(2, 3), &uav, cfg).c5);
  uav.horizontal[0] = {1.0, 0.0};
  CHECK_FALSE(phy::check_constraints(phy::Allocation::zeros(2, 3), &uav, cfg).c5);

  // C6 from the slot budget
  scenario::ScenarioConfig slow = cfg;
  slow.num_time_steps = 11;
  slow.t_max = 10.0;
  CHECK_FALSE(phy::check_constraints(phy::Allocation::zeros(2, 3), nullptr, slow).c6);

  // equal received powers flagged SIC-unreliable
  phy::ChannelRealization ch;
  ch.gains = Eigen::MatrixXd::Constant(2, 3, 1e-4);
  phy::Allocation equal = phy::Allocation::zeros(2, 3);
  equal.b(0, 0) = equal.b(0, 1) = 1;
  equal.p(0, 0) = equal.p(0, 1) = 5.0;
  rep = phy::check_constraints(equal, nullptr, cfg, &ch);
  CHECK_FALSE(rep.sic_reliable);
}
