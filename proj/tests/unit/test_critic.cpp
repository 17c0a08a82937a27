#include <doctest.h>

#include <cmath>

#include "sottac/critic.hpp"
#include "sottac/oracle.hpp"
#include "sottac/tinymdp.hpp"
#include "test_support.hpp"

using namespace sottac;

namespace {

// One hidden unit on a 1-D state: V(s) = w2 tanh(W1 s + b1) + b2.
ValueCritic scalar_critic(double w1, double b1, double w2, double b2) {
  Rng rng(0);
  ValueCritic c(1, 1, rng);
  c.set_params(std::vector<double>{w1, b1, w2, b2});
  return c;
}

Transition transition(double s, double r, double s_next, bool terminal, bool truncated = false,
                      int t = 0) {
  Transition tr;
  tr.state = {s};
  tr.action = Action{0};
  tr.reward = r;
  tr.next_state = {s_next};
  tr.terminal = terminal;
  tr.truncated = truncated;
  tr.t = t;
  return tr;
}

}  // namespace

TEST_CASE("TD(0) advantage arithmetic") {
  // V(0) = 10, V(1) = 10.5.
  const auto critic = scalar_critic(1.0, 0.0, 0.5 / std::tanh(1.0), 10.0);
  CHECK(critic.value(std::vector<double>{1.0}) == doctest::Approx(10.5));
  const std::vector<Transition> batch = {transition(1.0, 1.0, 0.0, false)};
  const auto adv = td0_targets(critic, batch, 0.99);
  CHECK(adv.advantage[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(adv.q_weight[0] == doctest::Approx(10.9).epsilon(1e-12));
  CHECK(adv.value[0] == doctest::Approx(10.5));
}

TEST_CASE("terminal transitions do not bootstrap; truncated ones do") {
  const auto critic = scalar_critic(1.0, 0.0, 2.0, 0.0);  // V(0) = 0
  const std::vector<Transition> batch = {transition(0.0, 1.0, 1.0, true),
                                         transition(0.0, 1.0, 1.0, false, true)};
  const auto adv = td0_targets(critic, batch, 0.9);
  CHECK(adv.advantage[0] == 1.0);
  CHECK(adv.advantage[1] == doctest::Approx(1.0 + 0.9 * 2.0 * std::tanh(1.0)));
}

TEST_CASE("discount column is gamma^t") {
  const auto critic = scalar_critic(0.0, 0.0, 0.0, 0.0);
  const std::vector<Transition> batch = {transition(0, 0, 0, false, false, 0),
                                         transition(0, 0, 0, false, false, 3)};
  const auto adv = td0_targets(critic, batch, 0.5);
  CHECK(adv.discount[0] == 1.0);
  CHECK(adv.discount[1] == 0.125);
}

TEST_CASE("a batch already at its TD fixed point leaves the critic unchanged") {
  // Constant V = 4; reward 4 (1 - gamma) keeps every TD error at zero.
  auto critic = scalar_critic(0.0, 0.0, 0.7, 4.0);
  const double gamma = 0.9;
  std::vector<Transition> batch;
  for (int i = 0; i < 5; ++i) batch.push_back(transition(0.1 * i, 4.0 * (1.0 - gamma), 0.2 * i, false));
  const std::vector<double> before(critic.params().begin(), critic.params().end());
  const double loss = critic_update(critic, batch, gamma, 0.5, 10);
  CHECK(loss == doctest::Approx(0.0).epsilon(1e-20));
  const std::vector<double> after(critic.params().begin(), critic.params().end());
  CHECK(test::max_abs_diff(before, after) < 1e-15);
}

TEST_CASE("one small step reduces the squared TD error of a single transition") {
  Rng rng(1);
  ValueCritic critic(3, 8, rng);
  Transition tr;
  tr.state = {0.2, -0.4, 1.0};
  tr.next_state = {0.1, 0.0, 0.5};
  tr.action = Action{0};
  tr.reward = 2.0;
  const std::vector<Transition> batch = {tr};
  const double before = td_loss(critic, batch, 0.9);
  const double after = critic_update(critic, batch, 0.9, 1e-3, 1);
  CHECK(after < before);
  CHECK(after == doctest::Approx(td_loss(critic, batch, 0.9)));
}

TEST_CASE("uniform sample weights do not change the loss") {
  Rng rng(2);
  ValueCritic critic(2, 4, rng);
  std::vector<Transition> batch;
  for (int i = 0; i < 6; ++i) {
    Transition tr;
    tr.state = test::random_vector(2, rng);
    tr.next_state = test::random_vector(2, rng);
    tr.action = Action{0};
    tr.reward = rng.normal();
    tr.terminal = i == 5;
    batch.push_back(tr);
  }
  const std::vector<double> w(batch.size(), 3.0);
  CHECK(td_loss(critic, batch, 0.9, w) == doctest::Approx(td_loss(critic, batch, 0.9)));
  CHECK_THROWS_AS(td_loss(critic, batch, 0.9, std::vector<double>{1.0}), ContractViolation);
}

TEST_CASE("a diverging update throws and leaves the critic untouched") {
  Rng rng(3);
  ValueCritic critic(1, 4, rng);
  const std::vector<Transition> batch = {transition(1.0, 1e200, 0.0, true)};
  const std::vector<double> before(critic.params().begin(), critic.params().end());
  CHECK_THROWS_AS(critic_update(critic, batch, 0.9, 1e200, 5), NumericalError);
  const std::vector<double> after(critic.params().begin(), critic.params().end());
  CHECK(before == after);
}

TEST_CASE("gradient of V matches finite differences") {
  Rng rng(4);
  ValueCritic critic(3, 5, rng);
  const auto s = test::random_vector(3, rng);
  auto copy = critic;
  const auto fd = oracle::fd_gradient(
      [&](std::span<const double> w) {
        copy.set_params(w);
        return copy.value(s);
      },
      critic.params(), oracle::FdSpec{1e-6, false});
  CHECK(test::rel_error(critic.grad_value(s), fd) < 1e-7);
}

TEST_CASE("TD(0) with a tabular-capacity critic converges to V^pi on a TinyMdp") {
  // State 0 is only visited at t = 0 and state 1 only at t = 1, so the
  // time-indexed values collapse to one value per state.
  TinyMdp m;
  for (int a = 0; a < 2; ++a) {
    m.transition[0][a][1] = 1.0;
    m.transition[1][a][0] = 1.0;
  }
  m.reward[0][0] = 0.3;
  m.reward[0][1] = -0.5;
  m.reward[1][0] = 1.0;
  m.reward[1][1] = 0.4;
  m.gamma = 0.9;
  m.horizon = 2;
  m.initial[0] = 1.0;
  m.initial[1] = 0.0;
  SoftmaxLinearPolicy pi(2, 2);
  pi.set_params(std::vector<double>{0.4, -0.3, -0.2, 0.6});
  const auto tables = oracle::exact_q_v(m, pi, pi.params());

  TinyMdpEnv env(m);
  Rng rng(5), env_rng(6), act_rng(7);
  ValueCritic critic(2, 8, rng);
  for (int update = 0; update < 10000; ++update) {
    std::vector<Transition> batch;
    for (int e = 0; e < 4; ++e) {
      auto s = env.reset(env_rng);
      for (;;) {
        auto tr = env.step(pi.sample(s, act_rng), env_rng);
        s = tr.next_state;
        const bool done = tr.terminal || tr.truncated;
        batch.push_back(std::move(tr));
        if (done) break;
      }
    }
    critic_update(critic, batch, m.gamma, 0.05, 1);
  }
  const double v0 = critic.value(m.features[0]);
  const double v1 = critic.value(m.features[1]);
  MESSAGE("V(0) " << v0 << " vs " << tables.v[0][0] << ", V(1) " << v1 << " vs " << tables.v[1][1]);
  CHECK(std::abs(v0 - tables.v[0][0]) < 0.05);
  CHECK(std::abs(v1 - tables.v[1][1]) < 0.05);
}
