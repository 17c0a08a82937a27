#include "sottac/env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sottac {

void EnvSpec::validate() const {
  if (state_dim == 0) throw ContractViolation("EnvSpec: state_dim must be positive");
  if (max_episode_len < 1) throw ContractViolation("EnvSpec: max_episode_len must be >= 1");
  if (const auto* c = std::get_if<ContinuousActions>(&action_kind)) {
    if (c->dim < 1 || !(c->low < c->high))
      throw ContractViolation("EnvSpec: continuous actions need dim >= 1 and low < high");
  } else if (std::get<DiscreteActions>(action_kind).n < 1) {
    throw ContractViolation("EnvSpec: discrete action count must be positive");
  }
}

// ---------------------------------------------------------------- CartPole

CartPole::CartPole(int max_episode_len) {
  spec_.state_dim = 4;
  spec_.action_kind = DiscreteActions{2};
  spec_.max_episode_len = max_episode_len;
  spec_.validate();
  state_.assign(4, 0.0);
}

std::vector<double> CartPole::reset(Rng& rng) {
  for (double& v : state_) v = rng.uniform(-0.05, 0.05);
  t_ = 0;
  done_ = false;
  return state_;
}

void CartPole::set_state(std::span<const double> s) {
  if (s.size() != 4) throw ContractViolation("CartPole::set_state: expected 4 components");
  state_.assign(s.begin(), s.end());
  done_ = false;
}

Transition CartPole::step(const Action& action, Rng& /*rng*/) {
  if (done_) throw ContractViolation("CartPole::step called on a finished episode");
  if (!is_discrete(action) || discrete_action(action) < 0 || discrete_action(action) > 1)
    throw ContractViolation("CartPole::step: action must be 0 or 1");

  Transition tr;
  tr.state = state_;
  tr.action = action;
  tr.t = t_;

  constexpr double total_mass = kMassCart + kMassPole;
  constexpr double polemass_length = kMassPole * kHalfLength;
  double x = state_[0], x_dot = state_[1], theta = state_[2], theta_dot = state_[3];
  const double force = discrete_action(action) == 1 ? kForce : -kForce;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) /
      (kHalfLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

  x += kDt * x_dot;
  x_dot += kDt * x_acc;
  theta += kDt * theta_dot;
  theta_dot += kDt * theta_acc;
  state_ = {x, x_dot, theta, theta_dot};

  tr.next_state = state_;
  tr.terminal = x < -kXLimit || x > kXLimit || theta < -kAngleLimit || theta > kAngleLimit;
  tr.reward = 1.0 + spec_.reward_shift;
  ++t_;
  if (!tr.terminal && t_ >= spec_.max_episode_len) tr.truncated = true;
  done_ = tr.terminal || tr.truncated;
  return tr;
}

std::unique_ptr<Environment> CartPole::clone() const { return std::make_unique<CartPole>(*this); }

// ------------------------------------------------------------ PointReacher

PointReacher::PointReacher(int max_episode_len) {
  spec_.state_dim = 4;
  spec_.action_kind = ContinuousActions{2, -kActionBound, kActionBound};
  spec_.max_episode_len = max_episode_len;
  spec_.validate();
  state_.assign(4, 0.0);
}

double PointReacher::nonnegative_shift() {
  return 1.0 + kControlCost * kActionBound * kActionBound;
}

std::vector<double> PointReacher::reset(Rng& rng) {
  const double r = kTargetRadius * std::sqrt(rng.uniform());
  const double phi = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  state_ = {0.0, 0.0, r * std::cos(phi), r * std::sin(phi)};
  t_ = 0;
  done_ = false;
  return state_;
}

void PointReacher::set_state(std::span<const double> s) {
  if (s.size() != 4) throw ContractViolation("PointReacher::set_state: expected 4 components");
  state_.assign(s.begin(), s.end());
  done_ = false;
}

Transition PointReacher::step(const Action& action, Rng& /*rng*/) {
  if (done_) throw ContractViolation("PointReacher::step called on a finished episode");
  if (is_discrete(action) || continuous_action(action).size() != 2 ||
      !all_finite(continuous_action(action)))
    throw ContractViolation("PointReacher::step: action must be a finite 2-vector");

  Transition tr;
  tr.state = state_;
  tr.action = action;
  tr.t = t_;

  const auto& raw = continuous_action(action);
  double control = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double a = std::clamp(raw[i], -kActionBound, kActionBound);
    state_[i] += kDt * a;
    control += a * a;
  }
  const double dx = state_[0] - state_[2];
  const double dy = state_[1] - state_[3];
  tr.reward = -std::sqrt(dx * dx + dy * dy) - kControlCost * control + spec_.reward_shift;
  tr.next_state = state_;
  ++t_;
  tr.truncated = t_ >= spec_.max_episode_len;
  done_ = tr.truncated;
  return tr;
}

std::unique_ptr<Environment> PointReacher::clone() const {
  return std::make_unique<PointReacher>(*this);
}

// ----------------------------------------------------------------- TinyMdp

void TinyMdp::validate() const {
  auto close_to_one = [](double s) { return std::abs(s - 1.0) <= 1e-12; };
  for (int s = 0; s < kStates; ++s)
    for (int a = 0; a < kActions; ++a) {
      double row = 0.0;
      for (int n = 0; n < kStates; ++n) {
        if (transition[s][a][n] < 0.0) throw ContractViolation("TinyMdp: negative probability");
        row += transition[s][a][n];
      }
      if (!close_to_one(row)) throw ContractViolation("TinyMdp: transition row not stochastic");
    }
  if (!close_to_one(initial[0] + initial[1]) || initial[0] < 0.0 || initial[1] < 0.0)
    throw ContractViolation("TinyMdp: initial distribution must sum to 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractViolation("TinyMdp: gamma must be in [0,1)");
  if (horizon < 1) throw ContractViolation("TinyMdp: horizon must be >= 1");
  if (features.size() != kStates || features[0].empty() ||
      features[0].size() != features[1].size())
    throw ContractViolation("TinyMdp: need one equal-length feature row per state");
}

TinyMdp TinyMdp::random(Rng& rng, std::size_t feature_dim, int horizon, double gamma,
                        double reward_lo, double reward_hi) {
  TinyMdp m;
  for (int s = 0; s < kStates; ++s)
    for (int a = 0; a < kActions; ++a) {
      const double p = 0.05 + 0.9 * rng.uniform();
      m.transition[s][a][0] = p;
      m.transition[s][a][1] = 1.0 - p;
      m.reward[s][a] = rng.uniform(reward_lo, reward_hi);
    }
  const double p0 = 0.1 + 0.8 * rng.uniform();
  m.initial[0] = p0;
  m.initial[1] = 1.0 - p0;
  m.gamma = gamma;
  m.horizon = horizon;
  m.features.assign(kStates, std::vector<double>(feature_dim));
  for (auto& row : m.features)
    for (double& v : row) v = rng.normal();
  return m;
}

TinyMdpEnv::TinyMdpEnv(TinyMdp mdp) : mdp_(std::move(mdp)) {
  mdp_.validate();
  spec_.state_dim = mdp_.feature_dim();
  spec_.action_kind = DiscreteActions{TinyMdp::kActions};
  spec_.max_episode_len = mdp_.horizon;
  spec_.validate();
}

TinyMdp TinyMdpEnv::default_instance() {
  TinyMdp m;
  m.transition[0][0][0] = 0.8;
  m.transition[0][0][1] = 0.2;
  m.transition[0][1][0] = 0.3;
  m.transition[0][1][1] = 0.7;
  m.transition[1][0][0] = 0.6;
  m.transition[1][0][1] = 0.4;
  m.transition[1][1][0] = 0.1;
  m.transition[1][1][1] = 0.9;
  m.reward[0][0] = 0.0;
  m.reward[0][1] = 0.5;
  m.reward[1][0] = 1.0;
  m.reward[1][1] = 0.2;
  m.gamma = 0.9;
  m.horizon = 4;
  m.initial[0] = 0.7;
  m.initial[1] = 0.3;
  m.features = {{1.0, 0.0}, {0.0, 1.0}};
  return m;
}

std::vector<double> TinyMdpEnv::reset(Rng& rng) {
  s_ = rng.uniform() < mdp_.initial[0] ? 0 : 1;
  t_ = 0;
  done_ = false;
  return mdp_.features[s_];
}

int TinyMdpEnv::state_index(std::span<const double> f) const {
  for (int s = 0; s < TinyMdp::kStates; ++s)
    if (std::equal(f.begin(), f.end(), mdp_.features[s].begin())) return s;
  throw ContractViolation("TinyMdpEnv: unknown state features");
}

Transition TinyMdpEnv::step(const Action& action, Rng& rng) {
  if (done_) throw ContractViolation("TinyMdpEnv::step called on a finished episode");
  if (!is_discrete(action) || discrete_action(action) < 0 ||
      discrete_action(action) >= TinyMdp::kActions)
    throw ContractViolation("TinyMdpEnv::step: action out of range");
  const int a = discrete_action(action);
  Transition tr;
  tr.state = mdp_.features[s_];
  tr.action = action;
  tr.t = t_;
  tr.reward = mdp_.reward[s_][a] + spec_.reward_shift;
  s_ = rng.uniform() < mdp_.transition[s_][a][0] ? 0 : 1;
  tr.next_state = mdp_.features[s_];
  ++t_;
  // The horizon is the true end of the finite-horizon problem.
  tr.terminal = t_ >= mdp_.horizon;
  done_ = tr.terminal;
  return tr;
}

std::unique_ptr<Environment> TinyMdpEnv::clone() const {
  return std::make_unique<TinyMdpEnv>(*this);
}

bool is_known_env(std::string_view name) {
  return name == "cartpole" || name == "reacher" || name == "tinymdp";
}

std::unique_ptr<Environment> make_env(std::string_view name, int max_episode_len) {
  if (name == "cartpole") return std::make_unique<CartPole>(max_episode_len > 0 ? max_episode_len : 500);
  if (name == "reacher")
    return std::make_unique<PointReacher>(max_episode_len > 0 ? max_episode_len : 100);
  if (name == "tinymdp") return std::make_unique<TinyMdpEnv>(TinyMdpEnv::default_instance());
  std::ostringstream os;
  os << "unknown environment '" << name << "' (expected cartpole, reacher or tinymdp)";
  throw ContractViolation(os.str());
}

}  // namespace sottac
