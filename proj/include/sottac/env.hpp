#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sottac/common.hpp"
#include "sottac/rng.hpp"

namespace sottac {

struct DiscreteActions {
  int n = 2;
};

/// Box action space with the same bounds on every component.
struct ContinuousActions {
  int dim = 1;
  double low = -1.0;
  double high = 1.0;
};

using ActionKind = std::variant<DiscreteActions, ContinuousActions>;

struct EnvSpec {
  std::size_t state_dim = 1;
  ActionKind action_kind = DiscreteActions{};
  int max_episode_len = 1;  // H
  double reward_shift = 0.0;

  /// Throws ContractViolation when the invariants do not hold.
  void validate() const;
};

struct Transition {
  std::vector<double> state;
  Action action;
  double reward = 0.0;  // after reward_shift
  std::vector<double> next_state;
  bool terminal = false;
  bool truncated = false;  // hit H without terminating; bootstrapped
  int t = 0;
  double log_prob = 0.0;  // filled in by the sampler
};

/// Single-threaded environment instance. Owns its current state.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual std::string_view name() const = 0;
  virtual std::vector<double> reset(Rng& rng) = 0;
  /// Advances one step from the current state. Throws ContractViolation for an
  /// invalid action or a step after the episode ended.
  virtual Transition step(const Action& action, Rng& rng) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;

  void set_reward_shift(double shift) { mutable_spec().reward_shift = shift; }

 protected:
  virtual EnvSpec& mutable_spec() = 0;
};

/// Cart-pole balancing with the classic Gym constants and Euler integration.
class CartPole final : public Environment {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForce = 10.0;
  static constexpr double kDt = 0.02;
  static constexpr double kXLimit = 2.4;
  static constexpr double kAngleLimit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;

  explicit CartPole(int max_episode_len = 500);

  const EnvSpec& spec() const override { return spec_; }
  std::string_view name() const override { return "cartpole"; }
  std::vector<double> reset(Rng& rng) override;
  Transition step(const Action& action, Rng& rng) override;
  std::unique_ptr<Environment> clone() const override;

  /// Test hook: overwrite the physical state.
  void set_state(std::span<const double> s);

 protected:
  EnvSpec& mutable_spec() override { return spec_; }

 private:
  EnvSpec spec_;
  std::vector<double> state_;
  int t_ = 0;
  bool done_ = true;
};

/// Planar point mass driven by velocity commands toward a random target.
/// State is (x, y, target_x, target_y).
class PointReacher final : public Environment {
 public:
  static constexpr double kDt = 0.05;
  static constexpr double kControlCost = 0.01;
  static constexpr double kActionBound = 1.0;
  static constexpr double kTargetRadius = 1.0;

  explicit PointReacher(int max_episode_len = 100);

  const EnvSpec& spec() const override { return spec_; }
  std::string_view name() const override { return "reacher"; }
  std::vector<double> reset(Rng& rng) override;
  Transition step(const Action& action, Rng& rng) override;
  std::unique_ptr<Environment> clone() const override;

  void set_state(std::span<const double> s);

  /// Per-step shift that makes rewards nonnegative in Q-weighted modes.
  static double nonnegative_shift();

 protected:
  EnvSpec& mutable_spec() override { return spec_; }

 private:
  EnvSpec spec_;
  std::vector<double> state_;
  int t_ = 0;
  bool done_ = true;
};

/// Two-state, two-action finite-horizon MDP small enough for exact dynamic
/// programming. Each state is presented to policies as a feature vector.
struct TinyMdp {
  static constexpr int kStates = 2;
  static constexpr int kActions = 2;

  // transition[s][a][s']
  double transition[kStates][kActions][kStates] = {};
  double reward[kStates][kActions] = {};
  double gamma = 0.9;
  int horizon = 3;
  double initial[kStates] = {0.5, 0.5};
  /// features[s] is the state vector of state s; all rows share one length.
  std::vector<std::vector<double>> features = {{1.0, 0.0}, {0.0, 1.0}};

  std::size_t feature_dim() const { return features.front().size(); }
  void validate() const;

  /// Random instance: Dirichlet-like rows, rewards uniform in [reward_lo,
  /// reward_hi), standard-normal features of the given dimension.
  static TinyMdp random(Rng& rng, std::size_t feature_dim, int horizon, double gamma,
                        double reward_lo = -1.0, double reward_hi = 1.0);
};

class TinyMdpEnv final : public Environment {
 public:
  explicit TinyMdpEnv(TinyMdp mdp);

  const EnvSpec& spec() const override { return spec_; }
  std::string_view name() const override { return "tinymdp"; }
  std::vector<double> reset(Rng& rng) override;
  Transition step(const Action& action, Rng& rng) override;
  std::unique_ptr<Environment> clone() const override;

  const TinyMdp& mdp() const { return mdp_; }
  int current_state() const { return s_; }
  /// Recovers the discrete state from its feature vector.
  int state_index(std::span<const double> features) const;

  /// The fixed instance used when "tinymdp" is selected by name.
  static TinyMdp default_instance();

 protected:
  EnvSpec& mutable_spec() override { return spec_; }

 private:
  TinyMdp mdp_;
  EnvSpec spec_;
  int s_ = 0;
  int t_ = 0;
  bool done_ = true;
};

/// "cartpole", "reacher" or "tinymdp"; throws ContractViolation otherwise.
std::unique_ptr<Environment> make_env(std::string_view name, int max_episode_len = 0);

bool is_known_env(std::string_view name);

}  // namespace sottac
