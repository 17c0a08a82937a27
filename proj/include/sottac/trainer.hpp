#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sottac/critic.hpp"
#include "sottac/curvature.hpp"
#include "sottac/env.hpp"
#include "sottac/optim.hpp"
#include "sottac/policy.hpp"

namespace sottac {

enum class Method { Reinforce, Natural, Acgn1, Acgn2 };

std::string_view to_string(Method m);
/// Throws ContractViolation for unknown names.
Method parse_method(std::string_view name);
bool is_known_method(std::string_view name);

struct TrainConfig {
  std::string env = "cartpole";
  Method method = Method::Acgn2;
  std::uint64_t seed = 42;
  double gamma = 0.99;
  int episodes_per_batch = 5;
  int total_episodes = 3000;
  int max_episode_len = 0;  // 0: environment default

  // Actor.
  double alpha = 0.2;
  double damping = 0.1;
  int cg_iters = 10;
  double cg_tol = 1e-6;
  bool screening = true;
  Solver solver = Solver::Cg;
  double fallback_alpha = 5e-3;
  int spectrum_iters = 20;
  std::size_t policy_hidden = 32;
  /// Weights in the policy gradient.
  Weighting weighting = Weighting::Advantage;
  /// Weights in the ACGN2 intrinsic curvature. ACGN1 always uses the gradient
  /// weights; Fisher uses none.
  Weighting curvature_weighting = Weighting::Q;
  /// Floor Q curvature weights at zero so the intrinsic term stays NSD.
  bool clamp_q_weights = true;
  /// Expectation measure gamma^t / N instead of 1 / N.
  bool occupancy_weighting = false;
  bool normalize_advantages = false;

  // Critic.
  double critic_beta = 5e-2;
  int critic_inner = 10;
  int warmup_batches = 20;
  std::size_t critic_hidden = 64;

  /// Per-step reward shift; unset means automatic (reacher with any Q weighting).
  std::optional<double> reward_shift;

  // Diagnostics.
  int h12_every = 0;  // batches between H12 diagnostics; 0 disables
  bool enforce_step_bound = false;

  // Reporting.
  double threshold = 450.0;
  int threshold_window = 50;

  /// Throws ContractViolation on invalid settings.
  void validate() const;
  /// True when the critic's effective step beta * n_inner exceeds alpha.
  bool timescales_ordered() const;
  /// Actor update rule implied by method and the actor fields.
  UpdateRule rule() const;
  /// Reward shift actually applied.
  double effective_reward_shift() const;
};

/// Defaults for one (env, method) pair.
TrainConfig preset(std::string_view env, Method method);

struct Trajectory {
  std::vector<Transition> steps;
  double episode_return = 0.0;  // sum of unshifted rewards
};

/// Runs `episodes` full episodes (terminated or truncated at H), recording
/// the sampling-time log-probability on each transition.
std::vector<Trajectory> collect_batch(Environment& env, const Policy& policy, int episodes,
                                      Rng& env_rng, Rng& action_rng);

struct BatchRecord {
  int first_episode = 0;
  int episodes = 0;
  std::size_t transitions = 0;
  double critic_loss = 0.0;
  int critic_steps = 0;
  bool actor_updated = false;
  UpdateReport report;
  /// Gradient, operator construction and solve for the actor step.
  std::int64_t update_wall_ns = 0;
  std::optional<H12Diagnostic> h12;
};

struct RunResult {
  std::vector<double> returns;  // per episode
  std::vector<BatchRecord> batches;
  std::vector<int> episode_batch;  // batch index of each episode
  double final_mean = 0.0;         // mean return of the final 50 episodes
  std::optional<int> episodes_to_threshold;
  std::int64_t total_wall_ns = 0;
  bool aborted = false;
  std::string failure;
  ParamVector final_theta;
  ParamVector final_omega;
  std::size_t curvature_products = 0;
};

/// Two-timescale loop: collect, critic steps, frozen-critic TD(0) weights,
/// gradient, curvature operator, direction, actor step. Deterministic given
/// the config. A numerical failure ends the run with aborted = true and the
/// prefix of results gathered so far.
RunResult train(const TrainConfig& config);

/// Called once per actor update with the state the update will see.
using BatchObserver = std::function<void(const Policy&, const ValueCritic&,
                                         std::span<const Transition>)>;
RunResult train(const TrainConfig& config, const BatchObserver& observer);

struct ActorStep {
  SampleBatch batch;
  Direction dir;
  std::unique_ptr<CurvatureOperator> op;  // null for REINFORCE
};

/// Frozen-critic TD(0) weights, gradient, curvature operator and direction
/// for one batch. Step-size capping is left to the caller.
ActorStep actor_step(const TrainConfig& config, const Policy& policy, const ValueCritic& critic,
                     std::span<const Transition> transitions, Rng& diag_rng);

struct MatchedCost {
  Method method = Method::Reinforce;
  std::vector<std::int64_t> step_ns;  // median of repeats, one per actor update
};

/// Per-update cost of each timed config on identical batches: a driver run
/// generates the batches and every timed config computes its actor step on
/// the same (policy, critic, batch) triple.
std::vector<MatchedCost> matched_update_costs(const TrainConfig& driver,
                                              std::span<const TrainConfig> timed, int repeats = 3);

/// First episode index whose trailing-window mean reaches threshold.
std::optional<int> episodes_to_threshold(std::span<const double> returns, double threshold,
                                         int window);

/// Mean of the last n entries (all entries if fewer).
double tail_mean(std::span<const double> values, std::size_t n);

}  // namespace sottac
