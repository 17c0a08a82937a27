#include "sottac/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sottac/kernels.hpp"

namespace sottac {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Reinforce: return "reinforce";
    case Method::Natural: return "natural";
    case Method::Acgn1: return "acgn1";
    case Method::Acgn2: return "acgn2";
  }
  return "?";
}

bool is_known_method(std::string_view name) {
  return name == "reinforce" || name == "natural" || name == "acgn1" || name == "acgn2";
}

Method parse_method(std::string_view name) {
  if (name == "reinforce") return Method::Reinforce;
  if (name == "natural") return Method::Natural;
  if (name == "acgn1") return Method::Acgn1;
  if (name == "acgn2") return Method::Acgn2;
  std::ostringstream os;
  os << "unknown method '" << name << "' (expected reinforce, natural, acgn1 or acgn2)";
  throw ContractViolation(os.str());
}

void TrainConfig::validate() const {
  if (!is_known_env(env)) make_env(env);  // throws with a message
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractViolation("config: gamma must be in [0,1)");
  if (episodes_per_batch < 1) throw ContractViolation("config: episodes_per_batch must be >= 1");
  if (total_episodes < 0) throw ContractViolation("config: total_episodes must be >= 0");
  if (total_episodes > 0 && total_episodes < episodes_per_batch)
    throw ContractViolation("config: total_episodes must be >= episodes_per_batch");
  if (!(critic_beta > 0.0) || critic_inner < 1)
    throw ContractViolation("config: critic beta must be positive and n_inner >= 1");
  if (warmup_batches < 0) throw ContractViolation("config: warmup_batches must be >= 0");
  if (threshold_window < 1) throw ContractViolation("config: threshold window must be >= 1");
  if (!(fallback_alpha > 0.0)) throw ContractViolation("config: fallback_alpha must be positive");
  validate_rule(rule());
}

bool TrainConfig::timescales_ordered() const {
  return critic_beta * critic_inner > alpha;
}

UpdateRule TrainConfig::rule() const {
  switch (method) {
    case Method::Reinforce: return VanillaRule{alpha};
    case Method::Natural: return NaturalRule{alpha, damping, cg_iters, cg_tol};
    case Method::Acgn1:
    case Method::Acgn2: {
      NewtonRule r;
      r.kind = method == Method::Acgn1 ? CurvatureKind::Acgn1 : CurvatureKind::Acgn2;
      r.alpha = alpha;
      r.damping = damping;
      r.cg_iters = cg_iters;
      r.cg_tol = cg_tol;
      r.screening = screening;
      r.solver = solver;
      r.fallback_alpha = fallback_alpha;
      r.spectrum_iters = spectrum_iters;
      return r;
    }
  }
  return VanillaRule{alpha};
}

double TrainConfig::effective_reward_shift() const {
  if (reward_shift) return *reward_shift;
  const bool uses_q = weighting == Weighting::Q ||
                      (method == Method::Acgn2 && curvature_weighting == Weighting::Q);
  if (env == "reacher" && uses_q) return PointReacher::nonnegative_shift();
  return 0.0;
}

TrainConfig preset(std::string_view env, Method method) {
  TrainConfig c;
  c.env = std::string(env);
  c.method = method;
  switch (method) {
    case Method::Reinforce:
      c.alpha = 5e-3;
      break;
    case Method::Natural:
      c.alpha = 5e-2;
      c.damping = 1e-3;
      break;
    case Method::Acgn1:
      c.alpha = 5e-2;
      c.damping = 0.1;
      c.curvature_weighting = Weighting::Advantage;
      break;
    case Method::Acgn2:
      c.alpha = 0.2;
      c.damping = 0.1;
      c.curvature_weighting = Weighting::Q;
      break;
  }
  c.fallback_alpha = 5e-3;
  if (env == "reacher") {
    c.threshold = -5.0;
    c.total_episodes = 2000;
    // The Gaussian MLP's log-likelihood Hessian is indefinite; heavier damping
    // keeps the Newton systems positive definite on most batches.
    if (method == Method::Acgn1 || method == Method::Acgn2) c.damping = 10.0;
    // Near-singular systems as sigma shrinks; 0.2 let one step wreck a seed.
    if (method == Method::Acgn2) c.alpha = 0.1;
  } else if (env == "tinymdp") {
    c.threshold = 2.7;  // optimal undiscounted return of the default instance is 2.986
    c.total_episodes = 500;
    c.warmup_batches = 5;
  }
  return c;
}

std::vector<Trajectory> collect_batch(Environment& env, const Policy& policy, int episodes,
                                      Rng& env_rng, Rng& action_rng) {
  if (policy.state_dim() != env.spec().state_dim)
    throw ContractViolation("collect_batch: policy and environment dimensions disagree");
  const double shift = env.spec().reward_shift;
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(std::max(episodes, 0)));
  for (int e = 0; e < episodes; ++e) {
    Trajectory traj;
    std::vector<double> state = env.reset(env_rng);
    for (;;) {
      Action a = policy.sample(state, action_rng);
      const double lp = policy.log_prob(state, a);
      Transition tr = env.step(a, env_rng);
      tr.log_prob = lp;
      traj.episode_return += tr.reward - shift;
      const bool done = tr.terminal || tr.truncated;
      state = tr.next_state;
      traj.steps.push_back(std::move(tr));
      if (done) break;
    }
    out.push_back(std::move(traj));
  }
  return out;
}

std::optional<int> episodes_to_threshold(std::span<const double> returns, double threshold,
                                         int window) {
  if (window < 1) throw ContractViolation("episodes_to_threshold: window must be >= 1");
  const std::size_t w = static_cast<std::size_t>(window);
  double sum = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    sum += returns[i];
    if (i >= w) sum -= returns[i - w];
    if (i + 1 >= w && sum / static_cast<double>(w) >= threshold) return static_cast<int>(i);
  }
  return std::nullopt;
}

double tail_mean(std::span<const double> values, std::size_t n) {
  if (values.empty()) return 0.0;
  const std::size_t k = std::min(n, values.size());
  double s = 0.0;
  for (std::size_t i = values.size() - k; i < values.size(); ++i) s += values[i];
  return s / static_cast<double>(k);
}

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t elapsed_ns(Clock::time_point since) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - since).count();
}

void normalize(std::vector<double>& w) {
  if (w.size() < 2) return;
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  double var = 0.0;
  for (double x : w) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(w.size()));
  for (double& x : w) x = (x - mean) / (sd + 1e-8);
}

}  // namespace

ActorStep actor_step(const TrainConfig& config, const Policy& policy, const ValueCritic& critic,
                     std::span<const Transition> transitions, Rng& diag_rng) {
  const AdvantageBatch adv = td0_targets(critic, transitions, config.gamma);
  std::vector<double> grad_weights =
      config.weighting == Weighting::Q ? adv.q_weight : adv.advantage;
  if (config.normalize_advantages) normalize(grad_weights);

  ActorStep step{SampleBatch(critic.state_dim()), {}, nullptr};
  SampleBatch& batch = step.batch;
  for (const auto& tr : transitions) batch.add(tr.state, tr.action);
  batch.set_uniform_measure();
  if (config.occupancy_weighting)
    for (std::size_t i = 0; i < batch.size(); ++i) batch.measure[i] *= adv.discount[i];

  const ParamVector g = policy_gradient(batch, policy, grad_weights);

  auto& op = step.op;
  if (config.method == Method::Natural) {
    op = std::make_unique<CurvatureOperator>(CurvatureKind::Fisher, policy, batch,
                                             std::vector<double>{}, config.damping);
  } else if (config.method == Method::Acgn1) {
    op = std::make_unique<CurvatureOperator>(CurvatureKind::Acgn1, policy, batch, grad_weights,
                                             config.damping);
  } else if (config.method == Method::Acgn2) {
    std::vector<double> w;
    switch (config.curvature_weighting) {
      case Weighting::Q:
        w = adv.q_weight;
        if (config.clamp_q_weights)
          for (double& x : w) x = std::max(x, 0.0);
        break;
      case Weighting::Advantage: w = grad_weights; break;
      case Weighting::Unit: w.assign(batch.size(), 1.0); break;
    }
    op = std::make_unique<CurvatureOperator>(CurvatureKind::Acgn2, policy, batch, std::move(w),
                                             config.damping);
  }
  step.dir = solve_direction(config.rule(), op.get(), g, &diag_rng);
  return step;
}

RunResult train(const TrainConfig& config) { return train(config, nullptr); }

RunResult train(const TrainConfig& config, const BatchObserver& observer) {
  config.validate();
  const auto run_start = Clock::now();
  RunResult result;

  Rng env_rng = Rng::derive(config.seed, Stream::Environment);
  Rng action_rng = Rng::derive(config.seed, Stream::Action);
  Rng init_rng = Rng::derive(config.seed, Stream::Init);
  Rng diag_rng = Rng::derive(config.seed, Stream::Diagnostics);

  auto env = make_env(config.env, config.max_episode_len);
  env->set_reward_shift(config.effective_reward_shift());
  auto policy = make_policy(env->spec(), init_rng, config.policy_hidden);
  ValueCritic critic(env->spec().state_dim, config.critic_hidden, init_rng);
  double L_hat = 0.0;

  int episodes_done = 0;
  int batch_index = 0;
  try {
    while (episodes_done < config.total_episodes) {
      const int n = std::min(config.episodes_per_batch, config.total_episodes - episodes_done);
      auto trajectories = collect_batch(*env, *policy, n, env_rng, action_rng);

      BatchRecord rec;
      rec.first_episode = episodes_done;
      rec.episodes = n;
      std::vector<Transition> transitions;
      for (auto& traj : trajectories) {
        result.returns.push_back(traj.episode_return);
        result.episode_batch.push_back(batch_index);
        for (auto& tr : traj.steps) transitions.push_back(std::move(tr));
      }
      rec.transitions = transitions.size();
      episodes_done += n;

      // Fast timescale first.
      rec.critic_loss =
          critic_update(critic, transitions, config.gamma, config.critic_beta, config.critic_inner);
      rec.critic_steps = config.critic_inner;

      if (batch_index >= config.warmup_batches) {
        if (observer) observer(*policy, critic, transitions);
        const auto update_start = Clock::now();
        ActorStep step = actor_step(config, *policy, critic, transitions, diag_rng);
        Direction& dir = step.dir;
        const auto& op = step.op;
        double alpha = dir.report.alpha_used;
        if (op && dir.report.m_hat > 0.0) {
          const double lambda = op->damping();
          L_hat = std::max({L_hat, std::abs(lambda - dir.report.m_hat),
                            std::abs(lambda - dir.report.M_hat)});
          if (L_hat > 0.0) {
            dir.report.step_bound_alpha =
                step_size_bound({dir.report.m_hat, dir.report.M_hat, 0, true}, L_hat);
            if (config.enforce_step_bound && !dir.report.fallback_used)
              alpha = std::min(alpha, 0.99 * dir.report.step_bound_alpha);
          }
        }
        dir.report.alpha_used = alpha;
        policy->set_params(apply_update(*policy, dir.d, alpha));
        rec.actor_updated = true;
        rec.report = dir.report;
        rec.update_wall_ns = std::max<std::int64_t>(1, elapsed_ns(update_start));
        if (op) result.curvature_products += op->product_count();

        if (config.h12_every > 0 && (batch_index - config.warmup_batches) % config.h12_every == 0) {
          auto refit = importance_weighted_refit(critic, transitions, *policy, config.gamma,
                                                 config.critic_beta, config.critic_inner);
          rec.h12 = h12_diagnostic(step.batch, *policy, critic, policy->params(), refit, diag_rng);
        }
      }
      result.batches.push_back(std::move(rec));
      ++batch_index;
    }
  } catch (const NumericalError& e) {
    result.aborted = true;
    std::ostringstream os;
    os << "numerical failure in batch " << batch_index << " after " << episodes_done
       << " episodes: " << e.what();
    result.failure = os.str();
  }

  result.final_mean = tail_mean(result.returns, 50);
  result.episodes_to_threshold =
      episodes_to_threshold(result.returns, config.threshold, config.threshold_window);
  result.final_theta.assign(policy->params().begin(), policy->params().end());
  result.final_omega.assign(critic.params().begin(), critic.params().end());
  result.total_wall_ns = elapsed_ns(run_start);
  return result;
}

std::vector<MatchedCost> matched_update_costs(const TrainConfig& driver,
                                              std::span<const TrainConfig> timed, int repeats) {
  if (repeats < 1) throw ContractViolation("matched_update_costs: repeats must be >= 1");
  for (const auto& c : timed) {
    c.validate();
    if (c.env != driver.env) throw ContractViolation("matched_update_costs: env mismatch");
  }
  std::vector<MatchedCost> out(timed.size());
  for (std::size_t k = 0; k < timed.size(); ++k) out[k].method = timed[k].method;

  std::size_t batch_no = 0;
  std::vector<std::int64_t> samples(static_cast<std::size_t>(repeats));
  auto observer = [&](const Policy& policy, const ValueCritic& critic,
                      std::span<const Transition> transitions) {
    // Rotate the order so no method always runs on a cold cache.
    for (std::size_t j = 0; j < timed.size(); ++j) {
      const std::size_t k = (j + batch_no) % timed.size();
      for (int r = 0; r < repeats; ++r) {
        Rng rng = Rng::derive(driver.seed + batch_no, Stream::Diagnostics);
        const auto start = Clock::now();
        ActorStep step = actor_step(timed[k], policy, critic, transitions, rng);
        samples[static_cast<std::size_t>(r)] = std::max<std::int64_t>(1, elapsed_ns(start));
        if (!all_finite(step.dir.d)) throw NumericalError("matched_update_costs: non-finite step");
      }
      std::nth_element(samples.begin(), samples.begin() + repeats / 2, samples.end());
      out[k].step_ns.push_back(samples[static_cast<std::size_t>(repeats / 2)]);
    }
    ++batch_no;
  };
  const RunResult r = train(driver, observer);
  if (r.aborted) throw NumericalError("matched_update_costs: driver run failed: " + r.failure);
  return out;
}

}  // namespace sottac
