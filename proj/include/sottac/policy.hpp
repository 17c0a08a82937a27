#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "sottac/common.hpp"
#include "sottac/env.hpp"
#include "sottac/rng.hpp"

namespace sottac {

/// State-action samples with an expectation measure. For an empirical batch
/// the measure is uniform (1/N); exact expectations on small MDPs put the
/// discounted occupancy of each (t, s, a) there instead.
struct SampleBatch {
  std::size_t state_dim = 0;
  std::vector<double> states;  // size() x state_dim, row-major
  std::vector<Action> actions;
  std::vector<double> measure;

  explicit SampleBatch(std::size_t dim = 0) : state_dim(dim) {}

  std::size_t size() const { return actions.size(); }
  bool empty() const { return actions.empty(); }
  std::span<const double> state(std::size_t i) const {
    return {states.data() + i * state_dim, state_dim};
  }
  void add(std::span<const double> s, Action a, double m = 1.0);
  /// measure_i = 1/N.
  void set_uniform_measure();
};

/// L(theta) = sum_i coeffs[i] * log pi_theta(a_i | s_i), coefficients held
/// constant in theta.
struct WeightedLogProbFunctional {
  const SampleBatch& batch;
  std::span<const double> coeffs;
};

class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string_view kind() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::span<const double> params() const = 0;
  /// Throws NumericalError on non-finite input.
  virtual void set_params(std::span<const double> theta) = 0;

  /// Draws an action. Continuous draws are returned unclipped; environments
  /// clip, and log_prob refers to the unclipped draw.
  virtual Action sample(std::span<const double> state, Rng& rng) const = 0;
  virtual double log_prob(std::span<const double> state, const Action& action) const = 0;
  /// out += coeff * grad_theta log pi(action | state)
  virtual void accumulate_grad_log_prob(std::span<const double> state, const Action& action,
                                        double coeff, std::span<double> out) const = 0;
  /// [sum_i c_i grad^2 log pi(a_i|s_i)] v
  virtual ParamVector hvp_weighted_logprob(const WeightedLogProbFunctional& functional,
                                           std::span<const double> v) const = 0;
  virtual std::unique_ptr<Policy> clone() const = 0;

  ParamVector grad_log_prob(std::span<const double> state, const Action& action) const;
  /// grad L for the functional.
  ParamVector grad_weighted_logprob(const WeightedLogProbFunctional& functional) const;
};

/// Linear softmax policy with block one-hot features: phi(s, a) places the
/// state vector in block a of a state_dim * n_actions vector, so the logit of
/// action a is theta_a . s.
class SoftmaxLinearPolicy final : public Policy {
 public:
  SoftmaxLinearPolicy(std::size_t state_dim, int n_actions);

  std::string_view kind() const override { return "softmax"; }
  std::size_t dim() const override { return theta_.size(); }
  std::size_t state_dim() const override { return state_dim_; }
  int n_actions() const { return n_actions_; }
  std::span<const double> params() const override { return theta_; }
  void set_params(std::span<const double> theta) override;

  Action sample(std::span<const double> state, Rng& rng) const override;
  double log_prob(std::span<const double> state, const Action& action) const override;
  void accumulate_grad_log_prob(std::span<const double> state, const Action& action, double coeff,
                                std::span<double> out) const override;
  ParamVector hvp_weighted_logprob(const WeightedLogProbFunctional& functional,
                                   std::span<const double> v) const override;
  std::unique_ptr<Policy> clone() const override;

  std::vector<double> probabilities(std::span<const double> state) const;
  /// pi(. | s) for explicit parameters.
  static void probabilities(std::span<const double> theta, std::span<const double> state,
                            int n_actions, std::span<double> out);

 private:
  std::size_t state_dim_;
  int n_actions_;
  ParamVector theta_;
};

/// Gaussian policy with a one-hidden-layer tanh network for the mean and a
/// state-independent learned log standard deviation.
///
///   mu(s)    = center + half_range * tanh(W2 tanh(W1 s + b1) + b2)
///   sigma_j  = clamp(exp(log_std_j), sigma_min, sigma_max)
///
/// Parameter layout: W1 (hidden x state_dim), b1, W2 (action_dim x hidden),
/// b2, log_std. Hessian products use central differences of the exact
/// gradient along v.
class GaussianMlpPolicy final : public Policy {
 public:
  struct Options {
    std::size_t hidden = 32;
    double sigma_min = 1e-2;
    double sigma_max = 1.0;
    double init_log_std = -0.69314718055994530942;  // log 0.5
  };

  GaussianMlpPolicy(std::size_t state_dim, const ContinuousActions& actions, Rng& init_rng,
                    Options options);
  GaussianMlpPolicy(std::size_t state_dim, const ContinuousActions& actions, Rng& init_rng)
      : GaussianMlpPolicy(state_dim, actions, init_rng, Options{}) {}

  std::string_view kind() const override { return "gaussian"; }
  std::size_t dim() const override { return theta_.size(); }
  std::size_t state_dim() const override { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  std::span<const double> params() const override { return theta_; }
  void set_params(std::span<const double> theta) override;
  const Options& options() const { return opt_; }

  Action sample(std::span<const double> state, Rng& rng) const override;
  double log_prob(std::span<const double> state, const Action& action) const override;
  void accumulate_grad_log_prob(std::span<const double> state, const Action& action, double coeff,
                                std::span<double> out) const override;
  ParamVector hvp_weighted_logprob(const WeightedLogProbFunctional& functional,
                                   std::span<const double> v) const override;
  std::unique_ptr<Policy> clone() const override;

  std::vector<double> mean(std::span<const double> state) const;
  std::vector<double> stddev() const;

 private:
  struct Layout {
    std::size_t w1, b1, w2, b2, log_std, total;
  };
  struct Forward {
    std::vector<double> hidden;  // tanh activations
    std::vector<double> out;     // tanh(z2)
    std::vector<double> mu;
  };

  Forward forward(std::span<const double> theta, std::span<const double> state) const;
  double sigma(std::span<const double> theta, std::size_t j) const;
  double log_prob_at(std::span<const double> theta, std::span<const double> state,
                     const std::vector<double>& a) const;
  void accumulate_grad_at(std::span<const double> theta, std::span<const double> state,
                          const std::vector<double>& a, double coeff,
                          std::span<double> out) const;
  void check_action(const Action& action) const;

  std::size_t state_dim_;
  std::size_t action_dim_;
  double center_;
  double half_range_;
  Options opt_;
  Layout layout_;
  ParamVector theta_;
};

/// Softmax for discrete action spaces, Gaussian MLP for continuous ones.
std::unique_ptr<Policy> make_policy(const EnvSpec& spec, Rng& init_rng, std::size_t hidden = 32);

}  // namespace sottac
