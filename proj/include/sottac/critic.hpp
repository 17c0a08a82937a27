#pragma once

#include <span>
#include <vector>

#include "sottac/common.hpp"
#include "sottac/env.hpp"
#include "sottac/rng.hpp"

namespace sottac {

/// State-value network V(s; omega) = w2 . tanh(W1 s + b1) + b2.
///
/// Parameter layout: W1 (hidden x state_dim), b1 (hidden), w2 (hidden), b2.
class ValueCritic {
 public:
  ValueCritic(std::size_t state_dim, std::size_t hidden, Rng& init_rng);

  std::size_t dim() const { return omega_.size(); }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t hidden() const { return hidden_; }
  std::span<const double> params() const { return omega_; }
  void set_params(std::span<const double> omega);

  double value(std::span<const double> state) const;
  /// out += coeff * grad_omega V(state)
  void accumulate_grad_value(std::span<const double> state, double coeff,
                             std::span<double> out) const;
  ParamVector grad_value(std::span<const double> state) const;

  /// V(state), leaving the hidden activations in `hidden` for a later
  /// accumulate_grad_from_hidden on the same state.
  double forward(std::span<const double> state, std::vector<double>& hidden) const;
  void accumulate_grad_from_hidden(std::span<const double> state,
                                   std::span<const double> hidden, double coeff,
                                   std::span<double> out) const;

 private:

  std::size_t state_dim_;
  std::size_t hidden_;
  ParamVector omega_;
};

/// TD(0) quantities for a batch, computed from one frozen critic snapshot.
struct AdvantageBatch {
  std::vector<double> advantage;  // r + gamma (1 - terminal) V(s') - V(s)
  std::vector<double> q_weight;   // advantage + V(s)
  std::vector<double> value;      // V(s)
  std::vector<double> discount;   // gamma^t
};

AdvantageBatch td0_targets(const ValueCritic& critic, std::span<const Transition> batch,
                           double gamma);

/// n_inner semi-gradient steps on 1/2 mean_t (V(s_t) - y_t)^2, with
/// y_t = r_t + gamma (1 - terminal_t) V(s_{t+1}) recomputed from the pre-step
/// parameters each step. Optional nonnegative per-sample weights turn the mean
/// into a weighted mean. Returns the mean squared TD error after the last step.
/// Throws NumericalError (critic left unchanged) if the loss becomes non-finite.
double critic_update(ValueCritic& critic, std::span<const Transition> batch, double gamma,
                     double beta, int n_inner, std::span<const double> sample_weights = {});

/// Mean squared TD error at the current parameters.
double td_loss(const ValueCritic& critic, std::span<const Transition> batch, double gamma,
               std::span<const double> sample_weights = {});

}  // namespace sottac
