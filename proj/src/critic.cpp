#include "sottac/critic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sottac/kernels.hpp"

namespace sottac {

ValueCritic::ValueCritic(std::size_t state_dim, std::size_t hidden, Rng& init_rng)
    : state_dim_(state_dim), hidden_(hidden) {
  if (state_dim == 0 || hidden == 0)
    throw ContractViolation("ValueCritic: state_dim and hidden must be positive");
  omega_.resize(hidden_ * state_dim_ + 2 * hidden_ + 1);
  const double r1 = 1.0 / std::sqrt(static_cast<double>(state_dim_));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
  const std::size_t split = hidden_ * state_dim_ + hidden_;
  for (std::size_t i = 0; i < split; ++i) omega_[i] = init_rng.uniform(-r1, r1);
  for (std::size_t i = split; i < omega_.size(); ++i) omega_[i] = init_rng.uniform(-r2, r2);
}

void ValueCritic::set_params(std::span<const double> omega) {
  if (omega.size() != omega_.size()) throw ContractViolation("ValueCritic: dimension mismatch");
  if (!all_finite(omega)) throw NumericalError("ValueCritic: non-finite parameters");
  omega_.assign(omega.begin(), omega.end());
}

double ValueCritic::forward(std::span<const double> state, std::vector<double>& h) const {
  if (state.size() != state_dim_) throw ContractViolation("ValueCritic: state dimension mismatch");
  const std::span<const double> w(omega_);
  h.resize(hidden_);
  kernels::gemv(w.subspan(0, hidden_ * state_dim_), hidden_, state_dim_, state, h);
  const std::size_t b1 = hidden_ * state_dim_;
  kernels::bias_tanh(w.subspan(b1, hidden_), h);
  const std::size_t w2 = b1 + hidden_;
  return kernels::dot(w.subspan(w2, hidden_), h) + omega_[w2 + hidden_];
}

double ValueCritic::value(std::span<const double> state) const {
  thread_local std::vector<double> h;
  return forward(state, h);
}

void ValueCritic::accumulate_grad_value(std::span<const double> state, double coeff,
                                        std::span<double> out) const {
  std::vector<double> h;
  forward(state, h);
  accumulate_grad_from_hidden(state, h, coeff, out);
}

void ValueCritic::accumulate_grad_from_hidden(std::span<const double> state,
                                              std::span<const double> h, double coeff,
                                              std::span<double> out) const {
  const std::size_t b1 = hidden_ * state_dim_;
  const std::size_t w2 = b1 + hidden_;
  // dV/dw2 = h, dV/db2 = 1, dV/dz1 = w2 * (1 - h^2)
  kernels::axpy(coeff, h, out.subspan(w2, hidden_));
  out[w2 + hidden_] += coeff;
  thread_local std::vector<double> delta;
  delta.resize(hidden_);
  for (std::size_t i = 0; i < hidden_; ++i)
    delta[i] = coeff * omega_[w2 + i] * (1.0 - h[i] * h[i]);
  kernels::ger(1.0, delta, state, out.subspan(0, b1));
  kernels::axpy(1.0, delta, out.subspan(b1, hidden_));
}

ParamVector ValueCritic::grad_value(std::span<const double> state) const {
  ParamVector g(dim(), 0.0);
  accumulate_grad_value(state, 1.0, g);
  return g;
}

namespace {

double weight_sum(std::span<const double> w, std::size_t n) {
  if (w.empty()) return static_cast<double>(n);
  double s = 0.0;
  for (double x : w) s += x;
  return s;
}

// True when transition i + 1 starts at the state transition i ends in, so
// V(s'_i) can be read from the forward pass of transition i + 1.
bool continues(std::span<const Transition> batch, std::size_t i) {
  if (i + 1 >= batch.size() || batch[i].terminal || batch[i].truncated) return false;
  const Transition& a = batch[i];
  const Transition& b = batch[i + 1];
  return b.t == a.t + 1 && std::equal(a.next_state.begin(), a.next_state.end(), b.state.begin(),
                                      b.state.end());
}

// V(s_i) for every transition (hidden activations kept per row) and the
// bootstrap value V(s'_i), zero on terminal transitions.
struct Evaluation {
  std::vector<double> v;
  std::vector<double> v_next;
  std::vector<std::vector<double>> hidden;
};

void evaluate(const ValueCritic& critic, std::span<const Transition> batch, Evaluation& ev) {
  const std::size_t n = batch.size();
  ev.v.resize(n);
  ev.v_next.resize(n);
  ev.hidden.resize(n);
  for (std::size_t i = 0; i < n; ++i) ev.v[i] = critic.forward(batch[i].state, ev.hidden[i]);
  std::vector<double> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    if (batch[i].terminal) ev.v_next[i] = 0.0;
    else if (continues(batch, i)) ev.v_next[i] = ev.v[i + 1];
    else ev.v_next[i] = critic.forward(batch[i].next_state, scratch);
  }
}

}  // namespace

AdvantageBatch td0_targets(const ValueCritic& critic, std::span<const Transition> batch,
                           double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ContractViolation("td0_targets: gamma must be in [0,1)");
  AdvantageBatch out;
  out.advantage.reserve(batch.size());
  out.q_weight.reserve(batch.size());
  out.value.reserve(batch.size());
  out.discount.reserve(batch.size());
  Evaluation ev;
  evaluate(critic, batch, ev);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& tr = batch[i];
    const double v = ev.v[i];
    const double adv = tr.reward + gamma * ev.v_next[i] - v;
    out.advantage.push_back(adv);
    out.q_weight.push_back(adv + v);
    out.value.push_back(v);
    out.discount.push_back(std::pow(gamma, tr.t));
  }
  return out;
}

double td_loss(const ValueCritic& critic, std::span<const Transition> batch, double gamma,
               std::span<const double> sample_weights) {
  if (!sample_weights.empty() && sample_weights.size() != batch.size())
    throw ContractViolation("td_loss: one weight per transition required");
  if (batch.empty()) return 0.0;
  const double total = weight_sum(sample_weights, batch.size());
  Evaluation ev;
  evaluate(critic, batch, ev);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double e = ev.v[i] - (batch[i].reward + gamma * ev.v_next[i]);
    loss += (sample_weights.empty() ? 1.0 : sample_weights[i]) * e * e;
  }
  return total > 0.0 ? loss / total : 0.0;
}

double critic_update(ValueCritic& critic, std::span<const Transition> batch, double gamma,
                     double beta, int n_inner, std::span<const double> sample_weights) {
  if (!(beta > 0.0)) throw ContractViolation("critic_update: beta must be positive");
  if (n_inner < 1) throw ContractViolation("critic_update: n_inner must be >= 1");
  if (!sample_weights.empty() && sample_weights.size() != batch.size())
    throw ContractViolation("critic_update: one weight per transition required");
  if (batch.empty()) return 0.0;

  const ParamVector start(critic.params().begin(), critic.params().end());
  const double total = weight_sum(sample_weights, batch.size());
  if (!(total > 0.0)) return td_loss(critic, batch, gamma, sample_weights);

  ParamVector grad(critic.dim());
  Evaluation ev;
  for (int k = 0; k < n_inner; ++k) {
    std::fill(grad.begin(), grad.end(), 0.0);
    evaluate(critic, batch, ev);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double w = sample_weights.empty() ? 1.0 : sample_weights[i];
      if (w == 0.0) continue;
      const double e = ev.v[i] - (batch[i].reward + gamma * ev.v_next[i]);
      critic.accumulate_grad_from_hidden(batch[i].state, ev.hidden[i], w * e / total, grad);
    }
    ParamVector omega(critic.params().begin(), critic.params().end());
    kernels::axpy(-beta, grad, omega);
    if (!all_finite(omega)) {
      critic.set_params(start);
      std::ostringstream os;
      os << "critic_update: non-finite parameters at inner step " << k << " (gradient "
         << describe_vector(grad) << ")";
      throw NumericalError(os.str());
    }
    critic.set_params(omega);
  }
  const double loss = td_loss(critic, batch, gamma, sample_weights);
  if (!std::isfinite(loss)) {
    critic.set_params(start);
    throw NumericalError("critic_update: non-finite TD loss");
  }
  return loss;
}

}  // namespace sottac
