#include "sottac/policy.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sottac/kernels.hpp"

namespace sottac {

void SampleBatch::add(std::span<const double> s, Action a, double m) {
  if (s.size() != state_dim) throw ContractViolation("SampleBatch::add: state dimension mismatch");
  states.insert(states.end(), s.begin(), s.end());
  actions.push_back(std::move(a));
  measure.push_back(m);
}

void SampleBatch::set_uniform_measure() {
  const double w = actions.empty() ? 0.0 : 1.0 / static_cast<double>(actions.size());
  measure.assign(actions.size(), w);
}

ParamVector Policy::grad_log_prob(std::span<const double> state, const Action& action) const {
  ParamVector g(dim(), 0.0);
  accumulate_grad_log_prob(state, action, 1.0, g);
  return g;
}

ParamVector Policy::grad_weighted_logprob(const WeightedLogProbFunctional& f) const {
  ParamVector g(dim(), 0.0);
  for (std::size_t i = 0; i < f.batch.size(); ++i) {
    if (f.coeffs[i] == 0.0) continue;
    accumulate_grad_log_prob(f.batch.state(i), f.batch.actions[i], f.coeffs[i], g);
  }
  return g;
}

namespace {

void require_finite_params(std::span<const double> theta, std::string_view who) {
  if (!all_finite(theta)) {
    std::ostringstream os;
    os << who << ": non-finite parameters (" << describe_vector(theta) << ")";
    throw NumericalError(os.str());
  }
}

}  // namespace

// ------------------------------------------------------------------ softmax

SoftmaxLinearPolicy::SoftmaxLinearPolicy(std::size_t state_dim, int n_actions)
    : state_dim_(state_dim), n_actions_(n_actions),
      theta_(state_dim * static_cast<std::size_t>(n_actions), 0.0) {
  if (state_dim == 0 || n_actions < 1)
    throw ContractViolation("SoftmaxLinearPolicy: need state_dim > 0 and n_actions >= 1");
}

void SoftmaxLinearPolicy::set_params(std::span<const double> theta) {
  if (theta.size() != theta_.size())
    throw ContractViolation("SoftmaxLinearPolicy::set_params: dimension mismatch");
  require_finite_params(theta, "SoftmaxLinearPolicy::set_params");
  theta_.assign(theta.begin(), theta.end());
}

void SoftmaxLinearPolicy::probabilities(std::span<const double> theta,
                                        std::span<const double> state, int n_actions,
                                        std::span<double> out) {
  const std::size_t k = state.size();
  double hi = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < n_actions; ++a) {
    out[a] = kernels::dot(theta.subspan(a * k, k), state);
    hi = std::max(hi, out[a]);
  }
  if (!std::isfinite(hi)) {
    std::ostringstream os;
    os << "softmax logits are not finite (theta " << describe_vector(theta) << ")";
    throw NumericalError(os.str());
  }
  double z = 0.0;
  for (int a = 0; a < n_actions; ++a) {
    out[a] = std::exp(out[a] - hi);
    z += out[a];
  }
  for (int a = 0; a < n_actions; ++a) out[a] /= z;
}

std::vector<double> SoftmaxLinearPolicy::probabilities(std::span<const double> state) const {
  if (state.size() != state_dim_) throw ContractViolation("softmax: state dimension mismatch");
  std::vector<double> p(n_actions_);
  probabilities(theta_, state, n_actions_, p);
  return p;
}

Action SoftmaxLinearPolicy::sample(std::span<const double> state, Rng& rng) const {
  const auto p = probabilities(state);
  return static_cast<int>(rng.categorical(p));
}

double SoftmaxLinearPolicy::log_prob(std::span<const double> state, const Action& action) const {
  if (!is_discrete(action) || discrete_action(action) < 0 || discrete_action(action) >= n_actions_)
    throw ContractViolation("softmax: action outside the support");
  if (state.size() != state_dim_) throw ContractViolation("softmax: state dimension mismatch");
  const std::size_t k = state_dim_;
  std::vector<double> logits(n_actions_);
  double hi = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < n_actions_; ++a) {
    logits[a] = kernels::dot(std::span<const double>(theta_).subspan(a * k, k), state);
    hi = std::max(hi, logits[a]);
  }
  double z = 0.0;
  for (double l : logits) z += std::exp(l - hi);
  return logits[discrete_action(action)] - hi - std::log(z);
}

void SoftmaxLinearPolicy::accumulate_grad_log_prob(std::span<const double> state,
                                                   const Action& action, double coeff,
                                                   std::span<double> out) const {
  if (!is_discrete(action) || discrete_action(action) < 0 || discrete_action(action) >= n_actions_)
    throw ContractViolation("softmax: action outside the support");
  const auto p = probabilities(state);
  const int chosen = discrete_action(action);
  const std::size_t k = state_dim_;
  for (int b = 0; b < n_actions_; ++b) {
    const double c = coeff * ((b == chosen ? 1.0 : 0.0) - p[b]);
    kernels::axpy(c, state, out.subspan(b * k, k));
  }
}

ParamVector SoftmaxLinearPolicy::hvp_weighted_logprob(const WeightedLogProbFunctional& f,
                                                      std::span<const double> v) const {
  if (v.size() != dim()) throw ContractViolation("softmax HVP: vector dimension mismatch");
  // grad^2 log pi(a|s) = -(diag(p) - p p^T) (x) s s^T, independent of a.
  const std::size_t k = state_dim_;
  ParamVector out(dim(), 0.0);
  std::vector<double> p(n_actions_), u(n_actions_);
  for (std::size_t i = 0; i < f.batch.size(); ++i) {
    const double c = f.coeffs[i];
    if (c == 0.0) continue;
    const auto s = f.batch.state(i);
    probabilities(theta_, s, n_actions_, p);
    double ubar = 0.0;
    for (int b = 0; b < n_actions_; ++b) {
      u[b] = kernels::dot(v.subspan(b * k, k), s);
      ubar += p[b] * u[b];
    }
    for (int b = 0; b < n_actions_; ++b)
      kernels::axpy(-c * p[b] * (u[b] - ubar), s, std::span<double>(out).subspan(b * k, k));
  }
  if (!all_finite(out)) throw NumericalError("softmax HVP produced non-finite values");
  return out;
}

std::unique_ptr<Policy> SoftmaxLinearPolicy::clone() const {
  return std::make_unique<SoftmaxLinearPolicy>(*this);
}

// ----------------------------------------------------------------- gaussian

GaussianMlpPolicy::GaussianMlpPolicy(std::size_t state_dim, const ContinuousActions& actions,
                                     Rng& init_rng, Options options)
    : state_dim_(state_dim), action_dim_(static_cast<std::size_t>(actions.dim)),
      center_(0.5 * (actions.low + actions.high)), half_range_(0.5 * (actions.high - actions.low)),
      opt_(options) {
  if (state_dim == 0 || actions.dim < 1 || !(actions.low < actions.high) || opt_.hidden == 0)
    throw ContractViolation("GaussianMlpPolicy: invalid dimensions or action bounds");
  if (!(opt_.sigma_min > 0.0 && opt_.sigma_min <= opt_.sigma_max))
    throw ContractViolation("GaussianMlpPolicy: need 0 < sigma_min <= sigma_max");
  const std::size_t h = opt_.hidden;
  layout_.w1 = 0;
  layout_.b1 = layout_.w1 + h * state_dim_;
  layout_.w2 = layout_.b1 + h;
  layout_.b2 = layout_.w2 + action_dim_ * h;
  layout_.log_std = layout_.b2 + action_dim_;
  layout_.total = layout_.log_std + action_dim_;
  theta_.assign(layout_.total, 0.0);

  const double r1 = 1.0 / std::sqrt(static_cast<double>(state_dim_));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(h));
  for (std::size_t i = layout_.w1; i < layout_.w2; ++i) theta_[i] = init_rng.uniform(-r1, r1);
  for (std::size_t i = layout_.w2; i < layout_.log_std; ++i) theta_[i] = init_rng.uniform(-r2, r2);
  for (std::size_t i = layout_.log_std; i < layout_.total; ++i) theta_[i] = opt_.init_log_std;
}

void GaussianMlpPolicy::set_params(std::span<const double> theta) {
  if (theta.size() != theta_.size())
    throw ContractViolation("GaussianMlpPolicy::set_params: dimension mismatch");
  require_finite_params(theta, "GaussianMlpPolicy::set_params");
  theta_.assign(theta.begin(), theta.end());
}

double GaussianMlpPolicy::sigma(std::span<const double> theta, std::size_t j) const {
  return std::clamp(std::exp(theta[layout_.log_std + j]), opt_.sigma_min, opt_.sigma_max);
}

GaussianMlpPolicy::Forward GaussianMlpPolicy::forward(std::span<const double> theta,
                                                      std::span<const double> state) const {
  if (state.size() != state_dim_) throw ContractViolation("gaussian: state dimension mismatch");
  const std::size_t h = opt_.hidden;
  Forward f;
  f.hidden.resize(h);
  kernels::gemv(theta.subspan(layout_.w1, h * state_dim_), h, state_dim_, state, f.hidden);
  kernels::bias_tanh(theta.subspan(layout_.b1, h), f.hidden);
  f.out.resize(action_dim_);
  kernels::gemv(theta.subspan(layout_.w2, action_dim_ * h), action_dim_, h, f.hidden, f.out);
  f.mu.resize(action_dim_);
  for (std::size_t j = 0; j < action_dim_; ++j) {
    f.out[j] = std::tanh(f.out[j] + theta[layout_.b2 + j]);
    f.mu[j] = center_ + half_range_ * f.out[j];
  }
  return f;
}

std::vector<double> GaussianMlpPolicy::mean(std::span<const double> state) const {
  return forward(theta_, state).mu;
}

std::vector<double> GaussianMlpPolicy::stddev() const {
  std::vector<double> s(action_dim_);
  for (std::size_t j = 0; j < action_dim_; ++j) s[j] = sigma(theta_, j);
  return s;
}

void GaussianMlpPolicy::check_action(const Action& action) const {
  if (is_discrete(action) || continuous_action(action).size() != action_dim_)
    throw ContractViolation("gaussian: action must be a vector of the action dimension");
}

Action GaussianMlpPolicy::sample(std::span<const double> state, Rng& rng) const {
  const auto f = forward(theta_, state);
  std::vector<double> a(action_dim_);
  for (std::size_t j = 0; j < action_dim_; ++j) a[j] = f.mu[j] + sigma(theta_, j) * rng.normal();
  if (!all_finite(a)) {
    std::ostringstream os;
    os << "gaussian: non-finite mean (theta " << describe_vector(theta_) << ")";
    throw NumericalError(os.str());
  }
  return a;
}

double GaussianMlpPolicy::log_prob_at(std::span<const double> theta,
                                      std::span<const double> state,
                                      const std::vector<double>& a) const {
  const auto f = forward(theta, state);
  double lp = 0.0;
  for (std::size_t j = 0; j < action_dim_; ++j) {
    const double sd = sigma(theta, j);
    const double z = (a[j] - f.mu[j]) / sd;
    lp += -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

double GaussianMlpPolicy::log_prob(std::span<const double> state, const Action& action) const {
  check_action(action);
  return log_prob_at(theta_, state, continuous_action(action));
}

void GaussianMlpPolicy::accumulate_grad_at(std::span<const double> theta,
                                           std::span<const double> state,
                                           const std::vector<double>& a, double coeff,
                                           std::span<double> out) const {
  const std::size_t h = opt_.hidden;
  const auto f = forward(theta, state);
  std::vector<double> delta2(action_dim_);
  for (std::size_t j = 0; j < action_dim_; ++j) {
    const double sd = sigma(theta, j);
    const double resid = a[j] - f.mu[j];
    const double dmu = resid / (sd * sd);
    delta2[j] = coeff * dmu * half_range_ * (1.0 - f.out[j] * f.out[j]);
    const double raw = std::exp(theta[layout_.log_std + j]);
    if (raw > opt_.sigma_min && raw < opt_.sigma_max)
      out[layout_.log_std + j] += coeff * (resid * resid / (sd * sd) - 1.0);
  }
  kernels::ger(1.0, delta2, f.hidden, out.subspan(layout_.w2, action_dim_ * h));
  kernels::axpy(1.0, delta2, out.subspan(layout_.b2, action_dim_));
  std::vector<double> delta1(h, 0.0);
  kernels::gemv_t(theta.subspan(layout_.w2, action_dim_ * h), action_dim_, h, delta2, delta1);
  for (std::size_t i = 0; i < h; ++i) delta1[i] *= 1.0 - f.hidden[i] * f.hidden[i];
  kernels::ger(1.0, delta1, state, out.subspan(layout_.w1, h * state_dim_));
  kernels::axpy(1.0, delta1, out.subspan(layout_.b1, h));
}

void GaussianMlpPolicy::accumulate_grad_log_prob(std::span<const double> state,
                                                 const Action& action, double coeff,
                                                 std::span<double> out) const {
  check_action(action);
  accumulate_grad_at(theta_, state, continuous_action(action), coeff, out);
}

ParamVector GaussianMlpPolicy::hvp_weighted_logprob(const WeightedLogProbFunctional& f,
                                                    std::span<const double> v) const {
  if (v.size() != dim()) throw ContractViolation("gaussian HVP: vector dimension mismatch");
  ParamVector out(dim(), 0.0);
  const double vnorm = kernels::norm2(v);
  if (vnorm == 0.0) return out;

  double theta_inf = 0.0;
  for (double t : theta_) theta_inf = std::max(theta_inf, std::abs(t));
  const double eps = 1e-5 * (1.0 + theta_inf);

  // Step along the unit direction; the product is rescaled by |v| afterwards.
  ParamVector plus(theta_), minus(theta_);
  kernels::axpy(eps / vnorm, v, plus);
  kernels::axpy(-eps / vnorm, v, minus);
  ParamVector g_minus(dim(), 0.0);
  for (std::size_t i = 0; i < f.batch.size(); ++i) {
    const double c = f.coeffs[i];
    if (c == 0.0) continue;
    const auto& a = continuous_action(f.batch.actions[i]);
    accumulate_grad_at(plus, f.batch.state(i), a, c, out);
    accumulate_grad_at(minus, f.batch.state(i), a, c, g_minus);
  }
  kernels::axpy(-1.0, g_minus, out);
  kernels::scal(vnorm / (2.0 * eps), out);
  if (!all_finite(out)) throw NumericalError("gaussian HVP produced non-finite values");
  return out;
}

std::unique_ptr<Policy> GaussianMlpPolicy::clone() const {
  return std::make_unique<GaussianMlpPolicy>(*this);
}

std::unique_ptr<Policy> make_policy(const EnvSpec& spec, Rng& init_rng, std::size_t hidden) {
  if (const auto* d = std::get_if<DiscreteActions>(&spec.action_kind))
    return std::make_unique<SoftmaxLinearPolicy>(spec.state_dim, d->n);
  GaussianMlpPolicy::Options opt;
  opt.hidden = hidden;
  return std::make_unique<GaussianMlpPolicy>(spec.state_dim,
                                             std::get<ContinuousActions>(spec.action_kind),
                                             init_rng, opt);
}

}  // namespace sottac
