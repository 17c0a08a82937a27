#include "sottac/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sottac/kernels.hpp"

namespace sottac {

std::string_view to_string(Weighting w) {
  switch (w) {
    case Weighting::Q: return "q";
    case Weighting::Advantage: return "advantage";
    case Weighting::Unit: return "unit";
  }
  return "?";
}

std::string_view to_string(CurvatureKind k) {
  switch (k) {
    case CurvatureKind::Fisher: return "fisher";
    case CurvatureKind::OuterProduct: return "outer_product";
    case CurvatureKind::Intrinsic: return "intrinsic";
    case CurvatureKind::Acgn1: return "acgn1";
    case CurvatureKind::Acgn2: return "acgn2";
  }
  return "?";
}

namespace {

void check_inputs(const SampleBatch& batch, const Policy& policy, std::span<const double> weights,
                  std::span<const double> v) {
  if (batch.empty()) throw ContractViolation("curvature product: empty batch");
  if (batch.measure.size() != batch.size())
    throw ContractViolation("curvature product: batch measure missing");
  if (!weights.empty() && weights.size() != batch.size())
    throw ContractViolation("curvature product: one weight per sample required");
  if (v.size() != policy.dim()) throw ContractViolation("curvature product: dimension mismatch");
  if (!all_finite(weights)) throw ContractViolation("curvature product: non-finite weights");
}

ParamVector outer_product_vp(const SampleBatch& batch, const Policy& policy,
                             std::span<const double> weights, std::span<const double> v) {
  ParamVector out(policy.dim(), 0.0);
  ParamVector g(policy.dim());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double c = batch.measure[i] * (weights.empty() ? 1.0 : weights[i]);
    if (c == 0.0) continue;
    std::fill(g.begin(), g.end(), 0.0);
    policy.accumulate_grad_log_prob(batch.state(i), batch.actions[i], 1.0, g);
    kernels::axpy(c * kernels::dot(g, v), g, out);
  }
  return out;
}

std::vector<double> functional_coeffs(const SampleBatch& batch, std::span<const double> weights) {
  std::vector<double> c(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i)
    c[i] = batch.measure[i] * (weights.empty() ? 1.0 : weights[i]);
  return c;
}

}  // namespace

ParamVector fisher_vp(const SampleBatch& batch, const Policy& policy, std::span<const double> v) {
  check_inputs(batch, policy, {}, v);
  return outer_product_vp(batch, policy, {}, v);
}

ParamVector h1_vp(const SampleBatch& batch, const Policy& policy, std::span<const double> weights,
                  std::span<const double> v) {
  check_inputs(batch, policy, weights, v);
  return outer_product_vp(batch, policy, weights, v);
}

ParamVector h2_vp(const SampleBatch& batch, const Policy& policy, std::span<const double> weights,
                  std::span<const double> v) {
  check_inputs(batch, policy, weights, v);
  const auto coeffs = functional_coeffs(batch, weights);
  return policy.hvp_weighted_logprob({batch, coeffs}, v);
}

ParamVector acgn_vp(CurvatureKind kind, const SampleBatch& batch, const Policy& policy,
                    std::span<const double> weights, std::span<const double> v) {
  if (kind == CurvatureKind::Acgn2) return h2_vp(batch, policy, weights, v);
  if (kind != CurvatureKind::Acgn1) throw ContractViolation("acgn_vp: kind must be Acgn1 or Acgn2");
  ParamVector out = h1_vp(batch, policy, weights, v);
  kernels::axpy(1.0, h2_vp(batch, policy, weights, v), out);
  return out;
}

// ------------------------------------------------------- CurvatureOperator

CurvatureOperator::CurvatureOperator(CurvatureKind kind, const Policy& policy, SampleBatch batch,
                                     std::vector<double> weights, double damping)
    : kind_(kind), policy_(policy.clone()), batch_(std::move(batch)),
      weights_(std::move(weights)), damping_(damping) {
  if (!(damping_ >= 0.0)) throw ContractViolation("CurvatureOperator: damping must be >= 0");
  if (batch_.measure.size() != batch_.size())
    throw ContractViolation("CurvatureOperator: batch measure missing");
  if (kind_ == CurvatureKind::Fisher) weights_.clear();
  if (!weights_.empty() && weights_.size() != batch_.size())
    throw ContractViolation("CurvatureOperator: one weight per sample required");
  if (!all_finite(weights_)) throw ContractViolation("CurvatureOperator: non-finite weights");

  const bool has_outer = kind_ == CurvatureKind::Fisher || kind_ == CurvatureKind::OuterProduct ||
                         kind_ == CurvatureKind::Acgn1;
  if (has_outer) {
    const std::size_t d = policy_->dim();
    scores_.assign(batch_.size() * d, 0.0);
    for (std::size_t i = 0; i < batch_.size(); ++i)
      policy_->accumulate_grad_log_prob(batch_.state(i), batch_.actions[i], 1.0,
                                        std::span<double>(scores_).subspan(i * d, d));
  }
  intrinsic_coeffs_ = functional_coeffs(batch_, weights_);
}

ParamVector CurvatureOperator::outer_product(std::span<const double> v, bool weighted) const {
  const std::size_t d = policy_->dim();
  ParamVector out(d, 0.0);
  const std::span<const double> scores(scores_);
  for (std::size_t i = 0; i < batch_.size(); ++i) {
    const double c = batch_.measure[i] * (weighted && !weights_.empty() ? weights_[i] : 1.0);
    if (c == 0.0) continue;
    const auto g = scores.subspan(i * d, d);
    kernels::axpy(c * kernels::dot(g, v), g, out);
  }
  return out;
}

ParamVector CurvatureOperator::intrinsic(std::span<const double> v) const {
  return policy_->hvp_weighted_logprob({batch_, intrinsic_coeffs_}, v);
}

ParamVector CurvatureOperator::curvature_product(std::span<const double> v) const {
  if (v.size() != dim()) throw ContractViolation("CurvatureOperator: dimension mismatch");
  if (batch_.empty()) return ParamVector(dim(), 0.0);
  switch (kind_) {
    case CurvatureKind::Fisher: {
      ParamVector f = outer_product(v, false);
      kernels::scal(-1.0, f);
      return f;
    }
    case CurvatureKind::OuterProduct: return outer_product(v, true);
    case CurvatureKind::Intrinsic:
    case CurvatureKind::Acgn2: return intrinsic(v);
    case CurvatureKind::Acgn1: {
      ParamVector out = outer_product(v, true);
      kernels::axpy(1.0, intrinsic(v), out);
      return out;
    }
  }
  return ParamVector(dim(), 0.0);
}

ParamVector CurvatureOperator::apply(std::span<const double> v) const {
  ++products_;
  ParamVector out = curvature_product(v);
  kernels::scal(-1.0, out);
  kernels::axpy(damping_, v, out);
  return out;
}

// ------------------------------------------------------------- spectrum

namespace {

ParamVector random_unit(std::size_t d, Rng& rng) {
  ParamVector v(d);
  for (double& x : v) x = rng.normal();
  kernels::scal(1.0 / kernels::norm2(v), v);
  return v;
}

/// Number of eigenvalues of the symmetric tridiagonal (alpha, beta) below x.
int sturm_count(const std::vector<double>& alpha, const std::vector<double>& beta, double x) {
  int count = 0;
  double q = 1.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double b2 = i == 0 ? 0.0 : beta[i - 1] * beta[i - 1];
    q = alpha[i] - x - (i == 0 ? 0.0 : b2 / q);
    if (q == 0.0) q = -std::numeric_limits<double>::epsilon() * (std::abs(x) + 1.0);
    if (q < 0.0) ++count;
  }
  return count;
}

/// k-th smallest eigenvalue (0-based) of a symmetric tridiagonal by bisection.
double tridiagonal_eigenvalue(const std::vector<double>& alpha, const std::vector<double>& beta,
                              int k) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(beta[i - 1]);
    if (i + 1 < alpha.size()) r += std::abs(beta[i]);
    lo = std::min(lo, alpha[i] - r);
    hi = std::max(hi, alpha[i] + r);
  }
  const double pad = 1e-12 * (std::abs(lo) + std::abs(hi) + 1.0);
  lo -= pad;
  hi += pad;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (std::abs(lo) + std::abs(hi) + 1e-300); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sturm_count(alpha, beta, mid) > k)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

SpectrumEstimate lanczos(const SymmetricOperator& op, Rng& rng, int iters) {
  const std::size_t d = op.dim();
  const int k_max = static_cast<int>(std::min<std::size_t>(iters, d));
  std::vector<ParamVector> basis;
  basis.reserve(k_max);
  std::vector<double> alpha, beta;
  basis.push_back(random_unit(d, rng));

  SpectrumEstimate est;
  double prev_lo = 0.0, prev_hi = 0.0;
  for (int j = 0; j < k_max; ++j) {
    ParamVector w = op.apply(basis[j]);
    if (!all_finite(w)) throw NumericalError("estimate_spectrum: operator returned non-finite values");
    alpha.push_back(kernels::dot(w, basis[j]));
    // Full reorthogonalization, applied twice.
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) kernels::axpy(-kernels::dot(w, q), q, w);
    const double b = kernels::norm2(w);

    est.iterations = j + 1;
    est.m_hat = tridiagonal_eigenvalue(alpha, beta, 0);
    est.M_hat = tridiagonal_eigenvalue(alpha, beta, static_cast<int>(alpha.size()) - 1);

    const double scale = std::max({std::abs(est.m_hat), std::abs(est.M_hat), 1e-300});
    if (b <= 1e-10 * scale || j + 1 == static_cast<int>(d)) {
      est.converged = true;  // invariant subspace: Ritz values are exact
      break;
    }
    if (j > 0 && std::abs(est.m_hat - prev_lo) <= 1e-10 * scale &&
        std::abs(est.M_hat - prev_hi) <= 1e-10 * scale)
      est.converged = true;
    prev_lo = est.m_hat;
    prev_hi = est.M_hat;
    if (j + 1 == k_max) break;
    beta.push_back(b);
    kernels::scal(1.0 / b, w);
    basis.push_back(std::move(w));
  }
  return est;
}

/// Dominant eigenvalue (by magnitude) of op(v) + shift v via power iteration.
std::pair<double, bool> power_rayleigh(const SymmetricOperator& op, double shift, double sign,
                                       Rng& rng, int iters, int& used) {
  ParamVector v = random_unit(op.dim(), rng);
  double rq = 0.0;
  bool converged = false;
  for (int it = 0; it < iters; ++it) {
    ParamVector w = op.apply(v);
    kernels::scal(sign, w);
    kernels::axpy(shift, v, w);
    const double next = kernels::dot(v, w);
    const double n = kernels::norm2(w);
    ++used;
    if (n == 0.0) return {0.0, true};
    kernels::scal(1.0 / n, w);
    if (it > 0 && std::abs(next - rq) <= 1e-10 * std::max(std::abs(next), 1e-300)) {
      rq = next;
      converged = true;
      break;
    }
    rq = next;
    v = std::move(w);
  }
  return {rq, converged};
}

}  // namespace

SpectrumEstimate estimate_spectrum(const SymmetricOperator& op, Rng& probe_rng, int iters,
                                   SpectrumMethod method) {
  if (iters < 5) throw ContractViolation("estimate_spectrum: iters must be >= 5");
  if (op.dim() == 0) throw ContractViolation("estimate_spectrum: empty operator");
  if (method == SpectrumMethod::Lanczos) return lanczos(op, probe_rng, iters);

  SpectrumEstimate est;
  int used = 0;
  const auto [top, c1] = power_rayleigh(op, 0.0, 1.0, probe_rng, iters, used);
  // (M I - P) is PSD when top is the largest eigenvalue; its dominant
  // eigenvalue is M - m.
  const auto [gap, c2] = power_rayleigh(op, top, -1.0, probe_rng, iters, used);
  est.M_hat = top;
  est.m_hat = top - gap;
  if (est.m_hat > est.M_hat) std::swap(est.m_hat, est.M_hat);
  est.iterations = used;
  est.converged = c1 && c2;
  return est;
}

// ------------------------------------------------------------- H12 bound

H12Diagnostic h12_diagnostic(const SampleBatch& batch, const Policy& policy,
                             const ValueCritic& critic, std::span<const double> theta,
                             const CriticRefit& omega_fn, Rng& rng, double fd_step) {
  if (theta.size() != policy.dim()) throw ContractViolation("h12_diagnostic: theta dimension");
  H12Diagnostic out;
  auto snapshot = policy.clone();
  snapshot->set_params(theta);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.g_pi = std::max(out.g_pi,
                        kernels::norm2(snapshot->grad_log_prob(batch.state(i), batch.actions[i])));
    out.g_q = std::max(out.g_q, kernels::norm2(critic.grad_value(batch.state(i))));
  }
  const ParamVector u = random_unit(theta.size(), rng);
  ParamVector plus(theta.begin(), theta.end()), minus(theta.begin(), theta.end());
  kernels::axpy(fd_step, u, plus);
  kernels::axpy(-fd_step, u, minus);
  const auto w_plus = omega_fn(plus);
  const auto w_minus = omega_fn(minus);
  if (!w_plus || !w_minus || w_plus->size() != w_minus->size() || !all_finite(*w_plus) ||
      !all_finite(*w_minus))
    return out;
  ParamVector diff(*w_plus);
  kernels::axpy(-1.0, *w_minus, diff);
  out.critic_jacobian = kernels::norm2(diff) / (2.0 * fd_step);
  out.bound = out.g_pi * out.g_q * out.critic_jacobian;
  out.available = std::isfinite(out.bound);
  return out;
}

CriticRefit importance_weighted_refit(const ValueCritic& start,
                                      std::vector<Transition> transitions,
                                      const Policy& behaviour, double gamma, double beta,
                                      int n_inner) {
  std::vector<double> base_logp(transitions.size());
  for (std::size_t i = 0; i < transitions.size(); ++i)
    base_logp[i] = behaviour.log_prob(transitions[i].state, transitions[i].action);
  std::shared_ptr<const Policy> proto = behaviour.clone();
  return [start, transitions = std::move(transitions), base_logp = std::move(base_logp), proto,
          gamma, beta, n_inner](std::span<const double> theta) -> std::optional<ParamVector> {
    auto pol = proto->clone();
    pol->set_params(theta);
    std::vector<double> w(transitions.size());
    for (std::size_t i = 0; i < transitions.size(); ++i)
      w[i] = std::exp(pol->log_prob(transitions[i].state, transitions[i].action) - base_logp[i]);
    if (!all_finite(w)) return std::nullopt;
    ValueCritic c = start;
    try {
      critic_update(c, transitions, gamma, beta, n_inner, w);
    } catch (const NumericalError&) {
      return std::nullopt;
    }
    return ParamVector(c.params().begin(), c.params().end());
  };
}

}  // namespace sottac
