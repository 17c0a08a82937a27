#include "sottac/optim.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "sottac/kernels.hpp"

namespace sottac {

double rule_alpha(const UpdateRule& rule) {
  return std::visit([](const auto& r) { return r.alpha; }, rule);
}

void validate_rule(const UpdateRule& rule) {
  std::visit(
      [](const auto& r) {
        if (!(r.alpha > 0.0)) throw ContractViolation("update rule: alpha must be positive");
        using T = std::decay_t<decltype(r)>;
        if constexpr (!std::is_same_v<T, VanillaRule>) {
          if (r.cg_iters < 1) throw ContractViolation("update rule: cg_iters must be >= 1");
          if (!(r.cg_tol > 0.0)) throw ContractViolation("update rule: cg_tol must be positive");
          if (!(r.damping >= 0.0)) throw ContractViolation("update rule: damping must be >= 0");
        }
      },
      rule);
}

ParamVector policy_gradient(const SampleBatch& batch, const Policy& policy,
                            std::span<const double> weights) {
  if (batch.empty()) throw ContractViolation("policy_gradient: empty batch");
  if (weights.size() != batch.size() || batch.measure.size() != batch.size())
    throw ContractViolation("policy_gradient: one weight and measure per sample required");
  ParamVector g(policy.dim(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double c = batch.measure[i] * weights[i];
    if (c != 0.0) policy.accumulate_grad_log_prob(batch.state(i), batch.actions[i], c, g);
  }
  if (!all_finite(g)) {
    std::ostringstream os;
    os << "policy_gradient: non-finite gradient (" << describe_vector(g) << "; theta "
       << describe_vector(policy.params()) << ")";
    throw NumericalError(os.str());
  }
  return g;
}

CgResult conjugate_gradient(const SymmetricOperator& op, std::span<const double> b, int max_iters,
                            double tol) {
  const std::size_t d = b.size();
  CgResult res;
  res.x.assign(d, 0.0);
  const double b_norm = kernels::norm2(b);
  if (b_norm == 0.0) return res;
  ParamVector r(b.begin(), b.end());
  ParamVector p(r);
  double rr = kernels::dot(r, r);
  res.relative_residual = 1.0;
  for (int k = 0; k < max_iters; ++k) {
    const ParamVector Ap = op.apply(p);
    const double pAp = kernels::dot(p, Ap);
    const double pp = kernels::dot(p, p);
    res.min_curvature = std::min(res.min_curvature, pAp / pp);
    if (!(pAp > 1e-12 * pp)) {
      res.negative_curvature = true;
      return res;
    }
    const double step = rr / pAp;
    kernels::axpy(step, p, res.x);
    kernels::axpy(-step, Ap, r);
    ++res.iterations;
    const double rr_next = kernels::dot(r, r);
    res.relative_residual = std::sqrt(rr_next) / b_norm;
    if (res.relative_residual <= tol) return res;
    kernels::scal(rr_next / rr, p);
    kernels::axpy(1.0, r, p);
    rr = rr_next;
  }
  return res;
}

namespace {

using Clock = std::chrono::steady_clock;

void finish(Direction& out, Clock::time_point start) {
  out.report.direction_norm = kernels::norm2(out.d);
  out.report.wall_clock_ns =
      std::max<std::int64_t>(1, std::chrono::duration_cast<std::chrono::nanoseconds>(
                                    Clock::now() - start)
                                    .count());
}

void check_finite_gradient(std::span<const double> g) {
  if (!all_finite(g)) {
    std::ostringstream os;
    os << "solve_direction: non-finite gradient (" << describe_vector(g) << ")";
    throw NumericalError(os.str());
  }
}

}  // namespace

Direction solve_direction(const UpdateRule& rule, const SymmetricOperator* op,
                          std::span<const double> g, Rng* probe_rng) {
  const auto start = Clock::now();
  check_finite_gradient(g);
  Direction out;
  out.report.grad_norm = kernels::norm2(g);
  out.report.alpha_used = rule_alpha(rule);

  if (std::holds_alternative<VanillaRule>(rule)) {
    out.d.assign(g.begin(), g.end());
    finish(out, start);
    return out;
  }
  if (op == nullptr) throw ContractViolation("solve_direction: curvature operator required");
  if (op->dim() != g.size()) throw ContractViolation("solve_direction: dimension mismatch");

  if (const auto* nat = std::get_if<NaturalRule>(&rule)) {
    CgResult cg = conjugate_gradient(*op, g, nat->cg_iters, nat->cg_tol);
    out.report.cg_iterations = cg.iterations;
    out.report.min_cg_curvature = cg.iterations > 0 || cg.negative_curvature
                                      ? cg.min_curvature
                                      : out.report.min_cg_curvature;
    out.report.cg_converged = cg.relative_residual <= 10.0 * nat->cg_tol;
    out.d = cg.iterations > 0 ? std::move(cg.x) : ParamVector(g.begin(), g.end());
    finish(out, start);
    return out;
  }

  const auto& newton = std::get<NewtonRule>(rule);
  Rng fallback_rng(0);
  Rng& rng = probe_rng != nullptr ? *probe_rng : fallback_rng;
  SpectrumEstimate spectrum;
  const bool need_spectrum = newton.spectrum_iters >= 5 || newton.solver == Solver::FixedPoint;
  if (need_spectrum) {
    spectrum = estimate_spectrum(*op, rng, std::max(5, newton.spectrum_iters));
    out.report.m_hat = spectrum.m_hat;
    out.report.M_hat = spectrum.M_hat;
  }

  if (newton.solver == Solver::FixedPoint) {
    // Richardson iteration on P d = g; contracts when 0 < m <= M.
    const bool pd = spectrum.m_hat > 0.0;
    if (newton.screening && !pd) {
      out.report.screening_triggered = true;
      out.report.fallback_used = true;
      out.report.alpha_used = newton.fallback_alpha;
      out.d.assign(g.begin(), g.end());
      finish(out, start);
      return out;
    }
    const double eta = 1.0 / spectrum.M_hat;
    ParamVector d(g.size(), 0.0);
    const double g_norm = out.report.grad_norm;
    for (int k = 0; k < newton.cg_iters; ++k) {
      ParamVector resid(g.begin(), g.end());
      kernels::axpy(-1.0, op->apply(d), resid);
      ++out.report.cg_iterations;
      const double rn = kernels::norm2(resid);
      if (g_norm > 0.0 && rn / g_norm <= newton.cg_tol) break;
      kernels::axpy(eta, resid, d);
    }
    ParamVector resid(g.begin(), g.end());
    kernels::axpy(-1.0, op->apply(d), resid);
    out.report.cg_converged =
        g_norm == 0.0 || kernels::norm2(resid) / g_norm <= 10.0 * newton.cg_tol;
    out.d = std::move(d);
    finish(out, start);
    return out;
  }

  CgResult cg = conjugate_gradient(*op, g, newton.cg_iters, newton.cg_tol);
  out.report.cg_iterations = cg.iterations;
  if (cg.iterations > 0 || cg.negative_curvature) out.report.min_cg_curvature = cg.min_curvature;
  out.report.cg_converged = !cg.negative_curvature && cg.relative_residual <= 10.0 * newton.cg_tol;
  if (cg.negative_curvature && newton.screening) {
    out.report.screening_triggered = true;
    out.report.fallback_used = true;
    out.report.alpha_used = newton.fallback_alpha;
    out.d.assign(g.begin(), g.end());
  } else if (cg.iterations == 0) {
    // Negative curvature on the very first direction without screening.
    out.d.assign(g.begin(), g.end());
  } else {
    out.d = std::move(cg.x);
  }
  finish(out, start);
  return out;
}

ParamVector apply_update(const Policy& policy, std::span<const double> d, double alpha) {
  if (d.size() != policy.dim()) throw ContractViolation("apply_update: dimension mismatch");
  if (!all_finite(d)) {
    std::ostringstream os;
    os << "apply_update: non-finite direction (" << describe_vector(d) << ")";
    throw NumericalError(os.str());
  }
  ParamVector theta(policy.params().begin(), policy.params().end());
  kernels::axpy(alpha, d, theta);
  if (!all_finite(theta)) {
    std::ostringstream os;
    os << "apply_update: non-finite parameters after step (" << describe_vector(theta) << ")";
    throw NumericalError(os.str());
  }
  return theta;
}

double step_size_bound(const SpectrumEstimate& spectrum, double L_hat) {
  if (!(spectrum.m_hat > 0.0)) throw ContractViolation("step_size_bound: m_hat must be positive");
  if (!(L_hat > 0.0)) throw ContractViolation("step_size_bound: L_hat must be positive");
  const double m2 = spectrum.m_hat * spectrum.m_hat;
  const double denom = L_hat * spectrum.M_hat - m2;
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  return 2.0 * m2 / denom;
}

}  // namespace sottac
