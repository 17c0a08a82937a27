#include "sottac/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "sottac/kernels.hpp"
#include "sottac/optim.hpp"
#include "sottac/oracle.hpp"

namespace sottac::checks {

namespace {

using oracle::Matrix;
using oracle::ScalarFn;

struct Instance {
  TinyMdp mdp;
  SoftmaxLinearPolicy policy;
  ParamVector theta;
};

Instance random_instance(Rng& rng, const CheckOptions& o) {
  const std::size_t features = o.d / TinyMdp::kActions;
  TinyMdp mdp = TinyMdp::random(rng, features, o.horizon, o.gamma);
  SoftmaxLinearPolicy policy(features, TinyMdp::kActions);
  ParamVector theta(policy.dim());
  for (double& x : theta) x = 0.5 * rng.normal();
  policy.set_params(theta);
  return {std::move(mdp), std::move(policy), std::move(theta)};
}

ScalarFn exact_objective(const Instance& inst) {
  return [&inst](std::span<const double> th) {
    return enumerate_exact_J(inst.mdp, inst.policy, th);
  };
}

std::string fmt_worst(double worst, double tol, const std::string& extra = {}) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << "worst " << worst << " (tol " << tol << ")";
  if (!extra.empty()) os << ", " << extra;
  return os.str();
}

std::string step_note(const oracle::FdSpec& spec) {
  std::ostringstream os;
  os << "fd step " << spec.step << (spec.scale_by_theta ? " x (1+|theta|_inf)" : "");
  return os.str();
}

double norm(const ParamVector& v) { return kernels::norm2(v); }

CheckResult gradient_fd(const CheckOptions& o) {
  constexpr double tol = 1e-6;
  const oracle::FdSpec spec{1e-5, true};
  Rng rng = Rng::derive(o.seed, Stream::Oracle);
  double worst = 0.0;
  for (int trial = 0; trial < o.trials; ++trial) {
    Instance inst = random_instance(rng, o);
    const auto eb = oracle::exact_batch(inst.mdp, inst.policy, inst.theta);
    const ParamVector g = policy_gradient(eb.batch, inst.policy, eb.q);
    const ParamVector ref = oracle::fd_gradient(exact_objective(inst), inst.theta, spec);
    ParamVector diff(g);
    kernels::axpy(-1.0, ref, diff);
    worst = std::max(worst, norm(diff) / std::max(norm(ref), 1e-12));
  }
  return {"gradient-fd", worst <= tol, fmt_worst(worst, tol, "relative, " + step_note(spec))};
}

CheckResult hessian_decomposition(const CheckOptions& o) {
  constexpr double tol = 1e-4;
  const oracle::FdSpec spec{1e-5, true};
  Rng rng = Rng::derive(o.seed + 1, Stream::Oracle);
  double worst = 0.0;
  for (int trial = 0; trial < o.trials; ++trial) {
    Instance inst = random_instance(rng, o);
    const Matrix ref = oracle::fd_hessian_dense(exact_objective(inst), inst.theta, spec);
    const auto dec = oracle::hessian_decomposition(
        inst.mdp, inst.policy, inst.theta, oracle::live_q_provider(inst.mdp, inst.policy), spec);
    worst = std::max(worst, oracle::max_abs(ref - dec.full()));
  }
  return {"hessian-decomposition", worst < tol,
          fmt_worst(worst, tol, "entrywise absolute, " + step_note(spec))};
}

// Q-weighted H1 + H2 against the advantage-weighted ACGN1 operator, both
// assembled from the production products under exact expectations.
CheckResult curvature_equivalence(const CheckOptions& o) {
  constexpr double tol = 1e-8;
  Rng rng = Rng::derive(o.seed + 2, Stream::Oracle);
  double worst = 0.0;
  for (int trial = 0; trial < o.trials; ++trial) {
    Instance inst = random_instance(rng, o);
    const auto eb = oracle::exact_batch(inst.mdp, inst.policy, inst.theta);
    const CurvatureOperator h1(CurvatureKind::OuterProduct, inst.policy, eb.batch, eb.q, 0.0);
    const CurvatureOperator h2(CurvatureKind::Intrinsic, inst.policy, eb.batch, eb.q, 0.0);
    const CurvatureOperator a12(CurvatureKind::Acgn1, inst.policy, eb.batch, eb.advantage, 0.0);
    const Matrix q_form = oracle::dense_operator(h1) + oracle::dense_operator(h2);
    const Matrix a_form = oracle::dense_operator(a12);
    worst = std::max(worst, oracle::max_abs(q_form - a_form));
  }
  return {"curvature-equivalence", worst <= tol, fmt_worst(worst, tol, "entrywise absolute")};
}

SampleBatch random_softmax_batch(Rng& rng, std::size_t state_dim, int n_actions, std::size_t n) {
  SampleBatch b(state_dim);
  std::vector<double> s(state_dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& x : s) x = rng.normal();
    b.add(s, Action{static_cast<int>(rng.uniform() * n_actions) % n_actions});
  }
  b.set_uniform_measure();
  return b;
}

CheckResult curvature_sign(const CheckOptions& o) {
  constexpr double tol = 1e-10;
  Rng rng = Rng::derive(o.seed + 3, Stream::Oracle);
  double worst_h1 = std::numeric_limits<double>::infinity();
  double worst_h2 = -std::numeric_limits<double>::infinity();
  int failures = 0;
  for (int probe = 0; probe < o.probes; ++probe) {
    const std::size_t state_dim = 1 + static_cast<std::size_t>(rng.uniform() * 6);
    const int n_actions = 2 + static_cast<int>(rng.uniform() * 3);
    SoftmaxLinearPolicy policy(state_dim, n_actions);
    ParamVector theta(policy.dim());
    for (double& x : theta) x = rng.normal();
    policy.set_params(theta);
    const SampleBatch batch = random_softmax_batch(rng, state_dim, n_actions, 16);
    std::vector<double> w(batch.size());
    for (double& x : w) x = rng.uniform(0.0, 5.0);
    ParamVector v(policy.dim());
    for (double& x : v) x = rng.normal();
    const double q1 = kernels::dot(v, h1_vp(batch, policy, w, v));
    const double q2 = kernels::dot(v, h2_vp(batch, policy, w, v));
    worst_h1 = std::min(worst_h1, q1);
    worst_h2 = std::max(worst_h2, q2);
    if (q1 < -tol || q2 > tol) ++failures;
  }
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << o.probes << " probes, min v'H1v " << worst_h1 << ", max v'H2v "
     << worst_h2 << " (tol " << tol << ")";
  return {"curvature-sign", failures == 0, os.str()};
}

struct RandomOperatorCase {
  std::unique_ptr<SoftmaxLinearPolicy> policy;
  std::unique_ptr<CurvatureOperator> op;
};

RandomOperatorCase random_operator(Rng& rng, std::size_t max_dim, int trial) {
  const int n_actions = 2 + trial % 3;
  const std::size_t state_dim =
      std::max<std::size_t>(1, max_dim / static_cast<std::size_t>(n_actions));
  auto policy = std::make_unique<SoftmaxLinearPolicy>(state_dim, n_actions);
  ParamVector theta(policy->dim());
  for (double& x : theta) x = rng.normal();
  policy->set_params(theta);
  const SampleBatch batch =
      random_softmax_batch(rng, state_dim, n_actions, 8 + static_cast<std::size_t>(trial) * 3);
  std::vector<double> w(batch.size());
  for (double& x : w) x = rng.uniform(0.0, 5.0);
  const double damping = std::pow(10.0, rng.uniform(-2.0, 0.0));
  const CurvatureKind kind = trial % 2 == 0 ? CurvatureKind::Acgn2 : CurvatureKind::Fisher;
  auto op = std::make_unique<CurvatureOperator>(
      kind, *policy, batch, kind == CurvatureKind::Fisher ? std::vector<double>{} : w, damping);
  return {std::move(policy), std::move(op)};
}

CheckResult spectrum_dense(const CheckOptions& o) {
  constexpr double tol = 1e-2;
  const int iters = NewtonRule{}.spectrum_iters;
  Rng rng = Rng::derive(o.seed + 4, Stream::Oracle);
  Rng probe = Rng::derive(o.seed + 4, Stream::Diagnostics);
  double worst = 0.0;
  std::size_t largest = 0;
  for (int trial = 0; trial < o.trials; ++trial) {
    const auto c = random_operator(rng, o.d, trial);
    largest = std::max(largest, c.op->dim());
    const auto ref = oracle::dense_extremes(oracle::dense_operator(*c.op));
    const auto est = estimate_spectrum(*c.op, probe, iters);
    worst = std::max({worst, std::abs(est.m_hat - ref.min) / std::abs(ref.min),
                      std::abs(est.M_hat - ref.max) / std::abs(ref.max)});
  }
  std::ostringstream extra;
  extra << "relative, " << iters << " Lanczos steps, d up to " << largest;
  return {"spectrum-dense", worst <= tol, fmt_worst(worst, tol, extra.str())};
}

CheckResult cg_dense(const CheckOptions& o) {
  constexpr double tol = 1e-6;
  Rng rng = Rng::derive(o.seed + 5, Stream::Oracle);
  double worst = 0.0;
  for (int trial = 0; trial < o.trials; ++trial) {
    const auto c = random_operator(rng, std::min<std::size_t>(o.d, 8), trial);
    ParamVector b(c.op->dim());
    for (double& x : b) x = rng.normal();
    const auto cg = conjugate_gradient(*c.op, b, static_cast<int>(4 * b.size()), 1e-12);
    const ParamVector ref = oracle::dense_solve(oracle::dense_operator(*c.op), b);
    ParamVector diff(cg.x);
    kernels::axpy(-1.0, ref, diff);
    worst = std::max(worst, norm(diff) / std::max(norm(ref), 1e-300));
  }
  return {"cg-dense", worst <= tol, fmt_worst(worst, tol, "relative, d <= 8")};
}

// Dropping H12 costs exactly |H12 + H12^T|; with frozen Q tables the
// interaction-free assembly is the whole Hessian of the frozen objective.
CheckResult h12_limit(const CheckOptions& o) {
  constexpr double live_tol = 1e-4;
  constexpr double frozen_tol = 1e-6;
  const oracle::FdSpec live_spec{1e-5, true};
  const oracle::FdSpec frozen_spec{1e-4, true};
  Rng rng = Rng::derive(o.seed + 6, Stream::Oracle);
  double worst_live = 0.0;
  double worst_frozen = 0.0;
  double largest_interaction = 0.0;
  for (int trial = 0; trial < o.trials; ++trial) {
    Instance inst = random_instance(rng, o);
    const Matrix full = oracle::fd_hessian_dense(exact_objective(inst), inst.theta, live_spec);
    const auto live = oracle::hessian_decomposition(
        inst.mdp, inst.policy, inst.theta, oracle::live_q_provider(inst.mdp, inst.policy),
        live_spec);
    const double omission = (full - live.interaction_free()).norm();
    const double interaction = (live.h12 + live.h12.transpose()).norm();
    largest_interaction = std::max(largest_interaction, interaction);
    worst_live = std::max(worst_live, std::abs(omission - interaction));

    auto q = oracle::exact_q_v(inst.mdp, inst.policy, inst.theta).q;
    q.pop_back();
    const auto frozen = oracle::hessian_decomposition(
        inst.mdp, inst.policy, inst.theta, oracle::frozen_q_provider(std::move(q)), frozen_spec);
    const Matrix frozen_full = oracle::fd_hessian_dense(
        oracle::frozen_objective(inst.mdp, inst.policy, inst.theta), inst.theta, frozen_spec);
    worst_frozen = std::max(worst_frozen, (frozen_full - frozen.interaction_free()).norm());
  }
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << "live |omission - |H12+H12^T|| " << worst_live << " (tol " << live_tol
     << ", |H12+H12^T| up to " << largest_interaction << "), frozen omission " << worst_frozen
     << " (tol " << frozen_tol << "), Frobenius, " << step_note(live_spec) << " / "
     << step_note(frozen_spec);
  return {"h12-limit", worst_live <= live_tol && worst_frozen < frozen_tol, os.str()};
}

using CheckFn = CheckResult (*)(const CheckOptions&);

const std::vector<std::pair<std::string, CheckFn>>& registry() {
  static const std::vector<std::pair<std::string, CheckFn>> r = {
      {"gradient-fd", gradient_fd},
      {"hessian-decomposition", hessian_decomposition},
      {"curvature-equivalence", curvature_equivalence},
      {"curvature-sign", curvature_sign},
      {"spectrum-dense", spectrum_dense},
      {"cg-dense", cg_dense},
      {"h12-limit", h12_limit},
  };
  return r;
}

void validate(const CheckOptions& o) {
  if (o.d < 2 || o.d > oracle::kMaxDim || o.d % TinyMdp::kActions != 0)
    throw ContractViolation("check: --d must be even and between 2 and 32");
  if (o.trials < 1 || o.probes < 1) throw ContractViolation("check: trials and probes must be >= 1");
  if (o.horizon < 1) throw ContractViolation("check: horizon must be >= 1");
  if (!(o.gamma >= 0.0 && o.gamma < 1.0)) throw ContractViolation("check: gamma must be in [0,1)");
}

}  // namespace

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : registry()) n.push_back(name);
    return n;
  }();
  return names;
}

bool is_known_check(std::string_view name) {
  const auto& n = check_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

CheckResult run_check(std::string_view name, const CheckOptions& options) {
  validate(options);
  for (const auto& [n, fn] : registry()) {
    if (n != name) continue;
    const auto start = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = fn(options);
    } catch (const NumericalError& e) {
      r = {std::string(name), false, std::string("numerical failure: ") + e.what(), 0.0};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  }
  std::ostringstream os;
  os << "unknown check '" << name << "'";
  throw ContractViolation(os.str());
}

std::vector<CheckResult> run_checks(const CheckOptions& options,
                                    const std::vector<std::string>& only) {
  const auto& names = only.empty() ? check_names() : only;
  for (const auto& n : names)
    if (!is_known_check(n)) run_check(n, options);  // throws with the name
  std::vector<CheckResult> out;
  for (const auto& n : names) out.push_back(run_check(n, options));
  return out;
}

}  // namespace sottac::checks
