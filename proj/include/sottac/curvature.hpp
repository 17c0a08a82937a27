#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sottac/common.hpp"
#include "sottac/critic.hpp"
#include "sottac/policy.hpp"
#include "sottac/rng.hpp"

namespace sottac {

/// Which per-sample weight multiplies a curvature term.
enum class Weighting { Q, Advantage, Unit };

enum class CurvatureKind {
  Fisher,        // E[g g^T], used with the opposite sign (P = lambda I + F)
  OuterProduct,  // H1 = E[w g g^T]
  Intrinsic,     // H2 = E[w grad^2 log pi]
  Acgn1,         // H1 + H2 with advantage weights
  Acgn2,         // H2 only
};

std::string_view to_string(Weighting w);
std::string_view to_string(CurvatureKind k);

/// Symmetric linear map accessed only through products.
class SymmetricOperator {
 public:
  virtual ~SymmetricOperator() = default;
  virtual std::size_t dim() const = 0;
  virtual ParamVector apply(std::span<const double> v) const = 0;
};

/// Wraps a callable; used for dense test operators and scaled identities.
class FunctionOperator final : public SymmetricOperator {
 public:
  using Fn = std::function<ParamVector(std::span<const double>)>;
  FunctionOperator(std::size_t dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}
  std::size_t dim() const override { return dim_; }
  ParamVector apply(std::span<const double> v) const override { return fn_(v); }

 private:
  std::size_t dim_;
  Fn fn_;
};

// Free-standing curvature products. Expectations are taken under
// batch.measure; weights are per sample and constant in theta.

/// sum_i m_i g_i (g_i^T v)
ParamVector fisher_vp(const SampleBatch& batch, const Policy& policy, std::span<const double> v);
/// sum_i m_i w_i g_i (g_i^T v)
ParamVector h1_vp(const SampleBatch& batch, const Policy& policy, std::span<const double> weights,
                  std::span<const double> v);
/// [sum_i m_i w_i grad^2 log pi_i] v
ParamVector h2_vp(const SampleBatch& batch, const Policy& policy, std::span<const double> weights,
                  std::span<const double> v);
/// Acgn1: h1 + h2 with the given (advantage) weights; Acgn2: h2.
ParamVector acgn_vp(CurvatureKind kind, const SampleBatch& batch, const Policy& policy,
                    std::span<const double> weights, std::span<const double> v);

/// Damped ascent-form curvature operator P(v) = lambda v - H~ v over an owned
/// snapshot of (policy parameters, batch, weights). For the Fisher kind
/// H~ = -F, so P = lambda I + F. Products are thread-safe.
class CurvatureOperator final : public SymmetricOperator {
 public:
  CurvatureOperator(CurvatureKind kind, const Policy& policy, SampleBatch batch,
                    std::vector<double> weights, double damping);

  std::size_t dim() const override { return policy_->dim(); }
  ParamVector apply(std::span<const double> v) const override;
  /// H~ v without damping.
  ParamVector curvature_product(std::span<const double> v) const;

  CurvatureKind kind() const { return kind_; }
  double damping() const { return damping_; }
  const SampleBatch& batch() const { return batch_; }
  std::span<const double> weights() const { return weights_; }
  /// Number of products evaluated so far.
  std::size_t product_count() const { return products_.load(); }

 private:
  ParamVector outer_product(std::span<const double> v, bool weighted) const;
  ParamVector intrinsic(std::span<const double> v) const;

  CurvatureKind kind_;
  std::unique_ptr<Policy> policy_;
  SampleBatch batch_;
  std::vector<double> weights_;
  double damping_;
  std::vector<double> scores_;  // N x d, only for kinds with an outer-product term
  std::vector<double> intrinsic_coeffs_;
  mutable std::atomic<std::size_t> products_{0};
};

struct SpectrumEstimate {
  double m_hat = 0.0;  // smallest eigenvalue estimate
  double M_hat = 0.0;  // largest eigenvalue estimate
  int iterations = 0;
  bool converged = false;
};

enum class SpectrumMethod {
  Lanczos,  // Krylov with full reorthogonalization; default
  Power,    // power iteration on P, then on (M_hat I - P)
};

/// Matrix-free extreme eigenvalue estimates. iters >= 5.
SpectrumEstimate estimate_spectrum(const SymmetricOperator& op, Rng& probe_rng, int iters,
                                   SpectrumMethod method = SpectrumMethod::Lanczos);

/// Bound G_pi * G_Q * |(d omega / d theta) u| on the dropped actor-critic
/// interaction term, along one random unit direction u.
struct H12Diagnostic {
  bool available = false;
  double bound = 0.0;
  double g_pi = 0.0;           // max_t |grad log pi_t|
  double g_q = 0.0;            // max_t |grad_omega V(s_t)|
  double critic_jacobian = 0.0;  // |omega(theta + e u) - omega(theta - e u)| / 2e
};

/// theta -> critic parameters refit for that policy; nullopt when the refit
/// fails.
using CriticRefit = std::function<std::optional<ParamVector>(std::span<const double> theta)>;

H12Diagnostic h12_diagnostic(const SampleBatch& batch, const Policy& policy,
                             const ValueCritic& critic, std::span<const double> theta,
                             const CriticRefit& omega_fn, Rng& rng, double fd_step = 1e-4);

/// Refit that reruns critic_update from `start` on the fixed transitions,
/// reweighted by the likelihood ratio pi_theta(a|s) / pi_behaviour(a|s).
CriticRefit importance_weighted_refit(const ValueCritic& start,
                                      std::vector<Transition> transitions,
                                      const Policy& behaviour, double gamma, double beta,
                                      int n_inner);

}  // namespace sottac
