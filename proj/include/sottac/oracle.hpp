#pragma once

// Brute-force references: finite differences, dense operator assembly and
// exact TinyMdp tables. Small dimensions only (d <= 32).

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

#include "sottac/curvature.hpp"
#include "sottac/policy.hpp"
#include "sottac/tinymdp.hpp"

namespace sottac::oracle {

inline constexpr std::size_t kMaxDim = 32;

using Matrix = Eigen::MatrixXd;
using ScalarFn = std::function<double(std::span<const double>)>;

/// Central differences with step `step * (1 + |theta|_inf)` when scaled.
struct FdSpec {
  double step = 1e-5;
  bool scale_by_theta = true;

  double effective_step(std::span<const double> theta) const;
};

/// Throws NumericalError naming the coordinate when f is non-finite.
ParamVector fd_gradient(const ScalarFn& f, std::span<const double> theta, const FdSpec& spec = {});
/// Central second differences, symmetrized. Throws ContractViolation for d > 32.
Matrix fd_hessian_dense(const ScalarFn& f, std::span<const double> theta,
                        const FdSpec& spec = {});

/// Time-indexed tables: q[t][s][a] is the reward-to-go from step t, v[t][s]
/// its policy average. Index t = H holds zeros.
struct QvTables {
  std::vector<StateActionTable> q;
  std::vector<std::array<double, TinyMdp::kStates>> v;
};
QvTables exact_q_v(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                   std::span<const double> theta);

/// theta -> Q tables, used to differentiate Q through the policy.
using QProvider = std::function<std::vector<StateActionTable>(std::span<const double>)>;
QProvider live_q_provider(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy);
/// Always returns the given tables.
QProvider frozen_q_provider(std::vector<StateActionTable> q);

/// Every (t, s, a) as one sample with measure rho_t(s, a).
struct ExactBatch {
  SampleBatch batch;
  std::vector<double> q;          // Q_t(s, a)
  std::vector<double> advantage;  // Q_t(s, a) - V_t(s)
  std::vector<double> value;      // V_t(s)
  std::vector<int> step, state, action;
};
ExactBatch exact_batch(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                       std::span<const double> theta);

/// sum over (t, s, a) of rho_t Q_t grad log pi, assembled directly.
ParamVector exact_gradient(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                           std::span<const double> theta);

/// Column-by-column assembly P e_i. d <= 32.
Matrix dense_operator(const SymmetricOperator& op);
/// sum_i m_i w_i g_i g_i^T from explicit score vectors.
Matrix dense_outer_product(const SampleBatch& batch, const Policy& policy,
                           std::span<const double> weights);
/// FD Hessian of sum_i m_i w_i log pi(a_i | s_i).
Matrix dense_intrinsic_fd(const SampleBatch& batch, const Policy& policy,
                          std::span<const double> weights, const FdSpec& spec = {});

struct Decomposition {
  Matrix h1, h2, h12;
  Matrix full() const { return h1 + h2 + h12 + h12.transpose(); }
  Matrix interaction_free() const { return h1 + h2; }
};

/// H1 = sum rho Q g g^T, H2 = sum rho Q grad^2 log pi (FD), H12 = sum rho g
/// (grad Q)^T with grad Q from finite differences of the provider.
Decomposition hessian_decomposition(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                                    std::span<const double> theta, const QProvider& q_provider,
                                    const FdSpec& spec = {});

/// J with the state distribution and Q tables frozen at theta0:
/// sum_t sum_s d_t(s) sum_a pi_theta(a|s) Q_t(s, a). Its Hessian at theta0 has
/// no interaction term.
ScalarFn frozen_objective(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                          std::span<const double> theta0);

struct Extremes {
  double min = 0.0;
  double max = 0.0;
};
Extremes dense_extremes(const Matrix& symmetric);
ParamVector dense_solve(const Matrix& a, std::span<const double> b);

double max_abs(const Matrix& m);
double symmetry_error(const Matrix& m);

}  // namespace sottac::oracle
