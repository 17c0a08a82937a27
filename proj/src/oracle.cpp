#include "sottac/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sottac::oracle {

namespace {

constexpr int S = TinyMdp::kStates;
constexpr int A = TinyMdp::kActions;

void check_dim(std::size_t d, const char* what) {
  if (d > kMaxDim) {
    std::ostringstream os;
    os << what << ": dimension " << d << " exceeds the oracle limit " << kMaxDim;
    throw ContractViolation(os.str());
  }
}

double eval_checked(const ScalarFn& f, std::span<const double> x, std::size_t coord) {
  const double y = f(x);
  if (!std::isfinite(y)) {
    std::ostringstream os;
    os << "finite difference: non-finite function value while perturbing coordinate " << coord;
    throw NumericalError(os.str());
  }
  return y;
}

// Score of the linear softmax: block b holds (1{b = a} - p_b) s.
ParamVector softmax_score(std::span<const double> s, int a, std::span<const double> p) {
  const std::size_t n = s.size();
  ParamVector g(n * p.size());
  for (std::size_t b = 0; b < p.size(); ++b)
    for (std::size_t k = 0; k < n; ++k)
      g[b * n + k] = ((static_cast<int>(b) == a ? 1.0 : 0.0) - p[b]) * s[k];
  return g;
}

// grad^2 log pi = -(diag p - p p^T) kron s s^T, independent of the action.
Matrix softmax_log_hessian(std::span<const double> s, std::span<const double> p) {
  const auto n = static_cast<Eigen::Index>(s.size());
  const auto k = static_cast<Eigen::Index>(p.size());
  Eigen::Map<const Eigen::VectorXd> sv(s.data(), n);
  Eigen::Map<const Eigen::VectorXd> pv(p.data(), k);
  const Matrix cov = Matrix(pv.asDiagonal()) - pv * pv.transpose();
  const Matrix ss = sv * sv.transpose();
  Matrix h(n * k, n * k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) h.block(a * n, b * n, n, n) = -cov(a, b) * ss;
  return h;
}

Eigen::Map<const Eigen::VectorXd> as_vec(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

}  // namespace

double FdSpec::effective_step(std::span<const double> theta) const {
  if (!(step > 0.0)) throw ContractViolation("FdSpec: step must be positive");
  if (!scale_by_theta) return step;
  double inf = 0.0;
  for (double x : theta) inf = std::max(inf, std::abs(x));
  return step * (1.0 + inf);
}

ParamVector fd_gradient(const ScalarFn& f, std::span<const double> theta, const FdSpec& spec) {
  const double e = spec.effective_step(theta);
  ParamVector x(theta.begin(), theta.end());
  ParamVector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + e;
    const double fp = eval_checked(f, x, i);
    x[i] = xi - e;
    const double fm = eval_checked(f, x, i);
    x[i] = xi;
    g[i] = (fp - fm) / (2.0 * e);
  }
  return g;
}

Matrix fd_hessian_dense(const ScalarFn& f, std::span<const double> theta, const FdSpec& spec) {
  const std::size_t d = theta.size();
  check_dim(d, "fd_hessian_dense");
  const double e = spec.effective_step(theta);
  ParamVector x(theta.begin(), theta.end());
  Matrix h(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double acc = 0.0;
      for (int si : {1, -1})
        for (int sj : {1, -1}) {
          x[i] += si * e;
          x[j] += sj * e;
          acc += si * sj * eval_checked(f, x, i);
          x[i] = theta[i];
          x[j] = theta[j];
        }
      h(i, j) = h(j, i) = acc / (4.0 * e * e);
    }
  }
  return 0.5 * (h + h.transpose());
}

QvTables exact_q_v(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                   std::span<const double> theta) {
  const auto pi = policy_table(mdp, policy, theta);
  const auto H = static_cast<std::size_t>(mdp.horizon);
  QvTables out;
  out.q.assign(H + 1, StateActionTable{});
  out.v.assign(H + 1, std::array<double, S>{});
  for (std::size_t t = H; t-- > 0;) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        double cont = 0.0;
        for (int n = 0; n < S; ++n) cont += mdp.transition[s][a][n] * out.v[t + 1][n];
        out.q[t][s][a] = mdp.reward[s][a] + mdp.gamma * cont;
        out.v[t][s] += pi[s][a] * out.q[t][s][a];
      }
    }
  }
  return out;
}

QProvider live_q_provider(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy) {
  return [mdp, policy](std::span<const double> theta) {
    auto q = exact_q_v(mdp, policy, theta).q;
    q.pop_back();
    return q;
  };
}

QProvider frozen_q_provider(std::vector<StateActionTable> q) {
  return [q = std::move(q)](std::span<const double>) { return q; };
}

ExactBatch exact_batch(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                       std::span<const double> theta) {
  const auto rho = exact_occupancy_by_step(mdp, policy, theta);
  const auto qv = exact_q_v(mdp, policy, theta);
  ExactBatch out{SampleBatch(mdp.feature_dim()), {}, {}, {}, {}, {}, {}};
  for (int t = 0; t < mdp.horizon; ++t)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        out.batch.add(mdp.features[s], Action{a}, rho[t][s][a]);
        out.q.push_back(qv.q[t][s][a]);
        out.value.push_back(qv.v[t][s]);
        out.advantage.push_back(qv.q[t][s][a] - qv.v[t][s]);
        out.step.push_back(t);
        out.state.push_back(s);
        out.action.push_back(a);
      }
  return out;
}

ParamVector exact_gradient(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                           std::span<const double> theta) {
  const auto rho = exact_occupancy_by_step(mdp, policy, theta);
  const auto qv = exact_q_v(mdp, policy, theta);
  const auto pi = policy_table(mdp, policy, theta);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy.dim()));
  for (int t = 0; t < mdp.horizon; ++t)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const auto score = softmax_score(mdp.features[s], a, pi[s]);
        g += rho[t][s][a] * qv.q[t][s][a] * as_vec(score);
      }
  return {g.data(), g.data() + g.size()};
}

Matrix dense_operator(const SymmetricOperator& op) {
  const std::size_t d = op.dim();
  check_dim(d, "dense_operator");
  Matrix m(d, d);
  ParamVector e(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    e[i] = 1.0;
    const ParamVector col = op.apply(e);
    e[i] = 0.0;
    for (std::size_t r = 0; r < d; ++r) m(r, i) = col[r];
  }
  return m;
}

Matrix dense_outer_product(const SampleBatch& batch, const Policy& policy,
                           std::span<const double> weights) {
  const std::size_t d = policy.dim();
  check_dim(d, "dense_outer_product");
  Matrix m = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const ParamVector g = policy.grad_log_prob(batch.state(i), batch.actions[i]);
    m += batch.measure[i] * weights[i] * as_vec(g) * as_vec(g).transpose();
  }
  return m;
}

Matrix dense_intrinsic_fd(const SampleBatch& batch, const Policy& policy,
                          std::span<const double> weights, const FdSpec& spec) {
  auto probe = policy.clone();
  const ScalarFn f = [&](std::span<const double> theta) {
    probe->set_params(theta);
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i)
      acc += batch.measure[i] * weights[i] * probe->log_prob(batch.state(i), batch.actions[i]);
    return acc;
  };
  return fd_hessian_dense(f, policy.params(), spec);
}

Decomposition hessian_decomposition(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                                    std::span<const double> theta, const QProvider& q_provider,
                                    const FdSpec& spec) {
  const std::size_t d = policy.dim();
  check_dim(d, "hessian_decomposition");
  const auto rho = exact_occupancy_by_step(mdp, policy, theta);
  const auto pi = policy_table(mdp, policy, theta);
  const auto q = q_provider(theta);
  if (q.size() < static_cast<std::size_t>(mdp.horizon))
    throw ContractViolation("hessian_decomposition: provider returned too few steps");

  // dq[i][t][s][a] = d Q_t(s, a) / d theta_i
  const double e = spec.effective_step(theta);
  std::vector<std::vector<StateActionTable>> dq(d);
  ParamVector x(theta.begin(), theta.end());
  for (std::size_t i = 0; i < d; ++i) {
    x[i] = theta[i] + e;
    const auto qp = q_provider(x);
    x[i] = theta[i] - e;
    const auto qm = q_provider(x);
    x[i] = theta[i];
    dq[i].resize(mdp.horizon);
    for (int t = 0; t < mdp.horizon; ++t)
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) dq[i][t][s][a] = (qp[t][s][a] - qm[t][s][a]) / (2.0 * e);
  }

  Decomposition out{Matrix::Zero(d, d), Matrix::Zero(d, d), Matrix::Zero(d, d)};
  Eigen::VectorXd grad_q(d);
  for (int s = 0; s < S; ++s) {
    const Matrix h_log = softmax_log_hessian(mdp.features[s], pi[s]);
    for (int a = 0; a < A; ++a) {
      const ParamVector score = softmax_score(mdp.features[s], a, pi[s]);
      const auto g = as_vec(score);
      for (int t = 0; t < mdp.horizon; ++t) {
        const double w = rho[t][s][a];
        out.h1 += w * q[t][s][a] * g * g.transpose();
        out.h2 += w * q[t][s][a] * h_log;
        for (std::size_t i = 0; i < d; ++i) grad_q[i] = dq[i][t][s][a];
        out.h12 += w * g * grad_q.transpose();
      }
    }
  }
  return out;
}

ScalarFn frozen_objective(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                          std::span<const double> theta0) {
  const auto rho = exact_occupancy_by_step(mdp, policy, theta0);
  auto q = exact_q_v(mdp, policy, theta0).q;
  std::vector<std::array<double, S>> dist(mdp.horizon);
  for (int t = 0; t < mdp.horizon; ++t)
    for (int s = 0; s < S; ++s) dist[t][s] = rho[t][s][0] + rho[t][s][1];
  return [mdp, policy, dist, q](std::span<const double> theta) {
    const auto pi = policy_table(mdp, policy, theta);
    double j = 0.0;
    for (std::size_t t = 0; t < dist.size(); ++t)
      for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) j += dist[t][s] * pi[s][a] * q[t][s][a];
    return j;
  };
}

Extremes dense_extremes(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (symmetric + symmetric.transpose()),
                                           Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("dense_extremes: eigensolver failed");
  const auto& ev = es.eigenvalues();
  return {ev.minCoeff(), ev.maxCoeff()};
}

ParamVector dense_solve(const Matrix& a, std::span<const double> b) {
  const Eigen::VectorXd x = a.fullPivLu().solve(as_vec(b));
  return {x.data(), x.data() + x.size()};
}

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double symmetry_error(const Matrix& m) { return max_abs(m - m.transpose()); }

}  // namespace sottac::oracle
