#include "sottac/tinymdp.hpp"

namespace sottac {

namespace {

void check_policy(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                  std::span<const double> theta) {
  mdp.validate();
  if (policy.state_dim() != mdp.feature_dim() || policy.n_actions() != TinyMdp::kActions ||
      theta.size() != policy.dim())
    throw ContractViolation("TinyMdp exact: policy does not match the MDP");
}

}  // namespace

StateActionTable policy_table(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                              std::span<const double> theta) {
  check_policy(mdp, policy, theta);
  StateActionTable pi{};
  for (int s = 0; s < TinyMdp::kStates; ++s)
    SoftmaxLinearPolicy::probabilities(theta, mdp.features[s], TinyMdp::kActions, pi[s]);
  return pi;
}

double enumerate_exact_J(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                         std::span<const double> theta) {
  const auto pi = policy_table(mdp, policy, theta);
  std::array<double, TinyMdp::kStates> v_next{};  // V_H = 0
  for (int t = mdp.horizon - 1; t >= 0; --t) {
    std::array<double, TinyMdp::kStates> v{};
    for (int s = 0; s < TinyMdp::kStates; ++s)
      for (int a = 0; a < TinyMdp::kActions; ++a) {
        double cont = 0.0;
        for (int n = 0; n < TinyMdp::kStates; ++n) cont += mdp.transition[s][a][n] * v_next[n];
        v[s] += pi[s][a] * (mdp.reward[s][a] + mdp.gamma * cont);
      }
    v_next = v;
  }
  double j = 0.0;
  for (int s = 0; s < TinyMdp::kStates; ++s) j += mdp.initial[s] * v_next[s];
  return j;
}

std::vector<StateActionTable> exact_occupancy_by_step(const TinyMdp& mdp,
                                                      const SoftmaxLinearPolicy& policy,
                                                      std::span<const double> theta) {
  const auto pi = policy_table(mdp, policy, theta);
  std::vector<StateActionTable> rho(mdp.horizon);
  std::array<double, TinyMdp::kStates> dist{mdp.initial[0], mdp.initial[1]};
  double discount = 1.0;
  for (int t = 0; t < mdp.horizon; ++t) {
    std::array<double, TinyMdp::kStates> next{};
    for (int s = 0; s < TinyMdp::kStates; ++s)
      for (int a = 0; a < TinyMdp::kActions; ++a) {
        const double p = dist[s] * pi[s][a];
        rho[t][s][a] = discount * p;
        for (int n = 0; n < TinyMdp::kStates; ++n) next[n] += p * mdp.transition[s][a][n];
      }
    dist = next;
    discount *= mdp.gamma;
  }
  return rho;
}

StateActionTable exact_occupancy(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                                 std::span<const double> theta) {
  StateActionTable total{};
  for (const auto& step : exact_occupancy_by_step(mdp, policy, theta))
    for (int s = 0; s < TinyMdp::kStates; ++s)
      for (int a = 0; a < TinyMdp::kActions; ++a) total[s][a] += step[s][a];
  return total;
}

}  // namespace sottac
