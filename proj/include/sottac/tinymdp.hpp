#pragma once

// Exact quantities of a TinyMdp under a softmax policy, by dynamic
// programming over (t, s). No sampling.

#include <array>
#include <span>
#include <vector>

#include "sottac/env.hpp"
#include "sottac/policy.hpp"

namespace sottac {

using StateActionTable = std::array<std::array<double, TinyMdp::kActions>, TinyMdp::kStates>;

/// pi(a|s) for every state of the MDP.
StateActionTable policy_table(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                              std::span<const double> theta);

/// J(theta) = E[sum_{t<H} gamma^t R(s_t, a_t)] by backward recursion.
double enumerate_exact_J(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                         std::span<const double> theta);

/// rho_t(s, a) = gamma^t Pr(s_t = s, a_t = a) for t = 0..H-1, by forward recursion.
std::vector<StateActionTable> exact_occupancy_by_step(const TinyMdp& mdp,
                                                      const SoftmaxLinearPolicy& policy,
                                                      std::span<const double> theta);

/// rho_gamma(s, a) = sum_t rho_t(s, a). Sums to (1 - gamma^H) / (1 - gamma).
StateActionTable exact_occupancy(const TinyMdp& mdp, const SoftmaxLinearPolicy& policy,
                                 std::span<const double> theta);

}  // namespace sottac
