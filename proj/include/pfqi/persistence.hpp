#pragma once

#include <memory>

#include "pfqi/env.hpp"
#include "pfqi/mdp.hpp"
#include "pfqi/policy.hpp"

namespace pfqi {

// Builds the k-persistent MDP M_k = (S, A, (P^delta)^{k-1} P, r_k, gamma^k)
// with r_k = sum_{i=0}^{k-1} gamma^i (P^delta)^i r. The state-action kernel
// P^delta is never materialized: for a held action the state marginal is
// propagated through P[.][a][.] k-1 times, keeping memory at O(|S|).
// k = 1 returns a bitwise-equal copy of m.
TabularMdp build_persistent_tabular(const TabularMdp& m, int k);

// Rolls the k-persistent policy induced by `policy` through `env`: the
// policy is queried at steps with t mod k == 0 and the held action replayed
// otherwise. Records one base transition per step; stops at the horizon or
// at a terminal transition. Policy draws and environment noise use separate
// streams derived from `seed`, so decision epochs line up across the two
// faces of persistence under a matched seed.
Trajectory persistent_rollout(Environment& env, const Policy& policy, int k, int horizon,
                              std::uint64_t seed);

// Environment view of persistence: one step of the wrapper applies the
// chosen action k times in the inner environment and returns the k-th state
// together with the aggregated reward sum_{i=0}^{k-1} gamma^i R_{t+i}. Early
// inner termination ends the outer step with the partial aggregate. The
// wrapper's spec carries discount gamma^k and horizon floor(H / k).
std::unique_ptr<Environment> wrap_persistent_env(std::unique_ptr<Environment> env, int k);

// Non-owning variant; the caller keeps `env` alive.
std::unique_ptr<Environment> wrap_persistent_env(Environment& env, int k);

struct EpisodeReturn {
  double discounted = 0.0;    // sum_t gamma^t R_t with the base discount
  double undiscounted = 0.0;  // sum_t R_t
  int steps = 0;
};

EpisodeReturn episode_return(const Trajectory& traj, double gamma);

}  // namespace pfqi
