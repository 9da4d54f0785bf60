#pragma once

#include <memory>
#include <optional>
#include <string>

#include "pfqi/env.hpp"
#include "pfqi/mdp.hpp"
#include "pfqi/policy.hpp"

namespace pfqi {

// Optional overrides for make_env. Unset fields keep the per-environment
// defaults. Overriding m recomputes the timestep, horizon, and discount from
// the original values; horizon/discount can also be pinned directly.
struct EnvOverrides {
  std::optional<int> discretization_factor;
  std::optional<int> horizon;
  std::optional<double> discount;
  std::optional<double> counterexample_reward;    // R
  std::optional<double> counterexample_discount;  // gamma
  std::optional<std::string> tabular_file;        // path for name "tabular-file"
};

// Builds a named environment:
//   cartpole | mountaincar | pendulum | acrobot  - classic-control dynamics
//       integrated at base_timestep = original_timestep / m,
//   counterexample | counterexample(R,gamma)     - the four-state MDP whose
//       persistence loss is maximal,
//   tabular-file | tabular-file:<path>           - a TabularMdp loaded from
//       a JSON document {n_states, n_actions, P, r, gamma, ...}.
// Unknown names and non-integer factors are rejected.
std::unique_ptr<Environment> make_env(const std::string& name, const EnvOverrides& o = {});

// Wraps an explicit tabular MDP as a simulator. States are index-coded as
// 1-vectors; initial states are drawn from `initial_dist` (uniform when
// empty). Tabular episodes never signal terminal: absorbing states keep
// emitting their reward, so truncation is the rollout's job.
std::unique_ptr<Environment> make_tabular_env(TabularMdp mdp, std::vector<double> initial_dist = {},
                                              std::string name = "tabular", int horizon = 256);

enum class CollectPolicy { kUniform, kGreedy };

struct CollectOptions {
  CollectPolicy policy = CollectPolicy::kUniform;
  const QFunction* greedy_q = nullptr;  // required for kGreedy
  int k_sampling = 1;
  bool in_persistent_env = false;  // record aggregated k-step tuples instead
  int n_trajectories = 1;
  std::size_t max_samples = 0;  // 0 = no budget; otherwise stop (and truncate) at this count
  std::uint64_t seed = 0;
};

// Collects a batch. In the default mode the behavior policy runs at
// persistence k_sampling but every intermediate repeated action is recorded
// as its own base-MDP tuple. With in_persistent_env the environment is
// wrapped instead and the dataset holds aggregated k-step transitions of
// M_k (the manifest's discount then equals gamma^k).
Dataset collect_dataset(Environment& env, const CollectOptions& opts);

}  // namespace pfqi
