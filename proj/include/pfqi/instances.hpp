#pragma once

#include <random>

#include "pfqi/mdp.hpp"

namespace pfqi {

// Seeded generators for randomized verification instances.

// Dense stochastic MDP: rows drawn from a symmetric Dirichlet (via
// normalized exponentials), rewards uniform in [-1, 1] with r_max = 1,
// discount uniform in [0.3, max_gamma].
TabularMdp random_mdp(std::mt19937_64& g, int max_states, int max_actions,
                      double max_gamma = 0.95);

// Deterministic transitions, rewards uniform in [-1, 1].
TabularMdp random_deterministic_mdp(std::mt19937_64& g, int max_states, int max_actions,
                                    double max_gamma = 0.9);

TabularDistPolicy random_stochastic_policy(std::mt19937_64& g, int n_states, int n_actions);

std::vector<double> random_distribution(std::mt19937_64& g, int n);

// Synthetic batch over a tabular MDP: n single-transition trajectories whose
// (s, a) pairs sweep the state-action grid round-robin, so any n >= |S||A|
// covers every pair. Next states are sampled from P; no transition is ever
// terminal (absorbing states keep their value).
Dataset synthetic_tabular_dataset(const TabularMdp& m, std::size_t n, std::uint64_t seed);

}  // namespace pfqi
