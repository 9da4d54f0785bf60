#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pfqi {

// Finite MDP with an explicit transition tensor P[s][a][s'], an expected
// reward table r[s][a], and discount gamma in [0, 1). Stochastic rewards are
// an environment-level concern; all exact machinery works on expected rewards.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transition;  // P[s][a][s'], row-major, each row a distribution
  std::vector<double> reward;      // r[s][a]
  double discount = 0.0;
  double r_max = 0.0;

  TabularMdp() = default;
  TabularMdp(int states, int actions, double gamma);

  double p(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double& p(int s, int a, int s2) {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  std::span<const double> row(int s, int a) const {
    return {transition.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states,
            static_cast<std::size_t>(n_states)};
  }
  double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions + a]; }
  double& r(int s, int a) { return reward[static_cast<std::size_t>(s) * n_actions + a]; }

  // Throws std::invalid_argument if any transition row fails to sum to 1
  // within 1e-12, has a negative entry, |r| exceeds r_max, or gamma is
  // outside [0, 1).
  void validate() const;
};

// Stochastic Markovian stationary policy as an explicit table pi[s][a].
// Rows must sum to 1 within 1e-12.
struct TabularDistPolicy {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> prob;  // pi[s][a], row-major

  TabularDistPolicy() = default;
  TabularDistPolicy(int states, int actions) : n_states(states), n_actions(actions) {
    prob.assign(static_cast<std::size_t>(states) * actions, 0.0);
  }

  static TabularDistPolicy deterministic(int n_states, int n_actions,
                                         const std::vector<int>& actions);
  static TabularDistPolicy uniform(int n_states, int n_actions);

  double pi(int s, int a) const { return prob[static_cast<std::size_t>(s) * n_actions + a]; }
  double& pi(int s, int a) { return prob[static_cast<std::size_t>(s) * n_actions + a]; }

  // True when every state puts all mass on one action and it is the same
  // action everywhere.
  bool constant_action() const;

  void validate() const;
};

// One base-MDP interaction tuple. `terminal` marks an environment-absorbing
// next state (future value 0); horizon truncation is never flagged here, so
// bootstrapping stays legal at trajectory tails.
struct Transition {
  std::vector<double> state;
  int action = 0;
  std::vector<double> next_state;
  double reward = 0.0;
  bool terminal = false;
};

struct Trajectory {
  std::vector<double> initial_state;
  std::vector<Transition> transitions;

  // Checks the chaining invariant: next_state of element t equals state of
  // element t+1, and the first state equals initial_state.
  void validate() const;
};

struct DatasetManifest {
  std::string env_name;
  int sampling_persistence = 1;
  bool collected_in_persistent_env = false;
  std::uint64_t seed = 0;
  std::size_t n_samples = 0;
  double discount = 0.0;
  int state_dim = 0;
  std::vector<std::vector<double>> action_set;  // primitive action vectors, by index

  int n_actions() const { return static_cast<int>(action_set.size()); }
};

// Immutable batch of trajectories plus the manifest recording how it was
// collected. The sampling distribution nu is whatever produced the data; it
// is recorded here, never modeled.
struct Dataset {
  std::vector<Trajectory> trajectories;
  DatasetManifest manifest;

  std::size_t n_samples() const;
  void validate() const;

  // Identity hash used to detect mixing runs trained on different data.
  std::uint64_t content_key() const;
};

}  // namespace pfqi
