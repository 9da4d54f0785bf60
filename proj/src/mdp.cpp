#include "pfqi/mdp.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "pfqi/rng.hpp"

namespace pfqi {

namespace {
constexpr double kRowTol = 1e-12;
}

TabularMdp::TabularMdp(int states, int actions, double gamma)
    : n_states(states), n_actions(actions), discount(gamma) {
  if (states <= 0 || actions <= 0) {
    throw std::invalid_argument("TabularMdp: n_states and n_actions must be positive");
  }
  transition.assign(static_cast<std::size_t>(states) * actions * states, 0.0);
  reward.assign(static_cast<std::size_t>(states) * actions, 0.0);
}

void TabularMdp::validate() const {
  if (n_states <= 0 || n_actions <= 0) {
    throw std::invalid_argument("TabularMdp: empty state or action set");
  }
  if (!(discount >= 0.0 && discount < 1.0)) {
    throw std::invalid_argument("TabularMdp: discount must lie in [0, 1)");
  }
  if (transition.size() != static_cast<std::size_t>(n_states) * n_actions * n_states ||
      reward.size() != static_cast<std::size_t>(n_states) * n_actions) {
    throw std::invalid_argument("TabularMdp: table dimensions do not match");
  }
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        double v = p(s, a, s2);
        if (v < 0.0) {
          throw std::invalid_argument("TabularMdp: negative transition probability at (" +
                                      std::to_string(s) + "," + std::to_string(a) + ")");
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > kRowTol) {
        throw std::invalid_argument("TabularMdp: row (" + std::to_string(s) + "," +
                                    std::to_string(a) + ") sums to " + std::to_string(sum));
      }
      if (std::abs(r(s, a)) > r_max + 1e-12) {
        throw std::invalid_argument("TabularMdp: |r| exceeds r_max at (" + std::to_string(s) +
                                    "," + std::to_string(a) + ")");
      }
    }
  }
}

TabularDistPolicy TabularDistPolicy::deterministic(int n_states, int n_actions,
                                                   const std::vector<int>& actions) {
  if (static_cast<int>(actions.size()) != n_states) {
    throw std::invalid_argument("deterministic policy: need one action per state");
  }
  TabularDistPolicy pi(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    if (actions[s] < 0 || actions[s] >= n_actions) {
      throw std::invalid_argument("deterministic policy: action index out of range");
    }
    pi.pi(s, actions[s]) = 1.0;
  }
  return pi;
}

TabularDistPolicy TabularDistPolicy::uniform(int n_states, int n_actions) {
  TabularDistPolicy pi(n_states, n_actions);
  const double u = 1.0 / n_actions;
  for (double& v : pi.prob) v = u;
  return pi;
}

bool TabularDistPolicy::constant_action() const {
  int fixed = -1;
  for (int s = 0; s < n_states; ++s) {
    int arg = -1;
    for (int a = 0; a < n_actions; ++a) {
      if (pi(s, a) > 1.0 - 1e-12) arg = a;
    }
    if (arg < 0) return false;
    if (fixed < 0) fixed = arg;
    if (arg != fixed) return false;
  }
  return fixed >= 0;
}

void TabularDistPolicy::validate() const {
  if (prob.size() != static_cast<std::size_t>(n_states) * n_actions) {
    throw std::invalid_argument("TabularDistPolicy: dimension mismatch");
  }
  for (int s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      if (pi(s, a) < 0.0) throw std::invalid_argument("TabularDistPolicy: negative probability");
      sum += pi(s, a);
    }
    if (std::abs(sum - 1.0) > kRowTol) {
      throw std::invalid_argument("TabularDistPolicy: row " + std::to_string(s) +
                                  " sums to " + std::to_string(sum));
    }
  }
}

void Trajectory::validate() const {
  if (transitions.empty()) return;
  if (initial_state != transitions.front().state) {
    throw std::invalid_argument("Trajectory: initial_state differs from first transition state");
  }
  for (std::size_t t = 0; t + 1 < transitions.size(); ++t) {
    if (transitions[t].next_state != transitions[t + 1].state) {
      throw std::invalid_argument("Trajectory: broken chaining at step " + std::to_string(t));
    }
  }
}

std::size_t Dataset::n_samples() const {
  std::size_t n = 0;
  for (const auto& traj : trajectories) n += traj.transitions.size();
  return n;
}

void Dataset::validate() const {
  const int na = manifest.n_actions();
  for (const auto& traj : trajectories) {
    traj.validate();
    for (const auto& tr : traj.transitions) {
      if (tr.action < 0 || (na > 0 && tr.action >= na)) {
        throw std::invalid_argument("Dataset: action index out of range");
      }
      if (manifest.state_dim > 0 &&
          static_cast<int>(tr.state.size()) != manifest.state_dim) {
        throw std::invalid_argument("Dataset: state dimension mismatch");
      }
    }
  }
  if (manifest.n_samples != n_samples()) {
    throw std::invalid_argument("Dataset: manifest n_samples does not match transition count");
  }
}

std::uint64_t Dataset::content_key() const {
  std::uint64_t h = rng::hash64(manifest.seed);
  h = rng::combine(h, manifest.n_samples);
  h = rng::combine(h, static_cast<std::uint64_t>(manifest.sampling_persistence));
  h = rng::combine(h, static_cast<std::uint64_t>(manifest.collected_in_persistent_env));
  for (char c : manifest.env_name) h = rng::combine(h, static_cast<std::uint64_t>(c));
  return h;
}

}  // namespace pfqi
