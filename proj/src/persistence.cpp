#include "pfqi/persistence.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace pfqi {

TabularMdp build_persistent_tabular(const TabularMdp& m, int k) {
  if (k < 1) throw std::invalid_argument("build_persistent_tabular: k must be >= 1");
  m.validate();
  if (k == 1) return m;

  TabularMdp out(m.n_states, m.n_actions, std::pow(m.discount, k));
  out.r_max = m.r_max * (1.0 - std::pow(m.discount, k)) / (1.0 - m.discount);

  std::vector<double> dist(m.n_states), next(m.n_states);
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      // dist holds the state marginal after i steps under the held action.
      std::fill(dist.begin(), dist.end(), 0.0);
      dist[s] = 1.0;
      double reward_acc = 0.0;
      double gamma_pow = 1.0;
      for (int i = 0; i < k; ++i) {
        for (int si = 0; si < m.n_states; ++si) {
          if (dist[si] != 0.0) reward_acc += gamma_pow * dist[si] * m.r(si, a);
        }
        gamma_pow *= m.discount;
        std::fill(next.begin(), next.end(), 0.0);
        for (int si = 0; si < m.n_states; ++si) {
          const double w = dist[si];
          if (w == 0.0) continue;
          for (int s2 = 0; s2 < m.n_states; ++s2) next[s2] += w * m.p(si, a, s2);
        }
        dist.swap(next);
      }
      out.r(s, a) = reward_acc;
      for (int s2 = 0; s2 < m.n_states; ++s2) out.p(s, a, s2) = dist[s2];
    }
  }
  out.validate();
  return out;
}

Trajectory persistent_rollout(Environment& env, const Policy& policy, int k, int horizon,
                              std::uint64_t seed) {
  if (horizon < 1) throw std::invalid_argument("persistent_rollout: horizon must be >= 1");
  Trajectory traj;
  std::vector<double> state = env.reset(rng::derive(seed, rng::kEnv));
  traj.initial_state = state;
  auto policy_rng = rng::engine(rng::derive(seed, rng::kPolicy));
  PersistentExecutor executor(policy, k);
  executor.reset();
  for (int t = 0; t < horizon; ++t) {
    const int action = executor.act(state, policy_rng);
    StepResult step = env.step(action);
    traj.transitions.push_back(
        Transition{state, action, step.next_state, step.reward, step.terminal});
    state = std::move(step.next_state);
    if (step.terminal) break;
  }
  return traj;
}

namespace {

class PersistentEnvWrapper final : public Environment {
 public:
  PersistentEnvWrapper(Environment& inner, std::unique_ptr<Environment> owned, int k)
      : inner_(&inner), owned_(std::move(owned)), k_(k) {
    const EnvSpec& base = inner_->spec();
    spec_ = base;
    spec_.name = base.name + "_k" + std::to_string(k);
    spec_.base_timestep = base.base_timestep * k;
    spec_.horizon = std::max(1, base.horizon / k);
    spec_.discount = std::pow(base.discount, k);
    spec_.original_horizon = base.horizon;
    spec_.original_discount = base.discount;
  }

  const EnvSpec& spec() const override { return spec_; }

  std::vector<double> reset(std::uint64_t seed) override {
    done_ = false;
    return inner_->reset(seed);
  }

  StepResult step(int action) override {
    if (done_) throw std::logic_error("PersistentEnvWrapper: step after terminal");
    const double gamma = inner_->spec().discount;
    double reward = 0.0;
    double gamma_pow = 1.0;
    StepResult last;
    for (int i = 0; i < k_; ++i) {
      last = inner_->step(action);
      reward += gamma_pow * last.reward;
      gamma_pow *= gamma;
      if (last.terminal) break;
    }
    done_ = last.terminal;
    return StepResult{std::move(last.next_state), reward, last.terminal};
  }

 private:
  Environment* inner_;
  std::unique_ptr<Environment> owned_;
  int k_;
  EnvSpec spec_;
  bool done_ = false;
};

}  // namespace

std::unique_ptr<Environment> wrap_persistent_env(std::unique_ptr<Environment> env, int k) {
  if (k < 1) throw std::invalid_argument("wrap_persistent_env: k must be >= 1");
  Environment& ref = *env;
  return std::make_unique<PersistentEnvWrapper>(ref, std::move(env), k);
}

std::unique_ptr<Environment> wrap_persistent_env(Environment& env, int k) {
  if (k < 1) throw std::invalid_argument("wrap_persistent_env: k must be >= 1");
  return std::make_unique<PersistentEnvWrapper>(env, nullptr, k);
}

EpisodeReturn episode_return(const Trajectory& traj, double gamma) {
  EpisodeReturn out;
  double gamma_pow = 1.0;
  for (const Transition& tr : traj.transitions) {
    out.discounted += gamma_pow * tr.reward;
    out.undiscounted += tr.reward;
    gamma_pow *= gamma;
    ++out.steps;
  }
  return out;
}

}  // namespace pfqi
