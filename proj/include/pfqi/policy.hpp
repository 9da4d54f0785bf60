#pragma once

#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "pfqi/qfunction.hpp"
#include "pfqi/rng.hpp"

namespace pfqi {

// A policy over a finite action set. Deterministic policies ignore the
// engine argument; stochastic ones consume exactly one draw per query, which
// keeps rollouts reproducible under matched seeds.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual int act(std::span<const double> state, std::mt19937_64& g) const = 0;
};

class UniformPolicy final : public Policy {
 public:
  explicit UniformPolicy(int n_actions) : n_actions_(n_actions) {
    if (n_actions <= 0) throw std::invalid_argument("UniformPolicy: need at least one action");
  }
  int act(std::span<const double>, std::mt19937_64& g) const override {
    return rng::index(g, n_actions_);
  }

 private:
  int n_actions_;
};

// Greedy wrapper over a Q-function; ties break toward the lowest index.
// Does not own the Q-function.
class GreedyPolicy final : public Policy {
 public:
  explicit GreedyPolicy(const QFunction& q) : q_(&q) {}
  int act(std::span<const double> state, std::mt19937_64&) const override {
    return q_argmax(*q_, state);
  }

 private:
  const QFunction* q_;
};

// Deterministic policy for index-coded tabular states (state = [s]).
class TabularPolicy final : public Policy {
 public:
  explicit TabularPolicy(std::vector<int> actions) : actions_(std::move(actions)) {}
  int act(std::span<const double> state, std::mt19937_64&) const override {
    int s = static_cast<int>(state[0]);
    return actions_.at(static_cast<std::size_t>(s));
  }

 private:
  std::vector<int> actions_;
};

// Executes an inner policy at a fixed persistence: the inner policy is
// queried exactly at steps with t mod k == 0, the held action is replayed
// otherwise. The counter is per-episode; reset() must be called at episode
// start, which also drops any held action.
class PersistentExecutor {
 public:
  PersistentExecutor(const Policy& inner, int persistence)
      : inner_(&inner), persistence_(persistence) {
    if (persistence < 1) throw std::invalid_argument("PersistentExecutor: persistence must be >= 1");
  }

  void reset() {
    step_ = 0;
    held_ = -1;
  }

  int act(std::span<const double> state, std::mt19937_64& g) {
    if (step_ % persistence_ == 0) {
      held_ = inner_->act(state, g);
    }
    ++step_;
    return held_;
  }

  int persistence() const { return persistence_; }
  int step_count() const { return step_; }

 private:
  const Policy* inner_;
  int persistence_;
  int step_ = 0;
  int held_ = -1;
};

}  // namespace pfqi
