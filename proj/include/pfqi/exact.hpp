#pragma once

#include <vector>

#include "pfqi/mdp.hpp"
#include "pfqi/qfunction.hpp"

namespace pfqi {

// Dense action-value table Q[s][a].
struct TabularQ {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> v;

  TabularQ() = default;
  TabularQ(int states, int actions, double fill = 0.0)
      : n_states(states), n_actions(actions) {
    v.assign(static_cast<std::size_t>(states) * actions, fill);
  }

  double at(int s, int a) const { return v[static_cast<std::size_t>(s) * n_actions + a]; }
  double& at(int s, int a) { return v[static_cast<std::size_t>(s) * n_actions + a]; }

  double state_value(int s) const;  // max over actions
  std::vector<int> greedy_actions() const;  // lowest index wins ties
};

// Adapter so exact tables can be used wherever a QFunction is expected
// (states are index-coded as 1-vectors). Does not own the table.
class TabularQView final : public QFunction {
 public:
  explicit TabularQView(const TabularQ& q) : q_(&q) {}
  int n_actions() const override { return q_->n_actions; }
  double value(std::span<const double> state, int action) const override {
    return q_->at(static_cast<int>(state[0]), action);
  }

 private:
  const TabularQ* q_;
};

double sup_distance(const TabularQ& a, const TabularQ& b);

// One exact application of the Bellman expectation operator:
// (T^pi q)(s,a) = r(s,a) + gamma * sum_s' P(s'|s,a) sum_a' pi(a'|s') q(s',a').
TabularQ apply_expectation(const TabularMdp& m, const TabularDistPolicy& pi, const TabularQ& q);

// Bellman optimal operator: bootstrap with max over next actions.
TabularQ apply_optimal(const TabularMdp& m, const TabularQ& q);

// Bellman persistent operator: the bootstrap reuses the SAME action,
// (T^delta q)(s,a) = r(s,a) + gamma * sum_s' P(s'|s,a) q(s',a).
TabularQ apply_persistent(const TabularMdp& m, const TabularQ& q);

// Fixed-point solvers via value iteration. The stopping rule bounds the
// distance to the fixed point: iteration ends once the sup-norm residual
// drops below tol*(1-gamma)/gamma, which guarantees ||q - q_fix|| <= tol.
TabularQ solve_q(const TabularMdp& m, const TabularDistPolicy& pi, double tol = 1e-10);
TabularQ solve_q(const TabularMdp& m, double tol = 1e-10);

enum class PersistentMethod {
  kComposition,  // iterate (T^delta)^{k-1} T, a gamma^k contraction
  kExplicit,     // build the k-persistent MDP and solve it directly
};

// Fixed point of the k-persistent optimal operator (T^delta)^{k-1} T*.
TabularQ solve_q_persistent(const TabularMdp& m, int k, double tol = 1e-10,
                            PersistentMethod method = PersistentMethod::kComposition);
// Fixed point of the k-persistent expectation operator (T^delta)^{k-1} T^pi.
TabularQ solve_q_persistent(const TabularMdp& m, const TabularDistPolicy& pi, int k,
                            double tol = 1e-10,
                            PersistentMethod method = PersistentMethod::kComposition);

// Everything needed to check the persistence performance-loss bound on one
// instance: ||Q^pi - Q^pi_k||_{p,rho} <= coefficient * ||d||_{p,eta}.
struct BoundReport {
  int k = 1;
  double p = 1.0;
  double lhs = 0.0;
  double coefficient = 0.0;
  double dissimilarity_norm = 0.0;
  double rhs = 0.0;
  std::vector<double> eta;  // weights over (s,a), row-major; empty for k = 1
};

// Evaluates the bound exactly on a finite MDP. rho is a distribution over
// state-action pairs (row-major, must sum to 1). For k = 1 both sides vanish
// and a zero report is returned. The weight measure eta is computed in
// closed form by solving the two Neumann-series linear systems
//   sum_{i>=1} gamma^i rho (P^pi)^{i-1}  minus its k-step subseries,
// then normalizing by gamma(1-gamma^{k-1}) / ((1-gamma)(1-gamma^k)).
BoundReport persistence_loss_bound(const TabularMdp& m, const TabularDistPolicy& pi,
                                   const std::vector<double>& rho, int k, double p,
                                   double tol = 1e-12);

// The four-state, two-action MDP whose persistence loss attains the global
// cap 2*gamma*R/(1-gamma) for every persistence k >= 2. States are indexed
// s- = 0, s1 = 1, s2 = 2 (absorbing, +R), s3 = 3 (absorbing, -R).
TabularMdp counterexample_mdp(double R, double gamma);

inline constexpr int kCounterexampleStart = 0;

}  // namespace pfqi
