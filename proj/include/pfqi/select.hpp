#pragma once

#include <map>
#include <vector>

#include "pfqi/pfqi.hpp"

namespace pfqi {

struct SelectionRow {
  int k = 0;
  double j_hat = 0.0;     // mean over trajectory heads of max_a Q_k(s, a)
  double residual = 0.0;  // || Q~_k - Q_k ||_{1,D} over visited pairs
  double index = 0.0;     // B_k = j_hat - residual / (1 - gamma^k)
};

struct SelectionReport {
  std::vector<SelectionRow> rows;
  int chosen = 0;  // argmax of the index; ties break toward smaller k
};

// Mean over the given initial states of the state value max_a q(s, a).
double estimate_return(const QFunction& q, const std::vector<std::vector<double>>& initial_states);

// Mean absolute difference between two Q-functions over every state-action
// pair visited by the dataset: (1 / sum_i H_i) sum_i sum_t |q~ - q|.
double empirical_bellman_residual(const QFunction& q, const QFunction& q_tilde, const Dataset& ds);
double empirical_bellman_residual(const QFunction& q, const QFunction& q_tilde,
                                  const FlatBatch& batch);

// Ranks candidate persistences by the index B_k = J_hat_k - residual/(1-gamma^k),
// where Q_k is the run's final model and Q~_k its k-iteration continuation
// (one more complete persistent-operator application). All runs must have
// been trained on `ds`; a run without a continuation is rejected.
SelectionReport select_persistence(const std::map<int, const PersistenceRun*>& runs,
                                   const Dataset& ds, double gamma);

// Loss of deploying the chosen persistence instead of the empirically best
// one: max_k evals[k] - evals[chosen]. Non-negative by construction.
double performance_loss(const std::map<int, double>& evals, int chosen);

}  // namespace pfqi
