#include "pfqi/select.hpp"

#include <cmath>
#include <stdexcept>

namespace pfqi {

double estimate_return(const QFunction& q, const std::vector<std::vector<double>>& initial_states) {
  if (initial_states.empty()) {
    throw std::invalid_argument("estimate_return: need at least one initial state");
  }
  double acc = 0.0;
  for (const auto& s : initial_states) acc += q_max(q, s);
  return acc / static_cast<double>(initial_states.size());
}

double empirical_bellman_residual(const QFunction& q, const QFunction& q_tilde,
                                  const FlatBatch& batch) {
  double acc = 0.0;
  for (std::size_t i = 0; i < batch.n; ++i) {
    const auto s = batch.states.row(i);
    acc += std::abs(q_tilde.value(s, batch.actions[i]) - q.value(s, batch.actions[i]));
  }
  return acc / static_cast<double>(batch.n);
}

double empirical_bellman_residual(const QFunction& q, const QFunction& q_tilde, const Dataset& ds) {
  return empirical_bellman_residual(q, q_tilde, FlatBatch::from(ds));
}

SelectionReport select_persistence(const std::map<int, const PersistenceRun*>& runs,
                                   const Dataset& ds, double gamma) {
  if (runs.empty()) throw std::invalid_argument("select_persistence: no candidate runs");
  const FlatBatch batch = FlatBatch::from(ds);
  std::vector<std::vector<double>> heads;
  heads.reserve(batch.heads.size());
  for (std::size_t h : batch.heads) {
    heads.emplace_back(batch.states.row(h).begin(), batch.states.row(h).end());
  }

  SelectionReport report;
  bool first = true;
  double best = 0.0;
  for (const auto& [k, run] : runs) {
    if (run == nullptr || run->final_q == nullptr) {
      throw std::invalid_argument("select_persistence: missing run for k=" + std::to_string(k));
    }
    if (run->tilde_q == nullptr) {
      throw std::invalid_argument("select_persistence: run for k=" + std::to_string(k) +
                                  " has no continuation Q^(J+k)");
    }
    if (run->config.persistence != k) {
      throw std::invalid_argument("select_persistence: run keyed under the wrong persistence");
    }
    if (run->dataset_key != ds.content_key()) {
      throw std::invalid_argument("select_persistence: run for k=" + std::to_string(k) +
                                  " was trained on a different dataset");
    }
    SelectionRow row;
    row.k = k;
    row.j_hat = estimate_return(*run->final_q, heads);
    row.residual = empirical_bellman_residual(*run->final_q, *run->tilde_q, batch);
    row.index = row.j_hat - row.residual / (1.0 - std::pow(gamma, k));
    report.rows.push_back(row);
    // std::map iterates in ascending k, so strict > keeps the smallest
    // maximizer.
    if (first || row.index > best) {
      best = row.index;
      report.chosen = k;
      first = false;
    }
  }
  return report;
}

double performance_loss(const std::map<int, double>& evals, int chosen) {
  auto it = evals.find(chosen);
  if (it == evals.end()) {
    throw std::invalid_argument("performance_loss: chosen persistence has no evaluation");
  }
  double best = it->second;
  for (const auto& [k, v] : evals) best = std::max(best, v);
  return best - it->second;
}

}  // namespace pfqi
