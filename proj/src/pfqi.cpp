#include "pfqi/pfqi.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pfqi/rng.hpp"

namespace pfqi {

FlatBatch FlatBatch::from(const Dataset& ds) {
  ds.validate();
  FlatBatch b;
  b.state_dim = ds.manifest.state_dim;
  b.n_actions = ds.manifest.n_actions();
  b.discount = ds.manifest.discount;
  b.n = ds.n_samples();
  if (b.n == 0) throw std::invalid_argument("FlatBatch: dataset is empty");
  b.states = FeatureMatrix(b.n, b.state_dim);
  b.next_states = FeatureMatrix(b.n, b.state_dim);
  b.actions.resize(b.n);
  b.rewards.resize(b.n);
  b.terminals.resize(b.n);
  b.by_action.assign(static_cast<std::size_t>(b.n_actions), {});
  std::size_t i = 0;
  for (const auto& traj : ds.trajectories) {
    if (traj.transitions.empty()) continue;
    b.heads.push_back(i);
    for (const auto& tr : traj.transitions) {
      std::copy(tr.state.begin(), tr.state.end(), b.states.row_mut(i));
      std::copy(tr.next_state.begin(), tr.next_state.end(), b.next_states.row_mut(i));
      b.actions[i] = tr.action;
      b.rewards[i] = tr.reward;
      b.terminals[i] = tr.terminal ? 1 : 0;
      b.by_action[static_cast<std::size_t>(tr.action)].push_back(i);
      b.r_abs_max = std::max(b.r_abs_max, std::abs(tr.reward));
      ++i;
    }
  }
  return b;
}

std::vector<double> compute_targets(const QFunction& q, const FlatBatch& batch, TargetMode mode,
                                    double gamma, std::uint64_t* eval_count) {
  if (batch.n == 0) throw std::invalid_argument("compute_targets: empty batch");
  std::vector<double> y(batch.n);
  std::uint64_t evals = 0;
  for (std::size_t i = 0; i < batch.n; ++i) {
    if (batch.terminals[i]) {
      y[i] = batch.rewards[i];
      continue;
    }
    const auto next = batch.next_states.row(i);
    double bootstrap;
    if (mode == TargetMode::kOptimal) {
      bootstrap = q.value(next, 0);
      for (int a = 1; a < batch.n_actions; ++a) {
        bootstrap = std::max(bootstrap, q.value(next, a));
      }
      evals += static_cast<std::uint64_t>(batch.n_actions);
    } else {
      bootstrap = q.value(next, batch.actions[i]);
      evals += 1;
    }
    y[i] = batch.rewards[i] + gamma * bootstrap;
  }
  if (eval_count != nullptr) *eval_count += evals;
  return y;
}

std::vector<double> compute_targets(const QFunction& q, const Dataset& ds, TargetMode mode,
                                    double gamma, std::uint64_t* eval_count) {
  return compute_targets(q, FlatBatch::from(ds), mode, gamma, eval_count);
}

void PfqiConfig::validate() const {
  if (persistence < 1) throw std::invalid_argument("PfqiConfig: persistence must be >= 1");
  if (iterations < 1) throw std::invalid_argument("PfqiConfig: iterations must be >= 1");
  if (iterations % persistence != 0) {
    throw std::invalid_argument("PfqiConfig: iterations must be a multiple of the persistence");
  }
}

namespace {

// Q^(j) evaluated at every visited (S_i, A_i); used for residual curves.
std::vector<double> visited_values(const FittedQ& q, const FlatBatch& batch) {
  std::vector<double> v(batch.n);
  for (std::size_t i = 0; i < batch.n; ++i) v[i] = q.value(batch.states.row(i), batch.actions[i]);
  return v;
}

double head_value_mean(const FittedQ& q, const FlatBatch& batch) {
  double acc = 0.0;
  for (std::size_t h : batch.heads) acc += q_max(q, batch.states.row(h));
  return acc / static_cast<double>(batch.heads.size());
}

double mean_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

std::unique_ptr<FittedQ> fit_iteration(const FlatBatch& batch,
                                       const std::vector<std::vector<double>>& action_set,
                                       const std::vector<double>& y, const PfqiConfig& cfg,
                                       int iter) {
  if (cfg.representation == QRepresentation::kActionFeature) {
    const int action_dim = static_cast<int>(action_set[0].size());
    auto q = std::make_unique<FittedQ>(action_set, batch.state_dim);
    FeatureMatrix x(batch.n, batch.state_dim + action_dim);
    for (std::size_t i = 0; i < batch.n; ++i) {
      const auto row = batch.states.row(i);
      double* dst = x.row_mut(i);
      std::copy(row.begin(), row.end(), dst);
      const auto& av = action_set[static_cast<std::size_t>(batch.actions[i])];
      std::copy(av.begin(), av.end(), dst + batch.state_dim);
    }
    auto model = make_regressor(cfg.regressor, rng::derive(cfg.seed, rng::kRegressor, iter));
    model->fit(x, y);
    q->set_shared_model(std::move(model));
    return q;
  }
  auto q = std::make_unique<FittedQ>(batch.n_actions, batch.state_dim);
  for (int a = 0; a < batch.n_actions; ++a) {
    const auto& idx = batch.by_action[static_cast<std::size_t>(a)];
    if (idx.empty()) continue;  // untrained action keeps the zero model
    FeatureMatrix x(idx.size(), batch.state_dim);
    std::vector<double> ya(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto row = batch.states.row(idx[i]);
      std::copy(row.begin(), row.end(), x.row_mut(i));
      ya[i] = y[idx[i]];
    }
    auto model = make_regressor(cfg.regressor, rng::derive(cfg.seed, rng::kRegressor, iter, a));
    model->fit(x, ya);
    q->set_model(a, std::move(model));
  }
  return q;
}

}  // namespace

PersistenceRun run_pfqi(const Dataset& ds, const PfqiConfig& cfg) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();

  FlatBatch batch = FlatBatch::from(ds);
  const double gamma = cfg.discount > 0.0 ? cfg.discount : batch.discount;
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("run_pfqi: discount must lie in [0, 1)");
  }

  const int k = cfg.persistence;
  const int J = cfg.iterations;
  const int total = J + (cfg.continuation ? k : 0);
  // Every fitted Q stays inside the convex hull of its targets, so the
  // recursion Y <= r_max + gamma*B keeps all iterates below this bound.
  const double q_bound = batch.r_abs_max / (1.0 - gamma) + batch.r_abs_max + 1e-9;

  PersistenceRun run;
  run.config = cfg;
  run.gamma = gamma;
  run.dataset_key = ds.content_key();

  // Q^(0) = 0 in the configured layout.
  auto q = cfg.representation == QRepresentation::kActionFeature
               ? std::make_unique<FittedQ>(ds.manifest.action_set, batch.state_dim)
               : std::make_unique<FittedQ>(batch.n_actions, batch.state_dim);

  std::vector<double> prev_block_values;  // Q^(j - k) at visited pairs
  double prev_block_jhat = 0.0;
  int prev_block_iter = -1;
  const double gk = std::pow(gamma, k);

  auto record_block = [&](int iter, const FittedQ& current) {
    if (!cfg.track_curve) return;
    std::vector<double> values = visited_values(current, batch);
    if (prev_block_iter >= 0) {
      const double residual = mean_abs_diff(values, prev_block_values);
      run.curve.push_back(CurvePoint{prev_block_iter, prev_block_jhat,
                                     residual, prev_block_jhat - residual / (1.0 - gk)});
    }
    prev_block_values = std::move(values);
    prev_block_jhat = head_value_mean(current, batch);
    prev_block_iter = iter;
  };

  record_block(0, *q);

  for (int j = 0; j < total; ++j) {
    const TargetMode mode = (j % k == 0) ? TargetMode::kOptimal : TargetMode::kPersistent;
    std::uint64_t evals = 0;
    const auto t_phase1 = std::chrono::steady_clock::now();
    std::vector<double> y = compute_targets(*q, batch, mode, gamma, &evals);
    const double phase1_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_phase1).count();
    if (j < J) run.op_count += evals;
    run.op_count_total += evals;

    IterationStats st;
    st.iter = j;
    st.mode = mode;
    st.eval_count = evals;
    st.phase1_seconds = phase1_seconds;
    st.y_min = std::numeric_limits<double>::infinity();
    st.y_max = -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (double v : y) {
      acc += v;
      st.y_min = std::min(st.y_min, v);
      st.y_max = std::max(st.y_max, v);
    }
    st.y_mean = acc / static_cast<double>(y.size());
    if (std::abs(st.y_min) > q_bound || std::abs(st.y_max) > q_bound) {
      throw std::logic_error("run_pfqi: target exceeded the reward-derived bound");
    }

    const auto t_fit = std::chrono::steady_clock::now();
    q = fit_iteration(batch, ds.manifest.action_set, y, cfg, j);
    st.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_fit).count();
    run.stats.push_back(st);

    const int iter_done = j + 1;
    if (iter_done % k == 0 && iter_done <= J) record_block(iter_done, *q);
    if (cfg.snapshot_every > 0 && iter_done % cfg.snapshot_every == 0 && iter_done < J) {
      run.snapshots.emplace_back(iter_done, q->clone());
    }
    if (iter_done == J && cfg.continuation) {
      run.final_q = q->clone();
    }
  }
  if (cfg.continuation) {
    run.tilde_q = std::move(q);
    if (cfg.track_curve && prev_block_iter == J) {
      // Close the curve at J using the continuation block.
      const double residual = mean_abs_diff(visited_values(*run.tilde_q, batch), prev_block_values);
      run.curve.push_back(CurvePoint{J, prev_block_jhat, residual,
                                     prev_block_jhat - residual / (1.0 - gk)});
    }
  } else {
    run.final_q = std::move(q);
  }

  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return run;
}

std::unique_ptr<Policy> greedy_policy(const QFunction& q) {
  return std::make_unique<GreedyPolicy>(q);
}

std::uint64_t predicted_op_count(int J, std::size_t n, int n_actions, int k) {
  if (k < 1 || J < 1 || J % k != 0) {
    throw std::invalid_argument("predicted_op_count: need J >= 1, k >= 1, J mod k == 0");
  }
  const std::uint64_t blocks = static_cast<std::uint64_t>(J / k);
  return blocks * n * static_cast<std::uint64_t>(n_actions) +
         static_cast<std::uint64_t>(J - J / k) * n;
}

}  // namespace pfqi
