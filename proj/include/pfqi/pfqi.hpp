#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "pfqi/mdp.hpp"
#include "pfqi/policy.hpp"
#include "pfqi/regress.hpp"

namespace pfqi {

// Dataset flattened into arrays for target computation. Built once per run.
struct FlatBatch {
  int state_dim = 0;
  int n_actions = 0;
  double discount = 0.0;
  std::size_t n = 0;
  FeatureMatrix states;
  FeatureMatrix next_states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminals;
  std::vector<std::size_t> heads;                   // index of each trajectory's first sample
  std::vector<std::vector<std::size_t>> by_action;  // sample indices per action
  double r_abs_max = 0.0;

  static FlatBatch from(const Dataset& ds);
};

enum class TargetMode { kOptimal, kPersistent };

// One application of the empirical Bellman operator to every transition:
//   optimal:    Y_i = R_i + gamma * max_a q(S'_i, a)
//   persistent: Y_i = R_i + gamma * q(S'_i, A_i)
// Terminal transitions contribute Y_i = R_i with no bootstrap (and no
// Q evaluation). eval_count, when given, is incremented once per Q
// evaluation actually performed.
std::vector<double> compute_targets(const QFunction& q, const FlatBatch& batch, TargetMode mode,
                                    double gamma, std::uint64_t* eval_count = nullptr);
std::vector<double> compute_targets(const QFunction& q, const Dataset& ds, TargetMode mode,
                                    double gamma, std::uint64_t* eval_count = nullptr);

struct PfqiConfig {
  int persistence = 1;   // k
  int iterations = 1;    // J, must satisfy J mod k == 0
  RegressorConfig regressor;
  QRepresentation representation = QRepresentation::kActionFeature;
  double discount = 0.0;    // 0 = take the dataset manifest's discount
  int snapshot_every = 0;   // 0 = no retained snapshot models
  bool continuation = true;  // also run k extra iterations for Q^(J+k)
  bool track_curve = true;   // per-block selection statistics
  std::uint64_t seed = 0;

  void validate() const;
};

struct IterationStats {
  int iter = 0;
  TargetMode mode = TargetMode::kOptimal;
  double y_mean = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
  double fit_seconds = 0.0;
  double phase1_seconds = 0.0;
  std::uint64_t eval_count = 0;
};

// Selection statistics at a block boundary j (j mod k == 0): the estimated
// return of Q^(j) over the dataset's trajectory heads, the empirical
// residual |Q^(j+k) - Q^(j)| averaged over visited pairs, and the resulting
// index j_hat - residual / (1 - gamma^k).
struct CurvePoint {
  int iter = 0;
  double j_hat = 0.0;
  double residual = 0.0;
  double index = 0.0;
};

struct PersistenceRun {
  PfqiConfig config;
  double gamma = 0.0;
  std::uint64_t dataset_key = 0;
  std::unique_ptr<FittedQ> final_q;  // Q^(J); the deployed policy is greedy wrt this
  std::unique_ptr<FittedQ> tilde_q;  // Q^(J+k) continuation, for persistence selection
  std::vector<std::pair<int, std::unique_ptr<FittedQ>>> snapshots;
  std::vector<IterationStats> stats;
  std::vector<CurvePoint> curve;
  std::uint64_t op_count = 0;        // Phase-1 Q evaluations over the first J iterations
  std::uint64_t op_count_total = 0;  // including the continuation block
  double wall_seconds = 0.0;
};

// Persistent fitted Q-iteration. Iteration j computes targets with the
// optimal empirical operator when j mod k == 0 and with the persistent one
// otherwise, then refits one regressor per action from scratch on
// (S_i, Y_i). Regressor seeds derive from (run seed, iteration, action), so
// extending J leaves earlier iterations untouched.
PersistenceRun run_pfqi(const Dataset& ds, const PfqiConfig& cfg);

// Phase 3: the greedy policy of a Q-function (lowest index wins ties).
std::unique_ptr<Policy> greedy_policy(const QFunction& q);

// Closed-form count of Phase-1 Q evaluations for J iterations over n
// samples: (J/k) n |A| optimal-mode evaluations plus (J(k-1)/k) n persistent
// ones. Requires J mod k == 0.
std::uint64_t predicted_op_count(int J, std::size_t n, int n_actions, int k);

}  // namespace pfqi
