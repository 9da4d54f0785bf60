#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "pfqi/exact.hpp"
#include "pfqi/instances.hpp"
#include "pfqi/pfqi.hpp"
#include "pfqi/rng.hpp"
#include "pfqi/verify.hpp"

using namespace pfqi;

namespace {

Dataset single_transition_dataset(double reward, int action, int n_actions) {
  Dataset ds;
  ds.manifest.env_name = "unit";
  ds.manifest.state_dim = 1;
  ds.manifest.discount = 0.5;
  for (int a = 0; a < n_actions; ++a) ds.manifest.action_set.push_back({static_cast<double>(a)});
  Trajectory traj;
  traj.initial_state = {0.0};
  traj.transitions.push_back(Transition{{0.0}, action, {1.0}, reward, false});
  ds.trajectories.push_back(traj);
  ds.manifest.n_samples = 1;
  return ds;
}

// Fixed Q with hand-picked next-state values for target arithmetic checks.
class StubQ final : public QFunction {
 public:
  StubQ(std::vector<double> values) : values_(std::move(values)) {}
  int n_actions() const override { return static_cast<int>(values_.size()); }
  double value(std::span<const double>, int action) const override {
    return values_[static_cast<std::size_t>(action)];
  }

 private:
  std::vector<double> values_;
};

}  // namespace

TEST_CASE("compute_targets arithmetic") {
  const Dataset ds = single_transition_dataset(1.0, 0, 2);

  SUBCASE("zero Q gives Y = R in both modes") {
    const FittedQ q(2, 1);
    CHECK(compute_targets(q, ds, TargetMode::kOptimal, 0.5)[0] == doctest::Approx(1.0));
    CHECK(compute_targets(q, ds, TargetMode::kPersistent, 0.5)[0] == doctest::Approx(1.0));
  }

  SUBCASE("optimal takes the max, persistent replays the taken action") {
    const StubQ q({2.0, 5.0});
    CHECK(compute_targets(q, ds, TargetMode::kOptimal, 0.5)[0] == doctest::Approx(3.5));
    CHECK(compute_targets(q, ds, TargetMode::kPersistent, 0.5)[0] == doctest::Approx(2.0));
  }

  SUBCASE("terminal transitions never bootstrap") {
    Dataset term = single_transition_dataset(-1.0, 1, 2);
    term.trajectories[0].transitions[0].terminal = true;
    const StubQ q({100.0, 100.0});
    std::uint64_t evals = 0;
    const auto y = compute_targets(q, term, TargetMode::kOptimal, 0.5, &evals);
    CHECK(y[0] == doctest::Approx(-1.0));
    CHECK(evals == 0);
  }
}

TEST_CASE("config validation") {
  PfqiConfig cfg;
  cfg.persistence = 3;
  cfg.iterations = 10;  // not a multiple of 3
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.iterations = 9;
  CHECK_NOTHROW(cfg.validate());
  cfg.persistence = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("mode schedule: optimal exactly at multiples of k") {
  auto g = rng::engine(42);
  const TabularMdp m = random_deterministic_mdp(g, 5, 2);
  const Dataset ds = synthetic_tabular_dataset(m, 20, 1);
  PfqiConfig cfg;
  cfg.persistence = 3;
  cfg.iterations = 9;
  cfg.regressor.kind = "table";
  cfg.continuation = false;
  const PersistenceRun run = run_pfqi(ds, cfg);
  REQUIRE(run.stats.size() == 9);
  int optimal_count = 0;
  for (const auto& st : run.stats) {
    const bool should_be_optimal = st.iter % 3 == 0;
    CHECK((st.mode == TargetMode::kOptimal) == should_be_optimal);
    if (st.mode == TargetMode::kOptimal) ++optimal_count;
  }
  CHECK(optimal_count == 3);  // J / k
}

TEST_CASE("k = 1 runs as plain fitted Q-iteration: every iteration optimal") {
  auto g = rng::engine(43);
  const TabularMdp m = random_deterministic_mdp(g, 5, 2);
  const Dataset ds = synthetic_tabular_dataset(m, 20, 2);
  PfqiConfig cfg;
  cfg.persistence = 1;
  cfg.iterations = 6;
  cfg.regressor.kind = "table";
  cfg.continuation = false;
  const PersistenceRun run = run_pfqi(ds, cfg);
  for (const auto& st : run.stats) CHECK(st.mode == TargetMode::kOptimal);
}

TEST_CASE("oracle equivalence: exact-table PFQI converges to Q*_k") {
  const auto result = verify::oracle_equivalence(2030);
  for (const auto& note : result.notes) MESSAGE(note);
  CHECK(result.pass());
}

TEST_CASE("instrumented op counts equal the closed form") {
  const auto result = verify::opcount(2031);
  for (const auto& note : result.notes) MESSAGE(note);
  CHECK(result.pass());
}

TEST_CASE("predicted_op_count identities") {
  CHECK(predicted_op_count(512, 400, 2, 4) == 256000ULL);
  // k = 1: every iteration is optimal-mode.
  CHECK(predicted_op_count(12, 7, 3, 1) == 12ULL * 7 * 3);
  // k = J: a single optimal application in total.
  CHECK(predicted_op_count(12, 7, 3, 12) == 7ULL * 3 + 11ULL * 7);
  CHECK_THROWS_AS(predicted_op_count(10, 5, 2, 3), std::invalid_argument);
}

TEST_CASE("greedy policy") {
  SUBCASE("constant Q breaks ties toward action 0") {
    const StubQ q({1.0, 1.0, 1.0});
    auto policy = greedy_policy(q);
    auto g = rng::engine(1);
    CHECK(policy->act(std::vector<double>{0.0}, g) == 0);
  }
  SUBCASE("counterexample optimal policy plays a1 at s-, a2 at s1") {
    const TabularMdp m = counterexample_mdp(1.0, 0.9);
    const TabularQ q_star = solve_q(m, 1e-10);
    const TabularQView view(q_star);
    auto policy = greedy_policy(view);
    auto g = rng::engine(1);
    CHECK(policy->act(std::vector<double>{0.0}, g) == 0);
    CHECK(policy->act(std::vector<double>{1.0}, g) == 1);
  }
  SUBCASE("positive scaling leaves the policy unchanged") {
    auto g = rng::engine(44);
    const TabularMdp m = random_mdp(g, 6, 3);
    TabularQ q = solve_q(m, 1e-10);
    TabularQ scaled = q;
    for (double& v : scaled.v) v *= 17.5;
    CHECK(q.greedy_actions() == scaled.greedy_actions());
  }
}

TEST_CASE("extending J leaves earlier iterations untouched") {
  auto g = rng::engine(45);
  const TabularMdp m = random_deterministic_mdp(g, 6, 3);
  const Dataset ds = synthetic_tabular_dataset(m, 36, 3);
  PfqiConfig cfg;
  cfg.persistence = 2;
  cfg.regressor.kind = "extra_trees";
  cfg.regressor.extra_trees.n_estimators = 5;
  cfg.continuation = false;
  cfg.seed = 777;
  cfg.iterations = 4;
  const PersistenceRun short_run = run_pfqi(ds, cfg);
  cfg.iterations = 8;
  const PersistenceRun long_run = run_pfqi(ds, cfg);
  for (int j = 0; j < 4; ++j) {
    CHECK(short_run.stats[j].y_mean == long_run.stats[j].y_mean);
    CHECK(short_run.stats[j].y_min == long_run.stats[j].y_min);
    CHECK(short_run.stats[j].y_max == long_run.stats[j].y_max);
  }
}

TEST_CASE("same seed gives identical runs") {
  auto g = rng::engine(46);
  const TabularMdp m = random_mdp(g, 6, 3);
  const Dataset ds = synthetic_tabular_dataset(m, 60, 4);
  PfqiConfig cfg;
  cfg.persistence = 2;
  cfg.iterations = 8;
  cfg.regressor.kind = "extra_trees";
  cfg.regressor.extra_trees.n_estimators = 10;
  cfg.seed = 99;
  const PersistenceRun a = run_pfqi(ds, cfg);
  const PersistenceRun b = run_pfqi(ds, cfg);
  for (int s = 0; s < m.n_states; ++s) {
    const std::vector<double> state{static_cast<double>(s)};
    for (int act = 0; act < m.n_actions; ++act) {
      CHECK(a.final_q->value(state, act) == b.final_q->value(state, act));
      CHECK(a.tilde_q->value(state, act) == b.tilde_q->value(state, act));
    }
  }
}

TEST_CASE("targets stay inside the reward-derived bound") {
  auto g = rng::engine(47);
  const TabularMdp m = random_mdp(g, 8, 3, 0.9);
  const Dataset ds = synthetic_tabular_dataset(m, 120, 5);
  PfqiConfig cfg;
  cfg.persistence = 2;
  cfg.iterations = 40;
  cfg.regressor.kind = "extra_trees";
  cfg.regressor.extra_trees.n_estimators = 10;
  const PersistenceRun run = run_pfqi(ds, cfg);  // throws internally on violation
  const double bound = 1.0 / (1.0 - m.discount) + 1.0 + 1e-9;
  for (const auto& st : run.stats) {
    CHECK(std::abs(st.y_min) <= bound);
    CHECK(std::abs(st.y_max) <= bound);
  }
}

TEST_CASE("snapshots and curve bookkeeping") {
  auto g = rng::engine(48);
  const TabularMdp m = random_deterministic_mdp(g, 5, 2);
  const Dataset ds = synthetic_tabular_dataset(m, 10, 6);
  PfqiConfig cfg;
  cfg.persistence = 2;
  cfg.iterations = 8;
  cfg.regressor.kind = "table";
  cfg.snapshot_every = 4;
  const PersistenceRun run = run_pfqi(ds, cfg);
  REQUIRE(run.snapshots.size() == 1);  // at iteration 4 (8 is the final model)
  CHECK(run.snapshots[0].first == 4);
  // Curve rows at 0, 2, 4, 6, 8: residual at row j compares Q^(j) and Q^(j+k).
  REQUIRE(run.curve.size() == 5);
  CHECK(run.curve.front().iter == 0);
  CHECK(run.curve.back().iter == 8);
  const double gk = std::pow(run.gamma, 2);
  for (const auto& pt : run.curve) {
    CHECK(pt.index == doctest::Approx(pt.j_hat - pt.residual / (1.0 - gk)));
  }
}

TEST_CASE("phase-1 time shrinks with the persistence") {
  // Deterministic proxy first: evaluation counts are strictly decreasing.
  const std::size_t n = 2000;
  CHECK(predicted_op_count(8, n, 3, 8) < predicted_op_count(8, n, 3, 4));
  CHECK(predicted_op_count(8, n, 3, 4) < predicted_op_count(8, n, 3, 1));

  // Wall-clock trend, averaged over repetitions; |A| = 3 makes the optimal
  // mode about 3x the persistent one, far above timer noise.
  auto g = rng::engine(49);
  const TabularMdp m = random_mdp(g, 10, 3, 0.9);
  const Dataset ds = synthetic_tabular_dataset(m, n, 7);
  auto mean_phase1 = [&](int k) {
    double total = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      PfqiConfig cfg;
      cfg.persistence = k;
      cfg.iterations = 8;
      cfg.regressor.kind = "extra_trees";
      cfg.regressor.extra_trees.n_estimators = 20;
      cfg.continuation = false;
      cfg.track_curve = false;
      cfg.seed = rng::derive(50, k, rep);
      const PersistenceRun run = run_pfqi(ds, cfg);
      for (const auto& st : run.stats) total += st.phase1_seconds;
    }
    return total / 5.0;
  };
  CHECK(mean_phase1(8) < mean_phase1(1));
}
