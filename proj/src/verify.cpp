#include "pfqi/verify.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pfqi/exact.hpp"
#include "pfqi/instances.hpp"
#include "pfqi/io.hpp"
#include "pfqi/pfqi.hpp"
#include "pfqi/rng.hpp"

namespace pfqi::verify {

nlohmann::json Result::to_json() const {
  return {{"suite", suite}, {"seed", seed},       {"checks", checks},
          {"failures", failures}, {"seconds", seconds}, {"pass", pass()},
          {"notes", notes}};
}

namespace {

class Checker {
 public:
  Checker(Result& result) : r_(result), start_(std::chrono::steady_clock::now()) {}
  ~Checker() {
    r_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  void expect(bool ok, const std::string& dump_on_failure) {
    ++r_.checks;
    if (!ok) {
      ++r_.failures;
      r_.notes.push_back(dump_on_failure);
    }
  }

 private:
  Result& r_;
  std::chrono::steady_clock::time_point start_;
};

TabularQ random_q(std::mt19937_64& g, int n_states, int n_actions, double scale) {
  TabularQ q(n_states, n_actions);
  for (double& v : q.v) v = rng::range(g, -scale, scale);
  return q;
}

}  // namespace

Result contraction(std::uint64_t seed) {
  Result result;
  result.suite = "contraction";
  result.seed = seed;
  Checker check(result);
  auto g = rng::engine(rng::derive(seed, rng::kVerify, 1));
  const int kPairsPerMdp = 10;
  for (int trial = 0; trial < 10; ++trial) {
    const TabularMdp m = random_mdp(g, 10, 4);
    const TabularDistPolicy pi = random_stochastic_policy(g, m.n_states, m.n_actions);
    for (int pair = 0; pair < kPairsPerMdp; ++pair) {
      const TabularQ q1 = random_q(g, m.n_states, m.n_actions, 10.0);
      const TabularQ q2 = random_q(g, m.n_states, m.n_actions, 10.0);
      const double base = sup_distance(q1, q2);
      auto dump = [&](const char* op, double got, double allowed) {
        std::ostringstream os;
        os << op << " contraction violated: trial=" << trial << " pair=" << pair
           << " dist=" << got << " allowed=" << allowed;
        return os.str();
      };
      {
        const double d = sup_distance(apply_expectation(m, pi, q1), apply_expectation(m, pi, q2));
        check.expect(d <= m.discount * base + 1e-12, dump("T^pi", d, m.discount * base));
      }
      {
        const double d = sup_distance(apply_optimal(m, q1), apply_optimal(m, q2));
        check.expect(d <= m.discount * base + 1e-12, dump("T*", d, m.discount * base));
      }
      {
        const double d = sup_distance(apply_persistent(m, q1), apply_persistent(m, q2));
        check.expect(d <= m.discount * base + 1e-12, dump("T^delta", d, m.discount * base));
      }
      for (int k : {2, 3, 5}) {
        auto compose = [&](TabularQ q) {
          q = apply_optimal(m, q);
          for (int i = 0; i < k - 1; ++i) q = apply_persistent(m, q);
          return q;
        };
        const double d = sup_distance(compose(q1), compose(q2));
        const double allowed = std::pow(m.discount, k) * base;
        check.expect(d <= allowed + 1e-12, dump("(T^delta)^{k-1}T*", d, allowed));
      }
    }
  }
  return result;
}

Result duality(std::uint64_t seed) {
  Result result;
  result.suite = "duality";
  result.seed = seed;
  Checker check(result);
  auto g = rng::engine(rng::derive(seed, rng::kVerify, 2));
  for (int trial = 0; trial < 20; ++trial) {
    const TabularMdp m = random_mdp(g, 10, 4, 0.95);
    const TabularQ q_star = solve_q(m, 1e-10);
    for (int k = 1; k <= 5; ++k) {
      const TabularQ via_composition =
          solve_q_persistent(m, k, 1e-10, PersistentMethod::kComposition);
      const TabularQ via_explicit = solve_q_persistent(m, k, 1e-10, PersistentMethod::kExplicit);
      const double gap = sup_distance(via_composition, via_explicit);
      {
        std::ostringstream os;
        os << "fixed points disagree: trial=" << trial << " k=" << k << " gap=" << gap;
        check.expect(gap <= 1e-8, os.str());
      }
      // Optimality dominance: persisting can only lower performance.
      double worst = 0.0;
      for (std::size_t i = 0; i < q_star.v.size(); ++i) {
        worst = std::max(worst, via_composition.v[i] - q_star.v[i]);
      }
      {
        std::ostringstream os;
        os << "Q*_k exceeds Q*: trial=" << trial << " k=" << k << " excess=" << worst;
        check.expect(worst <= 1e-8, os.str());
      }
      // Global loss cap from the counterexample analysis.
      const double cap = 2.0 * m.discount * m.r_max / (1.0 - m.discount);
      double loss = 0.0;
      for (int s = 0; s < m.n_states; ++s) {
        loss = std::max(loss, q_star.state_value(s) - via_composition.state_value(s));
      }
      {
        std::ostringstream os;
        os << "loss cap violated: trial=" << trial << " k=" << k << " loss=" << loss
           << " cap=" << cap;
        check.expect(loss <= cap + 1e-8, os.str());
      }
    }
  }
  return result;
}

Result bound(std::uint64_t seed) {
  Result result;
  result.suite = "bound";
  result.seed = seed;
  Checker check(result);
  auto g = rng::engine(rng::derive(seed, rng::kVerify, 3));
  for (int trial = 0; trial < 50; ++trial) {
    const TabularMdp m = random_mdp(g, 8, 4, 0.95);
    const TabularDistPolicy pi = random_stochastic_policy(g, m.n_states, m.n_actions);
    const std::vector<double> rho = random_distribution(g, m.n_states * m.n_actions);
    for (int k : {2, 3, 4}) {
      for (double p : {1.0, 2.0}) {
        const BoundReport rep = persistence_loss_bound(m, pi, rho, k, p);
        {
          std::ostringstream os;
          os << "bound violated: trial=" << trial << " k=" << k << " p=" << p
             << " lhs=" << rep.lhs << " rhs=" << rep.rhs;
          check.expect(rep.lhs <= rep.rhs + 1e-8, os.str());
        }
        double eta_sum = 0.0;
        for (double w : rep.eta) eta_sum += w;
        {
          std::ostringstream os;
          os << "eta not normalized: trial=" << trial << " k=" << k << " sum=" << eta_sum;
          check.expect(std::abs(eta_sum - 1.0) <= 1e-10, os.str());
        }
      }
    }
    // k = 1: both sides vanish identically.
    const BoundReport rep1 = persistence_loss_bound(m, pi, rho, 1, 1.0);
    check.expect(rep1.lhs == 0.0 && rep1.rhs == 0.0, "k=1 report not all-zero");
    // Constant-action policy evaluated under a policy-induced rho (state
    // marginal times pi): persisting the constant action changes nothing
    // along pi, so both sides vanish.
    const int fixed_action = rng::index(g, m.n_actions);
    const TabularDistPolicy constant = TabularDistPolicy::deterministic(
        m.n_states, m.n_actions, std::vector<int>(m.n_states, fixed_action));
    const std::vector<double> rho_states = random_distribution(g, m.n_states);
    std::vector<double> rho_pi(static_cast<std::size_t>(m.n_states) * m.n_actions, 0.0);
    for (int s = 0; s < m.n_states; ++s) {
      rho_pi[static_cast<std::size_t>(s) * m.n_actions + fixed_action] =
          rho_states[static_cast<std::size_t>(s)];
    }
    const BoundReport rep_const = persistence_loss_bound(m, constant, rho_pi, 3, 2.0);
    {
      std::ostringstream os;
      os << "constant policy should give lhs=rhs=0: trial=" << trial << " lhs=" << rep_const.lhs
         << " rhs=" << rep_const.rhs;
      check.expect(rep_const.lhs <= 1e-8 && rep_const.rhs <= 1e-8, os.str());
    }
  }
  return result;
}

Result counterexample(std::uint64_t seed) {
  Result result;
  result.suite = "counterexample";
  result.seed = seed;
  Checker check(result);
  for (double R : {0.5, 1.0, 2.0}) {
    for (double gamma : {0.5, 0.9, 0.99}) {
      const TabularMdp m = counterexample_mdp(R, gamma);
      const TabularQ q_star = solve_q(m, 1e-11);
      const double v_star = q_star.state_value(kCounterexampleStart);
      const double expected_v = gamma * R / (1.0 - gamma);
      {
        std::ostringstream os;
        os << "V*(s-) mismatch: R=" << R << " gamma=" << gamma << " got=" << v_star
           << " want=" << expected_v;
        check.expect(std::abs(v_star - expected_v) <= 1e-9, os.str());
      }
      const auto greedy = q_star.greedy_actions();
      check.expect(greedy[0] == 0 && greedy[1] == 1,
                   "optimal policy should play a1 at s- and a2 at s1");
      for (int k = 2; k <= 6; ++k) {
        const TabularQ q_k = solve_q_persistent(m, k, 1e-11);
        const double loss = v_star - q_k.state_value(kCounterexampleStart);
        const double expected_loss = 2.0 * gamma * R / (1.0 - gamma);
        std::ostringstream os;
        os << "loss not tight: R=" << R << " gamma=" << gamma << " k=" << k << " got=" << loss
           << " want=" << expected_loss;
        check.expect(std::abs(loss - expected_loss) <= 1e-9, os.str());
      }
    }
  }
  return result;
}

Result opcount(std::uint64_t seed) {
  Result result;
  result.suite = "opcount";
  result.seed = seed;
  Checker check(result);
  auto g = rng::engine(rng::derive(seed, rng::kVerify, 5));

  struct GridPoint {
    int J;
    std::size_t n;
    int n_actions;
    std::vector<int> ks;
  };
  const std::vector<GridPoint> grid = {
      {512, 400, 2, {1, 2, 4, 8}},
      {60, 35, 3, {1, 2, 3, 5, 6}},
      {24, 12, 4, {1, 2, 3, 4, 6, 8, 12, 24}},
  };

  for (const auto& point : grid) {
    TabularMdp m = random_deterministic_mdp(g, 6, point.n_actions, 0.9);
    while (m.n_actions != point.n_actions) m = random_deterministic_mdp(g, 6, point.n_actions, 0.9);
    const Dataset ds = synthetic_tabular_dataset(m, point.n, rng::derive(seed, point.J));
    for (int k : point.ks) {
      PfqiConfig cfg;
      cfg.persistence = k;
      cfg.iterations = point.J;
      cfg.regressor.kind = "table";
      cfg.continuation = false;
      cfg.track_curve = false;
      cfg.seed = rng::derive(seed, point.J, k);
      const PersistenceRun run = run_pfqi(ds, cfg);
      const std::uint64_t want = predicted_op_count(point.J, point.n, point.n_actions, k);
      std::ostringstream os;
      os << "op count mismatch: J=" << point.J << " n=" << point.n << " |A|=" << point.n_actions
         << " k=" << k << " instrumented=" << run.op_count << " formula=" << want;
      check.expect(run.op_count == want, os.str());
      if (point.J == 512 && k == 4) {
        check.expect(want == 256000ULL, "expected the (512,400,2,4) grid point to equal 256000");
      }
    }
  }
  return result;
}

Result oracle_equivalence(std::uint64_t seed) {
  Result result;
  result.suite = "oracle";
  result.seed = seed;
  Checker check(result);
  auto g = rng::engine(rng::derive(seed, rng::kVerify, 6));
  for (int trial = 0; trial < 4; ++trial) {
    const TabularMdp m = random_deterministic_mdp(g, 8, 3, 0.9);
    // One sample per (s, a): with deterministic dynamics the empirical
    // operators coincide with the exact ones.
    const Dataset ds = synthetic_tabular_dataset(
        m, static_cast<std::size_t>(m.n_states) * m.n_actions, rng::derive(seed, trial));
    for (int k : {1, 2, 3, 4}) {
      const int J = 240;  // gamma^J <= 0.9^240, far below the tolerance
      PfqiConfig cfg;
      cfg.persistence = k;
      cfg.iterations = J;
      cfg.regressor.kind = "table";
      cfg.continuation = false;
      cfg.track_curve = false;
      cfg.seed = rng::derive(seed, trial, k);
      const PersistenceRun run = run_pfqi(ds, cfg);
      const TabularQ q_star_k = solve_q_persistent(m, k, 1e-10);
      double worst = 0.0;
      for (int s = 0; s < m.n_states; ++s) {
        for (int a = 0; a < m.n_actions; ++a) {
          const std::vector<double> state = {static_cast<double>(s)};
          worst = std::max(worst, std::abs(run.final_q->value(state, a) - q_star_k.at(s, a)));
        }
      }
      std::ostringstream os;
      os << "fitted Q far from exact Q*_k: trial=" << trial << " k=" << k << " sup=" << worst;
      check.expect(worst <= 1e-6, os.str());
    }
  }
  return result;
}

Result run_suite(const std::string& name, std::uint64_t seed) {
  if (name == "contraction") return contraction(seed);
  if (name == "duality") return duality(seed);
  if (name == "bound") return bound(seed);
  if (name == "counterexample") return counterexample(seed);
  if (name == "opcount") return opcount(seed);
  throw std::invalid_argument("verify: unknown suite '" + name +
                              "' (expected contraction|duality|bound|counterexample|opcount)");
}

}  // namespace pfqi::verify
