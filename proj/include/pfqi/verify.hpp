#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pfqi::verify {

struct Result {
  std::string suite;
  std::uint64_t seed = 0;
  int checks = 0;
  int failures = 0;
  double seconds = 0.0;
  std::vector<std::string> notes;  // failure dumps and informational lines

  bool pass() const { return failures == 0 && checks > 0; }
  nlohmann::json to_json() const;
};

// Sup-norm contraction of T^pi, T*, T^delta (factor gamma) and of the
// k-persistent compositions (factor gamma^k, k in {2, 3, 5}), 100 random
// Q-pairs per operator.
Result contraction(std::uint64_t seed);

// Composition-based and explicit-M_k fixed points agree within 1e-8 on 20
// random MDPs for k in {1..5}; additionally Q*_k <= Q* + 1e-8 elementwise
// and the global loss cap V* - V*_k <= 2 gamma r_max / (1 - gamma).
Result duality(std::uint64_t seed);

// Performance-loss bound on 50 random (MDP, policy, rho) triples for
// k in {2, 3, 4}, p in {1, 2}: lhs <= rhs, eta sums to 1; both sides vanish
// for constant-action policies and for k = 1.
Result bound(std::uint64_t seed);

// Tightness of the counterexample: V*(s-) = gamma R/(1-gamma) and
// V*(s-) - V*_k(s-) = 2 gamma R/(1-gamma) within 1e-9 over a grid of
// (R, gamma, k); also the optimal base policy's actions.
Result counterexample(std::uint64_t seed);

// Instrumented Phase-1 evaluation counts equal the closed form
// (J/k) n |A| + (J(k-1)/k) n exactly, including the
// (J=512, n=400, |A|=2, k=4) -> 256,000 point.
Result opcount(std::uint64_t seed);

// Fitted Q-iteration with the exact table regressor on fully covered
// deterministic tabular datasets converges to the exact Q*_k within 1e-6
// for k in {1, 2, 3, 4}.
Result oracle_equivalence(std::uint64_t seed);

Result run_suite(const std::string& name, std::uint64_t seed);

}  // namespace pfqi::verify
