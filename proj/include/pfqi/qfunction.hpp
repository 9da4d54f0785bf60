#pragma once

#include <cstddef>
#include <span>

namespace pfqi {

// Evaluable map (state, action index) -> value. Implementations: dense
// tabular Q (exact machinery) and fitted tree ensembles.
class QFunction {
 public:
  virtual ~QFunction() = default;
  virtual int n_actions() const = 0;
  virtual double value(std::span<const double> state, int action) const = 0;

  // Bulk evaluation of many states at a shared action. `states` is row-major
  // with `dim` columns. The default loops value(); tree-backed
  // implementations override it with a tree-major walk.
  virtual void value_many(std::span<const double> states, int dim, int action,
                          std::span<double> out) const {
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = value(states.subspan(i * static_cast<std::size_t>(dim),
                                    static_cast<std::size_t>(dim)),
                     action);
    }
  }
};

inline double q_max(const QFunction& q, std::span<const double> state) {
  double best = q.value(state, 0);
  for (int a = 1; a < q.n_actions(); ++a) {
    double v = q.value(state, a);
    if (v > best) best = v;
  }
  return best;
}

// Greedy action with deterministic tie-breaking: the lowest action index
// attaining the maximum wins.
inline int q_argmax(const QFunction& q, std::span<const double> state) {
  int arg = 0;
  double best = q.value(state, 0);
  for (int a = 1; a < q.n_actions(); ++a) {
    double v = q.value(state, a);
    if (v > best) {
      best = v;
      arg = a;
    }
  }
  return arg;
}

}  // namespace pfqi
