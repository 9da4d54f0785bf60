#include "pfqi/exact.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pfqi/persistence.hpp"

namespace pfqi {

double TabularQ::state_value(int s) const {
  double best = at(s, 0);
  for (int a = 1; a < n_actions; ++a) best = std::max(best, at(s, a));
  return best;
}

std::vector<int> TabularQ::greedy_actions() const {
  std::vector<int> out(n_states, 0);
  for (int s = 0; s < n_states; ++s) {
    double best = at(s, 0);
    for (int a = 1; a < n_actions; ++a) {
      if (at(s, a) > best) {
        best = at(s, a);
        out[s] = a;
      }
    }
  }
  return out;
}

double sup_distance(const TabularQ& a, const TabularQ& b) {
  if (a.v.size() != b.v.size()) throw std::invalid_argument("sup_distance: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) d = std::max(d, std::abs(a.v[i] - b.v[i]));
  return d;
}

namespace {

void check_shapes(const TabularMdp& m, const TabularQ& q) {
  if (q.n_states != m.n_states || q.n_actions != m.n_actions) {
    throw std::invalid_argument("operator application: Q dimensions do not match the MDP");
  }
}

}  // namespace

TabularQ apply_expectation(const TabularMdp& m, const TabularDistPolicy& pi, const TabularQ& q) {
  check_shapes(m, q);
  if (pi.n_states != m.n_states || pi.n_actions != m.n_actions) {
    throw std::invalid_argument("apply_expectation: policy dimensions do not match the MDP");
  }
  // Precompute v_pi(s') = sum_a' pi(a'|s') q(s',a').
  std::vector<double> v(m.n_states, 0.0);
  for (int s2 = 0; s2 < m.n_states; ++s2) {
    double acc = 0.0;
    for (int a2 = 0; a2 < m.n_actions; ++a2) acc += pi.pi(s2, a2) * q.at(s2, a2);
    v[s2] = acc;
  }
  TabularQ out(m.n_states, m.n_actions);
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      double acc = 0.0;
      for (int s2 = 0; s2 < m.n_states; ++s2) acc += m.p(s, a, s2) * v[s2];
      out.at(s, a) = m.r(s, a) + m.discount * acc;
    }
  }
  return out;
}

TabularQ apply_optimal(const TabularMdp& m, const TabularQ& q) {
  check_shapes(m, q);
  std::vector<double> v(m.n_states, 0.0);
  for (int s2 = 0; s2 < m.n_states; ++s2) v[s2] = q.state_value(s2);
  TabularQ out(m.n_states, m.n_actions);
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      double acc = 0.0;
      for (int s2 = 0; s2 < m.n_states; ++s2) acc += m.p(s, a, s2) * v[s2];
      out.at(s, a) = m.r(s, a) + m.discount * acc;
    }
  }
  return out;
}

TabularQ apply_persistent(const TabularMdp& m, const TabularQ& q) {
  check_shapes(m, q);
  TabularQ out(m.n_states, m.n_actions);
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      double acc = 0.0;
      for (int s2 = 0; s2 < m.n_states; ++s2) acc += m.p(s, a, s2) * q.at(s2, a);
      out.at(s, a) = m.r(s, a) + m.discount * acc;
    }
  }
  return out;
}

namespace {

// Iterates q <- step(q) until the residual guarantees ||q - q_fix|| <= tol
// for a `factor`-contraction.
template <class Step>
TabularQ iterate_to_fixed_point(TabularQ q, double factor, double tol, const Step& step) {
  if (tol <= 0.0) throw std::invalid_argument("solve: tol must be positive");
  if (factor <= 0.0) {
    return step(q);  // one application is exact when the future is worthless
  }
  const double threshold = tol * (1.0 - factor) / factor;
  for (;;) {
    TabularQ next = step(q);
    double res = sup_distance(next, q);
    q = std::move(next);
    if (res <= threshold) return q;
  }
}

}  // namespace

TabularQ solve_q(const TabularMdp& m, const TabularDistPolicy& pi, double tol) {
  return iterate_to_fixed_point(TabularQ(m.n_states, m.n_actions), m.discount, tol,
                                [&](const TabularQ& q) { return apply_expectation(m, pi, q); });
}

TabularQ solve_q(const TabularMdp& m, double tol) {
  return iterate_to_fixed_point(TabularQ(m.n_states, m.n_actions), m.discount, tol,
                                [&](const TabularQ& q) { return apply_optimal(m, q); });
}

namespace {

template <class BaseStep>
TabularQ solve_persistent_composition(const TabularMdp& m, int k, double tol,
                                      const BaseStep& base) {
  const double factor = std::pow(m.discount, k);
  return iterate_to_fixed_point(TabularQ(m.n_states, m.n_actions), factor, tol,
                                [&](const TabularQ& q) {
                                  TabularQ out = base(q);
                                  for (int i = 0; i < k - 1; ++i) out = apply_persistent(m, out);
                                  return out;
                                });
}

}  // namespace

TabularQ solve_q_persistent(const TabularMdp& m, int k, double tol, PersistentMethod method) {
  if (k < 1) throw std::invalid_argument("solve_q_persistent: k must be >= 1");
  if (method == PersistentMethod::kExplicit) {
    return solve_q(build_persistent_tabular(m, k), tol);
  }
  return solve_persistent_composition(m, k, tol,
                                      [&](const TabularQ& q) { return apply_optimal(m, q); });
}

TabularQ solve_q_persistent(const TabularMdp& m, const TabularDistPolicy& pi, int k, double tol,
                            PersistentMethod method) {
  if (k < 1) throw std::invalid_argument("solve_q_persistent: k must be >= 1");
  if (method == PersistentMethod::kExplicit) {
    return solve_q(build_persistent_tabular(m, k), pi, tol);
  }
  return solve_persistent_composition(
      m, k, tol, [&](const TabularQ& q) { return apply_expectation(m, pi, q); });
}

namespace {

// Joint state-action kernel P^pi[(s,a),(s',a')] = P(s'|s,a) pi(a'|s').
// Only materialized here, on the small instances the bound evaluator
// handles; the persistence builder never forms it.
Eigen::MatrixXd joint_kernel(const TabularMdp& m, const TabularDistPolicy& pi) {
  const int n = m.n_states * m.n_actions;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      const int row = s * m.n_actions + a;
      for (int s2 = 0; s2 < m.n_states; ++s2) {
        const double ps = m.p(s, a, s2);
        if (ps == 0.0) continue;
        for (int a2 = 0; a2 < m.n_actions; ++a2) {
          P(row, s2 * m.n_actions + a2) += ps * pi.pi(s2, a2);
        }
      }
    }
  }
  return P;
}

}  // namespace

BoundReport persistence_loss_bound(const TabularMdp& m, const TabularDistPolicy& pi,
                                   const std::vector<double>& rho, int k, double p,
                                   double tol) {
  m.validate();
  pi.validate();
  if (k < 1) throw std::invalid_argument("persistence_loss_bound: k must be >= 1");
  if (p < 1.0) throw std::invalid_argument("persistence_loss_bound: p must be >= 1");
  const int n = m.n_states * m.n_actions;
  if (static_cast<int>(rho.size()) != n) {
    throw std::invalid_argument("persistence_loss_bound: rho must live on S x A");
  }
  double mass = 0.0;
  for (double w : rho) {
    if (w < 0.0) throw std::invalid_argument("persistence_loss_bound: rho has negative weight");
    mass += w;
  }
  if (std::abs(mass - 1.0) > 1e-9) {
    throw std::invalid_argument("persistence_loss_bound: rho does not sum to 1");
  }

  BoundReport report;
  report.k = k;
  report.p = p;
  if (k == 1) return report;  // persisting for one step changes nothing

  const double g = m.discount;
  report.coefficient =
      g * (1.0 - std::pow(g, k - 1)) / ((1.0 - g) * (1.0 - std::pow(g, k)));

  const TabularQ q_pi = solve_q(m, pi, tol);
  const TabularQ q_pi_k = solve_q_persistent(m, pi, k, tol, PersistentMethod::kComposition);

  // lhs = || Q^pi - Q^pi_k ||_{p, rho}
  double lhs_acc = 0.0;
  for (int i = 0; i < n; ++i) {
    lhs_acc += rho[i] * std::pow(std::abs(q_pi.v[i] - q_pi_k.v[i]), p);
  }
  report.lhs = std::pow(lhs_acc, 1.0 / p);

  // The function set: (T^delta)^{k-2-l} T^pi Q^pi_k for l = 0..k-2,
  // materialized by k-1 exact operator applications.
  std::vector<TabularQ> fs;
  fs.reserve(static_cast<std::size_t>(k) - 1);
  fs.push_back(apply_expectation(m, pi, q_pi_k));
  for (int i = 1; i < k - 1; ++i) fs.push_back(apply_persistent(m, fs.back()));

  // d(s,a) = max_f | sum_{s',a'} (P^pi - P^delta)(s',a'|s,a) f(s',a') |.
  std::vector<double> d(n, 0.0);
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      double best = 0.0;
      for (const TabularQ& f : fs) {
        double acc = 0.0;
        for (int s2 = 0; s2 < m.n_states; ++s2) {
          const double ps = m.p(s, a, s2);
          if (ps == 0.0) continue;
          double expected = 0.0;
          for (int a2 = 0; a2 < m.n_actions; ++a2) expected += pi.pi(s2, a2) * f.at(s2, a2);
          acc += ps * (expected - f.at(s2, a));
        }
        best = std::max(best, std::abs(acc));
      }
      d[s * m.n_actions + a] = best;
    }
  }

  // eta: full Neumann series minus the i mod k == 0 subseries, both solved
  // as linear systems in the joint space, then normalized.
  const Eigen::MatrixXd P = joint_kernel(m, pi);
  Eigen::VectorXd rho_vec(n);
  for (int i = 0; i < n; ++i) rho_vec(i) = rho[i];
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  // x1^T = gamma * rho^T (I - gamma P)^{-1}
  Eigen::VectorXd x1 = (I - g * P.transpose()).partialPivLu().solve(g * rho_vec);
  // x2^T = gamma^k * rho^T P^{k-1} (I - gamma^k P^k)^{-1}
  Eigen::MatrixXd Pk = I;
  for (int i = 0; i < k; ++i) Pk = Pk * P;
  Eigen::VectorXd rho_shift = rho_vec;
  for (int i = 0; i < k - 1; ++i) rho_shift = P.transpose() * rho_shift;
  const double gk = std::pow(g, k);
  Eigen::VectorXd x2 = (I - gk * Pk.transpose()).partialPivLu().solve(gk * rho_shift);

  report.eta.resize(n);
  const double norm_const = 1.0 / report.coefficient;
  for (int i = 0; i < n; ++i) {
    double w = (x1(i) - x2(i)) * norm_const;
    if (w < 0.0) {
      if (w < -1e-10) throw std::logic_error("persistence_loss_bound: negative eta weight");
      w = 0.0;
    }
    report.eta[i] = w;
  }

  double norm_acc = 0.0;
  for (int i = 0; i < n; ++i) norm_acc += report.eta[i] * std::pow(d[i], p);
  report.dissimilarity_norm = std::pow(norm_acc, 1.0 / p);
  report.rhs = report.coefficient * report.dissimilarity_norm;
  return report;
}

TabularMdp counterexample_mdp(double R, double gamma) {
  if (R <= 0.0) throw std::invalid_argument("counterexample_mdp: R must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("counterexample_mdp: gamma must lie in (0, 1)");
  }
  TabularMdp m(4, 2, gamma);
  m.r_max = R;
  const int s_minus = 0, s1 = 1, s2 = 2, s3 = 3;
  const int a1 = 0, a2 = 1;
  // From s-: both actions pay 0; a1 heads toward the good branch.
  m.p(s_minus, a1, s1) = 1.0;
  m.r(s_minus, a1) = 0.0;
  m.p(s_minus, a2, s3) = 1.0;
  m.r(s_minus, a2) = 0.0;
  // From s1: a2 reaches the +R absorbing state, a1 falls into the -R one.
  m.p(s1, a2, s2) = 1.0;
  m.r(s1, a2) = R;
  m.p(s1, a1, s3) = 1.0;
  m.r(s1, a1) = -R;
  // Absorbing states: every action loops with the same reward.
  for (int a = 0; a < 2; ++a) {
    m.p(s2, a, s2) = 1.0;
    m.r(s2, a) = R;
    m.p(s3, a, s3) = 1.0;
    m.r(s3, a) = -R;
  }
  m.validate();
  return m;
}

}  // namespace pfqi
