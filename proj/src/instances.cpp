#include "pfqi/instances.hpp"

#include <cmath>
#include <string>

#include "pfqi/rng.hpp"

namespace pfqi {

TabularMdp random_mdp(std::mt19937_64& g, int max_states, int max_actions, double max_gamma) {
  const int n_states = 2 + rng::index(g, max_states - 1);
  const int n_actions = 2 + rng::index(g, max_actions - 1);
  TabularMdp m(n_states, n_actions, rng::range(g, 0.3, max_gamma));
  m.r_max = 1.0;
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        const double w = -std::log(1.0 - rng::unit(g));
        m.p(s, a, s2) = w;
        sum += w;
      }
      for (int s2 = 0; s2 < n_states; ++s2) m.p(s, a, s2) /= sum;
      m.r(s, a) = rng::range(g, -1.0, 1.0);
    }
  }
  m.validate();
  return m;
}

TabularMdp random_deterministic_mdp(std::mt19937_64& g, int max_states, int max_actions,
                                    double max_gamma) {
  const int n_states = 2 + rng::index(g, max_states - 1);
  const int n_actions = 2 + rng::index(g, max_actions - 1);
  TabularMdp m(n_states, n_actions, rng::range(g, 0.3, max_gamma));
  m.r_max = 1.0;
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      m.p(s, a, rng::index(g, n_states)) = 1.0;
      m.r(s, a) = rng::range(g, -1.0, 1.0);
    }
  }
  m.validate();
  return m;
}

TabularDistPolicy random_stochastic_policy(std::mt19937_64& g, int n_states, int n_actions) {
  TabularDistPolicy pi(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      const double w = -std::log(1.0 - rng::unit(g));
      pi.pi(s, a) = w;
      sum += w;
    }
    for (int a = 0; a < n_actions; ++a) pi.pi(s, a) /= sum;
  }
  pi.validate();
  return pi;
}

std::vector<double> random_distribution(std::mt19937_64& g, int n) {
  std::vector<double> out(n);
  double sum = 0.0;
  for (double& v : out) {
    v = -std::log(1.0 - rng::unit(g));
    sum += v;
  }
  for (double& v : out) v /= sum;
  return out;
}

Dataset synthetic_tabular_dataset(const TabularMdp& m, std::size_t n, std::uint64_t seed) {
  m.validate();
  Dataset ds;
  ds.manifest.env_name = "synthetic-tabular";
  ds.manifest.sampling_persistence = 1;
  ds.manifest.seed = seed;
  ds.manifest.discount = m.discount;
  ds.manifest.state_dim = 1;
  for (int a = 0; a < m.n_actions; ++a) {
    ds.manifest.action_set.push_back({static_cast<double>(a)});
  }
  auto g = rng::engine(rng::derive(seed, rng::kCollect));
  for (std::size_t i = 0; i < n; ++i) {
    const int s = static_cast<int>(i % m.n_states);
    const int a = static_cast<int>((i / m.n_states) % m.n_actions);
    double u = rng::unit(g);
    int s2 = m.n_states - 1;
    double acc = 0.0;
    for (int c = 0; c < m.n_states; ++c) {
      acc += m.p(s, a, c);
      if (u < acc) {
        s2 = c;
        break;
      }
    }
    Trajectory traj;
    traj.initial_state = {static_cast<double>(s)};
    traj.transitions.push_back(Transition{{static_cast<double>(s)},
                                          a,
                                          {static_cast<double>(s2)},
                                          m.r(s, a),
                                          false});
    ds.trajectories.push_back(std::move(traj));
  }
  ds.manifest.n_samples = n;
  ds.validate();
  return ds;
}

}  // namespace pfqi
