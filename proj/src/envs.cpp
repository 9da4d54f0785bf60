#include "pfqi/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <utility>

#include <nlohmann/json.hpp>

#include "pfqi/exact.hpp"
#include "pfqi/persistence.hpp"
#include "pfqi/rng.hpp"

namespace pfqi {

void EnvSpec::validate() const {
  if (state_dim <= 0 || action_set.empty()) {
    throw std::invalid_argument("EnvSpec: state_dim and action_set must be non-empty");
  }
  if (discretization_factor < 1) {
    throw std::invalid_argument("EnvSpec: discretization factor must be an integer >= 1");
  }
  if (horizon != discretization_factor * original_horizon) {
    throw std::invalid_argument("EnvSpec: horizon != m * original_horizon");
  }
  const double expected = std::pow(original_discount, 1.0 / discretization_factor);
  if (std::abs(discount - expected) > 1e-12) {
    throw std::invalid_argument("EnvSpec: discount != original_discount^(1/m)");
  }
}

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double x) {
  x = std::fmod(x + kPi, 2.0 * kPi);
  if (x < 0.0) x += 2.0 * kPi;
  return x - kPi;
}

// Common scaffolding: terminal latch and the rescaled spec.
class ClassicControlEnv : public Environment {
 public:
  const EnvSpec& spec() const override { return spec_; }

  std::vector<double> reset(std::uint64_t seed) override {
    rng_ = rng::engine(seed);
    done_ = false;
    reset_state(rng_);
    return observe();
  }

  StepResult step(int action) override {
    if (done_) throw std::logic_error(spec_.name + ": step after terminal");
    if (action < 0 || action >= spec_.n_actions()) {
      throw std::invalid_argument(spec_.name + ": action index out of range");
    }
    StepResult out = advance(spec_.action_set[action]);
    done_ = out.terminal;
    return out;
  }

 protected:
  virtual void reset_state(std::mt19937_64& g) = 0;
  virtual std::vector<double> observe() const = 0;
  virtual StepResult advance(const std::vector<double>& action) = 0;

  void init_spec(std::string name, int state_dim, std::vector<std::vector<double>> actions,
                 double original_timestep, int m, int original_horizon,
                 double original_discount, std::string reward_desc) {
    spec_.name = std::move(name);
    spec_.state_dim = state_dim;
    spec_.action_set = std::move(actions);
    spec_.discretization_factor = m;
    spec_.base_timestep = original_timestep / m;
    spec_.original_horizon = original_horizon;
    spec_.horizon = m * original_horizon;
    spec_.original_discount = original_discount;
    spec_.discount = std::pow(original_discount, 1.0 / m);
    spec_.reward_desc = std::move(reward_desc);
    spec_.validate();
  }

  EnvSpec spec_;
  std::mt19937_64 rng_;
  bool done_ = false;
};

// Cart-pole balancing (Barto-Sutton-Anderson dynamics, Euler integration).
// State: [x, x_dot, theta, theta_dot]; +1 reward per step until the pole or
// cart leaves the allowed band. As with mountain car, the refinement factor
// m stretches the horizon and discount while the integrator keeps the
// canonical 0.02 s step: persistences k >= 8 then hold one force for 0.16 s
// and longer, which no policy survives, separating useful from excessive
// persistence on this task.
class CartpoleEnv final : public ClassicControlEnv {
 public:
  explicit CartpoleEnv(int m) {
    init_spec("cartpole", 4, {{-1.0}, {1.0}}, 0.02, m, 128, 0.99, "+1 per step alive");
    spec_.base_timestep = kTau;  // canonical step; m rescales horizon/discount
  }

 private:
  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kTotalMass = kMassCart + kMassPole;
  static constexpr double kLength = 0.5;  // half-pole length
  static constexpr double kPoleMassLength = kMassPole * kLength;
  static constexpr double kForceMag = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kThetaThreshold = 12.0 * 2.0 * kPi / 360.0;
  static constexpr double kXThreshold = 2.4;

  void reset_state(std::mt19937_64& g) override {
    for (double& v : s_) v = rng::range(g, -0.05, 0.05);
  }

  std::vector<double> observe() const override { return {s_[0], s_[1], s_[2], s_[3]}; }

  StepResult advance(const std::vector<double>& action) override {
    const double tau = kTau;
    const double force = action[0] * kForceMag;
    const double costheta = std::cos(s_[2]);
    const double sintheta = std::sin(s_[2]);
    const double temp =
        (force + kPoleMassLength * s_[3] * s_[3] * sintheta) / kTotalMass;
    const double thetaacc =
        (kGravity * sintheta - costheta * temp) /
        (kLength * (4.0 / 3.0 - kMassPole * costheta * costheta / kTotalMass));
    const double xacc = temp - kPoleMassLength * thetaacc * costheta / kTotalMass;
    s_[0] += tau * s_[1];
    s_[1] += tau * xacc;
    s_[2] += tau * s_[3];
    s_[3] += tau * thetaacc;
    const bool fell = s_[0] < -kXThreshold || s_[0] > kXThreshold ||
                      s_[2] < -kThetaThreshold || s_[2] > kThetaThreshold;
    return StepResult{observe(), 1.0, fell};
  }

  double s_[4] = {0, 0, 0, 0};
};

// Mountain car (Moore). State: [position, velocity]; -1 per step until the
// goal position is reached. The canonical formulation advances in unitless
// steps rather than seconds, so the refinement factor m stretches the
// horizon and discount but the integrator keeps its unit step: a uniform
// policy persisted at k_sampling = 8 then reaches the goal in a few percent
// of episodes, while rescaled unit dynamics never get there at any m.
class MountainCarEnv final : public ClassicControlEnv {
 public:
  explicit MountainCarEnv(int m) {
    init_spec("mountaincar", 2, {{-1.0}, {0.0}, {1.0}}, 1.0, m, 128, 0.99,
              "-1 per step until goal");
    spec_.base_timestep = 1.0;  // unit step count, not seconds
  }

 private:
  static constexpr double kMinPosition = -1.2;
  static constexpr double kMaxPosition = 0.6;
  static constexpr double kMaxSpeed = 0.07;
  static constexpr double kGoalPosition = 0.5;
  static constexpr double kForce = 0.001;
  static constexpr double kGravity = 0.0025;

  void reset_state(std::mt19937_64& g) override {
    position_ = rng::range(g, -0.6, -0.4);
    velocity_ = 0.0;
  }

  std::vector<double> observe() const override { return {position_, velocity_}; }

  StepResult advance(const std::vector<double>& action) override {
    velocity_ += action[0] * kForce - kGravity * std::cos(3.0 * position_);
    velocity_ = std::clamp(velocity_, -kMaxSpeed, kMaxSpeed);
    position_ += velocity_;
    position_ = std::clamp(position_, kMinPosition, kMaxPosition);
    if (position_ <= kMinPosition && velocity_ < 0.0) velocity_ = 0.0;
    const bool goal = position_ >= kGoalPosition;
    return StepResult{observe(), -1.0, goal};
  }

  double position_ = 0.0;
  double velocity_ = 0.0;
};

// Torque-limited pendulum swing-up. State: [theta (wrapped), theta_dot];
// negative quadratic cost, never terminal. Semi-implicit Euler as in the
// canonical formulation (rod pivoted at one end, theta = 0 upright).
class PendulumEnv final : public ClassicControlEnv {
 public:
  explicit PendulumEnv(int m) {
    init_spec("pendulum", 2, {{-2.0}, {0.0}, {2.0}}, 0.05, m, 256, 0.99,
              "-(theta^2 + 0.1 theta_dot^2 + 0.001 u^2)");
  }

 private:
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;

  void reset_state(std::mt19937_64& g) override {
    theta_ = rng::range(g, -kPi, kPi);
    theta_dot_ = rng::range(g, -1.0, 1.0);
  }

  std::vector<double> observe() const override { return {theta_, theta_dot_}; }

  StepResult advance(const std::vector<double>& action) override {
    const double dt = spec_.base_timestep;
    const double u = std::clamp(action[0], -2.0, 2.0);
    const double cost = theta_ * theta_ + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u;
    double new_theta_dot =
        theta_dot_ + (1.5 * kGravity / kLength * std::sin(theta_) +
                      3.0 / (kMass * kLength * kLength) * u) *
                         dt;
    theta_ = wrap_angle(theta_ + new_theta_dot * dt);
    theta_dot_ = std::clamp(new_theta_dot, -kMaxSpeed, kMaxSpeed);
    return StepResult{observe(), -cost, false};
  }

  double theta_ = 0.0;
  double theta_dot_ = 0.0;
};

// Acrobot swing-up (Sutton's book dynamics, RK4 integration). State:
// [theta1, theta2, theta1_dot, theta2_dot]; -1 per step until the tip
// clears the bar, 0 on the final transition.
class AcrobotEnv final : public ClassicControlEnv {
 public:
  explicit AcrobotEnv(int m) {
    init_spec("acrobot", 4, {{-1.0}, {0.0}, {1.0}}, 0.2, m, 128, 0.99,
              "-1 per step until swing-up");
  }

 private:
  static constexpr double kM1 = 1.0, kM2 = 1.0;
  static constexpr double kL1 = 1.0;
  static constexpr double kLc1 = 0.5, kLc2 = 0.5;
  static constexpr double kI1 = 1.0, kI2 = 1.0;
  static constexpr double kGravity = 9.8;
  static constexpr double kMaxVel1 = 4.0 * kPi;
  static constexpr double kMaxVel2 = 9.0 * kPi;

  void reset_state(std::mt19937_64& g) override {
    for (double& v : s_) v = rng::range(g, -0.1, 0.1);
  }

  std::vector<double> observe() const override { return {s_[0], s_[1], s_[2], s_[3]}; }

  static void dsdt(const double (&s)[4], double torque, double (&ds)[4]) {
    const double theta1 = s[0], theta2 = s[1], dtheta1 = s[2], dtheta2 = s[3];
    const double d1 = kM1 * kLc1 * kLc1 +
                      kM2 * (kL1 * kL1 + kLc2 * kLc2 + 2.0 * kL1 * kLc2 * std::cos(theta2)) +
                      kI1 + kI2;
    const double d2 = kM2 * (kLc2 * kLc2 + kL1 * kLc2 * std::cos(theta2)) + kI2;
    const double phi2 = kM2 * kLc2 * kGravity * std::cos(theta1 + theta2 - kPi / 2.0);
    const double phi1 = -kM2 * kL1 * kLc2 * dtheta2 * dtheta2 * std::sin(theta2) -
                        2.0 * kM2 * kL1 * kLc2 * dtheta2 * dtheta1 * std::sin(theta2) +
                        (kM1 * kLc1 + kM2 * kL1) * kGravity * std::cos(theta1 - kPi / 2.0) +
                        phi2;
    const double ddtheta2 =
        (torque + d2 / d1 * phi1 - kM2 * kL1 * kLc2 * dtheta1 * dtheta1 * std::sin(theta2) -
         phi2) /
        (kM2 * kLc2 * kLc2 + kI2 - d2 * d2 / d1);
    const double ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    ds[0] = dtheta1;
    ds[1] = dtheta2;
    ds[2] = ddtheta1;
    ds[3] = ddtheta2;
  }

  StepResult advance(const std::vector<double>& action) override {
    const double dt = spec_.base_timestep;
    const double torque = action[0];
    double k1[4], k2[4], k3[4], k4[4], tmp[4];
    dsdt(s_, torque, k1);
    for (int i = 0; i < 4; ++i) tmp[i] = s_[i] + 0.5 * dt * k1[i];
    dsdt(tmp, torque, k2);
    for (int i = 0; i < 4; ++i) tmp[i] = s_[i] + 0.5 * dt * k2[i];
    dsdt(tmp, torque, k3);
    for (int i = 0; i < 4; ++i) tmp[i] = s_[i] + dt * k3[i];
    dsdt(tmp, torque, k4);
    for (int i = 0; i < 4; ++i) s_[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    s_[0] = wrap_angle(s_[0]);
    s_[1] = wrap_angle(s_[1]);
    s_[2] = std::clamp(s_[2], -kMaxVel1, kMaxVel1);
    s_[3] = std::clamp(s_[3], -kMaxVel2, kMaxVel2);
    const bool up = -std::cos(s_[0]) - std::cos(s_[1] + s_[0]) > 1.0;
    return StepResult{observe(), up ? 0.0 : -1.0, up};
  }

  double s_[4] = {0, 0, 0, 0};
};

class TabularEnv final : public Environment {
 public:
  TabularEnv(TabularMdp mdp, std::vector<double> initial_dist, std::string name, int horizon)
      : mdp_(std::move(mdp)), initial_dist_(std::move(initial_dist)) {
    mdp_.validate();
    if (initial_dist_.empty()) {
      initial_dist_.assign(mdp_.n_states, 1.0 / mdp_.n_states);
    }
    if (static_cast<int>(initial_dist_.size()) != mdp_.n_states) {
      throw std::invalid_argument("TabularEnv: initial distribution size mismatch");
    }
    spec_.name = std::move(name);
    spec_.state_dim = 1;
    for (int a = 0; a < mdp_.n_actions; ++a) {
      spec_.action_set.push_back({static_cast<double>(a)});
    }
    spec_.base_timestep = 1.0;
    spec_.discretization_factor = 1;
    spec_.horizon = horizon;
    spec_.original_horizon = horizon;
    spec_.discount = mdp_.discount;
    spec_.original_discount = mdp_.discount;
    spec_.reward_desc = "tabular r(s,a)";
  }

  const EnvSpec& spec() const override { return spec_; }
  const TabularMdp& mdp() const { return mdp_; }

  std::vector<double> reset(std::uint64_t seed) override {
    rng_ = rng::engine(seed);
    state_ = sample(initial_dist_.data(), mdp_.n_states);
    return {static_cast<double>(state_)};
  }

  StepResult step(int action) override {
    if (action < 0 || action >= mdp_.n_actions) {
      throw std::invalid_argument("TabularEnv: action index out of range");
    }
    const double reward = mdp_.r(state_, action);
    state_ = sample(mdp_.row(state_, action).data(), mdp_.n_states);
    return StepResult{{static_cast<double>(state_)}, reward, false};
  }

 private:
  int sample(const double* weights, int n) {
    double u = rng::unit(rng_);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return n - 1;
  }

  TabularMdp mdp_;
  std::vector<double> initial_dist_;
  EnvSpec spec_;
  std::mt19937_64 rng_;
  int state_ = 0;
};

TabularMdp tabular_from_json(const nlohmann::json& doc) {
  TabularMdp m(doc.at("n_states").get<int>(), doc.at("n_actions").get<int>(),
               doc.at("gamma").get<double>());
  const auto& P = doc.at("P");
  const auto& r = doc.at("r");
  double r_max = 0.0;
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      m.r(s, a) = r.at(s).at(a).get<double>();
      r_max = std::max(r_max, std::abs(m.r(s, a)));
      for (int s2 = 0; s2 < m.n_states; ++s2) {
        m.p(s, a, s2) = P.at(s).at(a).at(s2).get<double>();
      }
    }
  }
  m.r_max = doc.value("r_max", r_max);
  m.validate();
  return m;
}

std::unique_ptr<Environment> load_tabular_file(const std::string& path, const EnvOverrides& o) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("tabular-file: cannot open " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  TabularMdp m = tabular_from_json(doc);
  std::vector<double> init;
  if (doc.contains("initial_dist")) init = doc.at("initial_dist").get<std::vector<double>>();
  const int horizon = o.horizon.value_or(doc.value("horizon", 256));
  return make_tabular_env(std::move(m), std::move(init), doc.value("name", "tabular-file"),
                          horizon);
}

}  // namespace

std::unique_ptr<Environment> make_tabular_env(TabularMdp mdp, std::vector<double> initial_dist,
                                              std::string name, int horizon) {
  return std::make_unique<TabularEnv>(std::move(mdp), std::move(initial_dist), std::move(name),
                                      horizon);
}

std::unique_ptr<Environment> make_env(const std::string& name, const EnvOverrides& o) {
  std::string base = name;
  double ce_R = o.counterexample_reward.value_or(1.0);
  double ce_gamma = o.counterexample_discount.value_or(0.9);
  std::string file = o.tabular_file.value_or("");

  // counterexample(R,gamma) and tabular-file:path carry arguments inline.
  if (auto pos = base.find('('); pos != std::string::npos && base.back() == ')') {
    const std::string args = base.substr(pos + 1, base.size() - pos - 2);
    base = base.substr(0, pos);
    const auto comma = args.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("make_env: expected counterexample(R,gamma)");
    }
    ce_R = std::stod(args.substr(0, comma));
    ce_gamma = std::stod(args.substr(comma + 1));
  } else if (auto colon = base.find(':'); colon != std::string::npos) {
    file = base.substr(colon + 1);
    base = base.substr(0, colon);
  }

  const int m = o.discretization_factor.value_or(0);
  if (o.discretization_factor && m < 1) {
    throw std::invalid_argument("make_env: discretization factor must be an integer >= 1");
  }

  std::unique_ptr<Environment> env;
  if (base == "cartpole") {
    env = std::make_unique<CartpoleEnv>(m > 0 ? m : 4);
  } else if (base == "mountaincar") {
    env = std::make_unique<MountainCarEnv>(m > 0 ? m : 2);
  } else if (base == "pendulum") {
    env = std::make_unique<PendulumEnv>(m > 0 ? m : 1);
  } else if (base == "acrobot") {
    env = std::make_unique<AcrobotEnv>(m > 0 ? m : 4);
  } else if (base == "counterexample") {
    std::vector<double> init(4, 0.0);
    init[kCounterexampleStart] = 1.0;
    env = make_tabular_env(counterexample_mdp(ce_R, ce_gamma), std::move(init), "counterexample",
                           o.horizon.value_or(256));
  } else if (base == "tabular-file") {
    if (file.empty()) throw std::invalid_argument("make_env: tabular-file needs a path");
    env = load_tabular_file(file, o);
  } else {
    throw std::invalid_argument("make_env: unknown environment '" + base + "'");
  }
  return env;
}

Dataset collect_dataset(Environment& env, const CollectOptions& opts) {
  if (opts.n_trajectories < 1 && opts.max_samples == 0) {
    throw std::invalid_argument("collect_dataset: need n_trajectories >= 1 or a sample budget");
  }
  if (opts.k_sampling < 1) throw std::invalid_argument("collect_dataset: k_sampling must be >= 1");
  if (opts.policy == CollectPolicy::kGreedy && opts.greedy_q == nullptr) {
    throw std::invalid_argument("collect_dataset: greedy collection needs a Q-function");
  }

  const EnvSpec& base_spec = env.spec();
  std::unique_ptr<Policy> policy;
  if (opts.policy == CollectPolicy::kUniform) {
    policy = std::make_unique<UniformPolicy>(base_spec.n_actions());
  } else {
    policy = std::make_unique<GreedyPolicy>(*opts.greedy_q);
  }

  std::unique_ptr<Environment> wrapped;
  Environment* target = &env;
  int rollout_persistence = opts.k_sampling;
  int horizon = base_spec.horizon;
  if (opts.in_persistent_env) {
    wrapped = wrap_persistent_env(env, opts.k_sampling);
    target = wrapped.get();
    rollout_persistence = 1;
    horizon = wrapped->spec().horizon;
  }

  Dataset ds;
  ds.manifest.env_name = base_spec.name;
  ds.manifest.sampling_persistence = opts.k_sampling;
  ds.manifest.collected_in_persistent_env = opts.in_persistent_env;
  ds.manifest.seed = opts.seed;
  ds.manifest.discount = target->spec().discount;
  ds.manifest.state_dim = base_spec.state_dim;
  ds.manifest.action_set = base_spec.action_set;

  std::size_t total = 0;
  for (int i = 0; opts.n_trajectories < 1 || i < opts.n_trajectories; ++i) {
    if (opts.max_samples > 0 && total >= opts.max_samples) break;
    Trajectory traj = persistent_rollout(*target, *policy, rollout_persistence, horizon,
                                         rng::derive(opts.seed, rng::kCollect, i));
    if (opts.max_samples > 0 && total + traj.transitions.size() > opts.max_samples) {
      traj.transitions.resize(opts.max_samples - total);  // horizon truncation, not terminal
    }
    total += traj.transitions.size();
    ds.trajectories.push_back(std::move(traj));
  }
  ds.manifest.n_samples = total;
  ds.validate();
  return ds;
}

}  // namespace pfqi
