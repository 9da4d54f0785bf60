#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pfqi {

// Static description of an environment, including the time-discretization
// bookkeeping: refining the original control step by an integer factor m
// stretches the horizon to H = m * H_original and raises the discount to
// gamma = gamma_original^(1/m), keeping the effective horizon fixed.
struct EnvSpec {
  std::string name;
  int state_dim = 0;
  std::vector<std::vector<double>> action_set;  // primitive action vectors
  double base_timestep = 0.0;                   // seconds, = original_timestep / m
  int discretization_factor = 1;                // m
  int horizon = 0;                              // H = m * H_original
  double discount = 0.0;                        // gamma = gamma_original^(1/m)
  int original_horizon = 0;
  double original_discount = 0.0;
  std::string reward_desc;

  int n_actions() const { return static_cast<int>(action_set.size()); }
  void validate() const;
};

struct StepResult {
  std::vector<double> next_state;
  double reward = 0.0;
  bool terminal = false;
};

// Seeded simulator. Instances are single-owner mutable; create one per
// worker. step() after a terminal transition (without reset) throws
// std::logic_error. Trajectories are reproducible from the reset seed.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual StepResult step(int action) = 0;
};

}  // namespace pfqi
