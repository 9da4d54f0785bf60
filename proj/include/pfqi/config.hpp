#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pfqi/envs.hpp"
#include "pfqi/regress.hpp"

namespace pfqi {

// Experiment configuration. The on-disk format is a flat key-value document
// with dotted keys, one `key = value` per line, `#` comments; lists are
// comma-separated. Unset keys fall back to per-environment defaults drawn
// from the standard batch protocol (see configs/ for committed examples).
struct ExperimentConfig {
  std::string env_name = "cartpole";
  EnvOverrides env;

  // collection
  std::string collect_policy = "uniform";  // uniform | greedy
  std::string collect_model;               // model file for greedy collection
  int k_sampling = 1;
  bool collect_persistent_env = false;
  int n_trajectories = 0;      // 0 = collect until the sample budget
  std::size_t n_samples = 0;   // 0 = no budget

  // training
  std::vector<int> candidates = {1, 2, 4, 8, 16};  // K
  int iterations = 512;                            // J
  RegressorConfig regressor;
  QRepresentation representation = QRepresentation::kActionFeature;
  int snapshot_every = 0;

  // evaluation
  int eval_episodes = 10;
  std::vector<int> eval_persistences;  // K'; empty = evaluate each k at k' = k
  int eval_horizon = 0;                // 0 = environment horizon

  // seeding
  std::uint64_t master_seed = 1;
  int n_seeds = 1;

  void validate() const;

  // Canonical serialization: sorted keys, 17-digit floats. Equal configs
  // hash equal; the hash is stamped into every output artifact.
  std::string canonical() const;
  std::string hash() const;

  static ExperimentConfig from_map(const std::map<std::string, std::string>& kv);
  static ExperimentConfig load(const std::filesystem::path& file,
                               const std::vector<std::string>& overrides = {});
};

std::map<std::string, std::string> parse_config_text(const std::string& text);

}  // namespace pfqi
