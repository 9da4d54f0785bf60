#include "pfqi/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "pfqi/io.hpp"
#include "pfqi/rng.hpp"

namespace pfqi {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

// Protocol defaults per environment: sampling persistence, batch size, and
// iteration count of the standard configuration.
void apply_env_defaults(ExperimentConfig& c) {
  if (c.env_name.rfind("cartpole", 0) == 0) {
    c.k_sampling = 1;
    c.n_trajectories = 0;
    c.n_samples = 400;
    c.iterations = 512;
  } else if (c.env_name.rfind("mountaincar", 0) == 0) {
    c.k_sampling = 8;
    c.n_trajectories = 20;
    c.iterations = 256;
    c.candidates = {1, 2, 4, 8, 16, 32};
  } else if (c.env_name.rfind("pendulum", 0) == 0) {
    c.k_sampling = 1;
    c.n_trajectories = 100;
    c.iterations = 64;
    c.candidates = {1, 2, 4, 8};
  } else if (c.env_name.rfind("acrobot", 0) == 0) {
    c.k_sampling = 4;
    c.n_trajectories = 200;
    c.iterations = 512;
  } else {
    c.k_sampling = 1;
    c.n_trajectories = 32;
    c.iterations = 64;
    c.candidates = {1, 2, 4};
    c.regressor.kind = "table";
  }
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

ExperimentConfig ExperimentConfig::from_map(const std::map<std::string, std::string>& kv) {
  ExperimentConfig c;
  auto it = kv.find("env.name");
  if (it != kv.end()) c.env_name = it->second;
  apply_env_defaults(c);

  for (const auto& [key, value] : kv) {
    if (key == "env.name") {
      // already applied
    } else if (key == "env.m") {
      c.env.discretization_factor = std::stoi(value);
    } else if (key == "env.horizon") {
      c.env.horizon = std::stoi(value);
    } else if (key == "env.R") {
      c.env.counterexample_reward = std::stod(value);
    } else if (key == "env.gamma") {
      c.env.counterexample_discount = std::stod(value);
    } else if (key == "env.file") {
      c.env.tabular_file = value;
    } else if (key == "collect.policy") {
      c.collect_policy = value;
    } else if (key == "collect.model") {
      c.collect_model = value;
    } else if (key == "collect.k_sampling") {
      c.k_sampling = std::stoi(value);
    } else if (key == "collect.persistent_env") {
      c.collect_persistent_env = value == "1" || value == "true";
    } else if (key == "collect.n_trajectories") {
      c.n_trajectories = std::stoi(value);
    } else if (key == "collect.n_samples") {
      c.n_samples = std::stoul(value);
    } else if (key == "pfqi.J") {
      c.iterations = std::stoi(value);
    } else if (key == "pfqi.K") {
      c.candidates = parse_int_list(value);
    } else if (key == "pfqi.regressor") {
      c.regressor.kind = value;
    } else if (key == "pfqi.n_estimators") {
      c.regressor.extra_trees.n_estimators = std::stoi(value);
    } else if (key == "pfqi.min_samples_split") {
      c.regressor.extra_trees.min_samples_split = std::stoi(value);
    } else if (key == "pfqi.min_samples_leaf") {
      c.regressor.extra_trees.min_samples_leaf = std::stoi(value);
    } else if (key == "pfqi.max_features") {
      if (value == "all") {
        c.regressor.extra_trees.max_features = MaxFeatures::kAll;
      } else if (value == "sqrt") {
        c.regressor.extra_trees.max_features = MaxFeatures::kSqrt;
      } else {
        c.regressor.extra_trees.max_features = MaxFeatures::kCount;
        c.regressor.extra_trees.max_features_count = std::stoi(value);
      }
    } else if (key == "pfqi.knn_k") {
      c.regressor.knn_k = std::stoi(value);
    } else if (key == "pfqi.q_representation") {
      if (value == "action_feature") {
        c.representation = QRepresentation::kActionFeature;
      } else if (value == "per_action") {
        c.representation = QRepresentation::kPerAction;
      } else {
        throw std::invalid_argument("config: pfqi.q_representation must be "
                                    "action_feature or per_action");
      }
    } else if (key == "pfqi.snapshot_every") {
      c.snapshot_every = std::stoi(value);
    } else if (key == "eval.n_episodes") {
      c.eval_episodes = std::stoi(value);
    } else if (key == "eval.k_prime") {
      c.eval_persistences = parse_int_list(value);
    } else if (key == "eval.horizon") {
      c.eval_horizon = std::stoi(value);
    } else if (key == "seeds.master") {
      c.master_seed = std::stoull(value);
    } else if (key == "seeds.n") {
      c.n_seeds = std::stoi(value);
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& file,
                                        const std::vector<std::string>& overrides) {
  auto kv = parse_config_text(io::read_text(file));
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("override '" + ov + "': expected key=value");
    }
    kv[ov.substr(0, eq)] = ov.substr(eq + 1);
  }
  return from_map(kv);
}

void ExperimentConfig::validate() const {
  if (candidates.empty()) throw std::invalid_argument("config: pfqi.K must be non-empty");
  for (int k : candidates) {
    if (k < 1) throw std::invalid_argument("config: persistences must be >= 1");
    if (iterations % k != 0) {
      throw std::invalid_argument("config: pfqi.J = " + std::to_string(iterations) +
                                  " is not a multiple of k = " + std::to_string(k));
    }
  }
  for (int kp : eval_persistences) {
    if (kp < 1) throw std::invalid_argument("config: eval persistences must be >= 1");
  }
  if (n_seeds < 1) throw std::invalid_argument("config: seeds.n must be >= 1");
  if (eval_episodes < 1) throw std::invalid_argument("config: eval.n_episodes must be >= 1");
  if (n_trajectories < 1 && n_samples == 0) {
    throw std::invalid_argument("config: need collect.n_trajectories or collect.n_samples");
  }
  if (collect_policy != "uniform" && collect_policy != "greedy") {
    throw std::invalid_argument("config: collect.policy must be uniform or greedy");
  }
}

std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["env.name"] = env_name;
  if (env.discretization_factor) kv["env.m"] = std::to_string(*env.discretization_factor);
  if (env.horizon) kv["env.horizon"] = std::to_string(*env.horizon);
  if (env.counterexample_reward) kv["env.R"] = io::format_double(*env.counterexample_reward);
  if (env.counterexample_discount) {
    kv["env.gamma"] = io::format_double(*env.counterexample_discount);
  }
  if (env.tabular_file) kv["env.file"] = *env.tabular_file;
  kv["collect.policy"] = collect_policy;
  if (!collect_model.empty()) kv["collect.model"] = collect_model;
  kv["collect.k_sampling"] = std::to_string(k_sampling);
  kv["collect.persistent_env"] = collect_persistent_env ? "1" : "0";
  kv["collect.n_trajectories"] = std::to_string(n_trajectories);
  kv["collect.n_samples"] = std::to_string(n_samples);
  kv["pfqi.J"] = std::to_string(iterations);
  kv["pfqi.K"] = join_ints(candidates);
  kv["pfqi.regressor"] = regressor.kind;
  kv["pfqi.n_estimators"] = std::to_string(regressor.extra_trees.n_estimators);
  kv["pfqi.min_samples_split"] = std::to_string(regressor.extra_trees.min_samples_split);
  kv["pfqi.min_samples_leaf"] = std::to_string(regressor.extra_trees.min_samples_leaf);
  switch (regressor.extra_trees.max_features) {
    case MaxFeatures::kAll:
      kv["pfqi.max_features"] = "all";
      break;
    case MaxFeatures::kSqrt:
      kv["pfqi.max_features"] = "sqrt";
      break;
    case MaxFeatures::kCount:
      kv["pfqi.max_features"] = std::to_string(regressor.extra_trees.max_features_count);
      break;
  }
  kv["pfqi.knn_k"] = std::to_string(regressor.knn_k);
  kv["pfqi.q_representation"] =
      representation == QRepresentation::kActionFeature ? "action_feature" : "per_action";
  kv["pfqi.snapshot_every"] = std::to_string(snapshot_every);
  kv["eval.n_episodes"] = std::to_string(eval_episodes);
  kv["eval.k_prime"] = join_ints(eval_persistences);
  kv["eval.horizon"] = std::to_string(eval_horizon);
  kv["seeds.master"] = std::to_string(master_seed);
  kv["seeds.n"] = std::to_string(n_seeds);

  std::string out;
  for (const auto& [key, value] : kv) out += key + " = " + value + "\n";
  return out;
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (char ch : canonical()) h = rng::combine(h, static_cast<std::uint64_t>(ch));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace pfqi
