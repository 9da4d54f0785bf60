#include "pfqi/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pfqi::io {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  return {{"env_name", m.env_name},
          {"sampling_persistence", m.sampling_persistence},
          {"collected_in_persistent_env", m.collected_in_persistent_env},
          {"seed", m.seed},
          {"n_samples", m.n_samples},
          {"discount", m.discount},
          {"state_dim", m.state_dim},
          {"action_set", m.action_set}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.env_name = j.at("env_name").get<std::string>();
  m.sampling_persistence = j.at("sampling_persistence").get<int>();
  m.collected_in_persistent_env = j.at("collected_in_persistent_env").get<bool>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.n_samples = j.at("n_samples").get<std::size_t>();
  m.discount = j.at("discount").get<double>();
  m.state_dim = j.at("state_dim").get<int>();
  m.action_set = j.at("action_set").get<std::vector<std::vector<double>>>();
  return m;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  ds.validate();
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "data.csv");
  if (!csv) throw std::runtime_error("write_dataset: cannot open " + (dir / "data.csv").string());

  const int d = ds.manifest.state_dim;
  csv << "traj_id,t";
  for (int i = 0; i < d; ++i) csv << ",s" << i;
  csv << ",action,reward";
  for (int i = 0; i < d; ++i) csv << ",ns" << i;
  csv << ",terminal\n";

  for (std::size_t traj_id = 0; traj_id < ds.trajectories.size(); ++traj_id) {
    const auto& traj = ds.trajectories[traj_id];
    for (std::size_t t = 0; t < traj.transitions.size(); ++t) {
      const Transition& tr = traj.transitions[t];
      csv << traj_id << ',' << t;
      for (double v : tr.state) csv << ',' << format_double(v);
      csv << ',' << tr.action << ',' << format_double(tr.reward);
      for (double v : tr.next_state) csv << ',' << format_double(v);
      csv << ',' << (tr.terminal ? 1 : 0) << '\n';
    }
  }
  csv.close();

  std::ofstream manifest(dir / "manifest.json");
  manifest << manifest_to_json(ds.manifest).dump(2) << '\n';
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.json");
  if (!manifest) {
    throw std::runtime_error("read_dataset: cannot open " + (dir / "manifest.json").string());
  }
  Dataset ds;
  ds.manifest = manifest_from_json(nlohmann::json::parse(manifest));

  std::ifstream csv(dir / "data.csv");
  if (!csv) throw std::runtime_error("read_dataset: cannot open " + (dir / "data.csv").string());
  std::string line;
  std::getline(csv, line);  // header
  const int d = ds.manifest.state_dim;
  std::size_t last_traj = static_cast<std::size_t>(-1);
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != 2 * d + 5) {
      throw std::runtime_error("read_dataset: wrong column count in data.csv");
    }
    const std::size_t traj_id = std::stoul(fields[0]);
    if (traj_id != last_traj) {
      ds.trajectories.emplace_back();
      last_traj = traj_id;
    }
    Transition tr;
    tr.state.resize(d);
    tr.next_state.resize(d);
    for (int i = 0; i < d; ++i) tr.state[i] = std::stod(fields[2 + i]);
    tr.action = std::stoi(fields[2 + d]);
    tr.reward = std::stod(fields[3 + d]);
    for (int i = 0; i < d; ++i) tr.next_state[i] = std::stod(fields[4 + d + i]);
    tr.terminal = fields[4 + 2 * d] == "1";
    auto& traj = ds.trajectories.back();
    if (traj.transitions.empty()) traj.initial_state = tr.state;
    traj.transitions.push_back(std::move(tr));
  }
  ds.validate();
  return ds;
}

void save_model(const std::filesystem::path& file, const FittedQ& q) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("save_model: cannot open " + file.string());
  out << q.to_json().dump() << '\n';
}

std::unique_ptr<FittedQ> load_model(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("load_model: cannot open " + file.string());
  return FittedQ::from_json(nlohmann::json::parse(in));
}

void write_text(const std::filesystem::path& file, const std::string& content) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("write_text: cannot open " + file.string());
  out << content;
}

std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("read_text: cannot open " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace pfqi::io
