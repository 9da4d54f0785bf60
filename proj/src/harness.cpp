#include "pfqi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfqi/io.hpp"
#include "pfqi/persistence.hpp"
#include "pfqi/pfqi.hpp"
#include "pfqi/select.hpp"

namespace pfqi::harness {

namespace fs = std::filesystem;
using nlohmann::json;

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  unsigned workers = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("PFQI_THREADS")) {
    workers = static_cast<unsigned>(std::max(1, std::atoi(env)));
  }
  workers = std::min<unsigned>(workers == 0 ? 1 : workers, static_cast<unsigned>(n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!failed.exchange(true)) first_error = e.what();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failed.load()) throw std::runtime_error(first_error);
}

std::filesystem::path seed_dir(const fs::path& base, int seed_index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "seed%03d", seed_index);
  return base / buf;
}

std::filesystem::path run_dir(const fs::path& out, int seed_index, int k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "k%03d", k);
  return seed_dir(out / "runs", seed_index) / buf;
}

namespace {

std::unique_ptr<Environment> build_env(const ExperimentConfig& cfg) {
  return make_env(cfg.env_name, cfg.env);
}

void write_root_config(const ExperimentConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  io::write_text(out / "config.cfg", cfg.canonical());
  io::write_text(out / "config_hash.txt", cfg.hash() + "\n");
}

PfqiConfig pfqi_config_for(const ExperimentConfig& cfg, int seed_index, int k) {
  PfqiConfig pc;
  pc.persistence = k;
  pc.iterations = cfg.iterations;
  pc.regressor = cfg.regressor;
  pc.representation = cfg.representation;
  pc.snapshot_every = cfg.snapshot_every;
  pc.continuation = true;
  pc.track_curve = true;
  pc.seed = rng::derive(cfg.master_seed, rng::kRun, seed_index, k);
  return pc;
}

void write_run(const fs::path& dir, const ExperimentConfig& cfg, int seed_index,
               const PersistenceRun& run) {
  fs::create_directories(dir);

  json meta = {{"config_hash", cfg.hash()},
               {"master_seed", cfg.master_seed},
               {"seed_index", seed_index},
               {"k", run.config.persistence},
               {"J", run.config.iterations},
               {"gamma", run.gamma},
               {"dataset_key", run.dataset_key},
               {"regressor", run.config.regressor.kind},
               {"run_seed", run.config.seed},
               {"op_count", run.op_count},
               {"op_count_total", run.op_count_total}};
  io::write_text(dir / "config.json", meta.dump(2) + "\n");

  std::ostringstream metrics;
  metrics << "iter,mode,y_mean,y_min,y_max,fit_seconds,eval_count\n";
  for (const auto& st : run.stats) {
    metrics << st.iter << ',' << (st.mode == TargetMode::kOptimal ? "optimal" : "persistent")
            << ',' << io::format_double(st.y_mean) << ',' << io::format_double(st.y_min) << ','
            << io::format_double(st.y_max) << ',' << io::format_double(st.fit_seconds) << ','
            << st.eval_count << '\n';
  }
  io::write_text(dir / "metrics.csv", metrics.str());

  std::ostringstream curve;
  curve << "iter,j_hat,residual,index\n";
  for (const auto& pt : run.curve) {
    curve << pt.iter << ',' << io::format_double(pt.j_hat) << ','
          << io::format_double(pt.residual) << ',' << io::format_double(pt.index) << '\n';
  }
  io::write_text(dir / "curve.csv", curve.str());

  io::save_model(dir / "model.json", *run.final_q);
  if (run.tilde_q != nullptr) io::save_model(dir / "model_tilde.json", *run.tilde_q);
  for (const auto& [iter, snapshot] : run.snapshots) {
    io::save_model(dir / ("model_iter" + std::to_string(iter) + ".json"), *snapshot);
  }

  double phase1_total = 0.0;
  for (const auto& st : run.stats) phase1_total += st.phase1_seconds;
  json timing = {{"wall_seconds", run.wall_seconds}, {"phase1_seconds", phase1_total}};
  io::write_text(dir / "timing.json", timing.dump(2) + "\n");
}

struct EpisodeRow {
  int k = 0;
  int k_prime = 0;
  int seed_index = 0;
  int episode = 0;
  double discounted = 0.0;
  double undiscounted = 0.0;
  int steps = 0;
};

std::vector<EpisodeRow> read_episode_rows(const fs::path& file) {
  std::vector<EpisodeRow> rows;
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpisodeRow row;
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    row.k = std::stoi(field);
    std::getline(ss, field, ',');
    row.k_prime = std::stoi(field);
    std::getline(ss, field, ',');
    row.seed_index = std::stoi(field);
    std::getline(ss, field, ',');
    row.episode = std::stoi(field);
    std::getline(ss, field, ',');
    row.discounted = std::stod(field);
    std::getline(ss, field, ',');
    row.undiscounted = std::stod(field);
    std::getline(ss, field, ',');
    row.steps = std::stoi(field);
    rows.push_back(row);
  }
  return rows;
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

void cmd_collect(const ExperimentConfig& cfg, const fs::path& out) {
  write_root_config(cfg, out);
  std::unique_ptr<FittedQ> greedy_model;
  if (cfg.collect_policy == "greedy") {
    if (cfg.collect_model.empty()) {
      throw std::invalid_argument("collect: greedy policy needs collect.model");
    }
    greedy_model = io::load_model(cfg.collect_model);
  }
  parallel_for(static_cast<std::size_t>(cfg.n_seeds), [&](std::size_t seed_index) {
    auto env = build_env(cfg);
    CollectOptions opts;
    opts.policy =
        cfg.collect_policy == "greedy" ? CollectPolicy::kGreedy : CollectPolicy::kUniform;
    opts.greedy_q = greedy_model.get();
    opts.k_sampling = cfg.k_sampling;
    opts.in_persistent_env = cfg.collect_persistent_env;
    opts.n_trajectories = cfg.n_trajectories;
    opts.max_samples = cfg.n_samples;
    opts.seed = rng::derive(cfg.master_seed, rng::kCollect, seed_index);
    const Dataset ds = collect_dataset(*env, opts);
    io::write_dataset(seed_dir(out / "datasets", static_cast<int>(seed_index)), ds);
  });
}

void cmd_train(const ExperimentConfig& cfg, const fs::path& out) {
  write_root_config(cfg, out);
  std::vector<Dataset> datasets(static_cast<std::size_t>(cfg.n_seeds));
  for (int s = 0; s < cfg.n_seeds; ++s) {
    datasets[static_cast<std::size_t>(s)] = io::read_dataset(seed_dir(out / "datasets", s));
  }
  struct Task {
    int seed_index;
    int k;
  };
  std::vector<Task> tasks;
  for (int s = 0; s < cfg.n_seeds; ++s) {
    for (int k : cfg.candidates) tasks.push_back({s, k});
  }
  parallel_for(tasks.size(), [&](std::size_t i) {
    const Task& task = tasks[i];
    const PersistenceRun run =
        run_pfqi(datasets[static_cast<std::size_t>(task.seed_index)],
                 pfqi_config_for(cfg, task.seed_index, task.k));
    write_run(run_dir(out, task.seed_index, task.k), cfg, task.seed_index, run);
  });
}

void cmd_evaluate(const ExperimentConfig& cfg, const fs::path& out) {
  struct Task {
    int seed_index;
    int k;
  };
  std::vector<Task> tasks;
  for (int s = 0; s < cfg.n_seeds; ++s) {
    for (int k : cfg.candidates) tasks.push_back({s, k});
  }
  std::vector<std::vector<EpisodeRow>> results(tasks.size());

  parallel_for(tasks.size(), [&](std::size_t i) {
    const Task& task = tasks[i];
    const auto model = io::load_model(run_dir(out, task.seed_index, task.k) / "model.json");
    const GreedyPolicy policy(*model);
    auto env = build_env(cfg);
    const int horizon = cfg.eval_horizon > 0 ? cfg.eval_horizon : env->spec().horizon;
    const double gamma = env->spec().discount;
    std::vector<int> k_primes = cfg.eval_persistences;
    if (k_primes.empty()) k_primes = {task.k};
    for (int k_prime : k_primes) {
      for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
        const std::uint64_t seed =
            rng::derive(cfg.master_seed, rng::kEval, task.seed_index, task.k, k_prime, ep);
        const Trajectory traj = persistent_rollout(*env, policy, k_prime, horizon, seed);
        const EpisodeReturn ret = episode_return(traj, gamma);
        results[i].push_back(EpisodeRow{task.k, k_prime, task.seed_index, ep, ret.discounted,
                                        ret.undiscounted, ret.steps});
      }
    }
  });

  fs::create_directories(out / "eval");
  std::ostringstream episodes;
  episodes << "k,k_prime,seed,episode,ret_discounted,ret_undiscounted,steps\n";
  for (const auto& rows : results) {
    for (const auto& row : rows) {
      episodes << row.k << ',' << row.k_prime << ',' << row.seed_index << ',' << row.episode
               << ',' << io::format_double(row.discounted) << ','
               << io::format_double(row.undiscounted) << ',' << row.steps << '\n';
    }
  }
  io::write_text(out / "eval" / "episodes.csv", episodes.str());

  // Aggregate: per (k, k'), the mean over seeds of per-seed episode means,
  // with the sample std across seeds.
  std::map<std::pair<int, int>, std::map<int, std::vector<double>>> disc, undisc;
  for (const auto& rows : results) {
    for (const auto& row : rows) {
      disc[{row.k, row.k_prime}][row.seed_index].push_back(row.discounted);
      undisc[{row.k, row.k_prime}][row.seed_index].push_back(row.undiscounted);
    }
  }
  std::ostringstream summary;
  summary << "k,k_prime,mean_discounted,std_discounted,mean_undiscounted,std_undiscounted,"
             "n_seeds\n";
  json summary_json = json::array();
  for (const auto& [key, by_seed] : disc) {
    std::vector<double> seed_means_disc, seed_means_undisc;
    for (const auto& [seed_index, values] : by_seed) {
      seed_means_disc.push_back(mean_of(values));
      seed_means_undisc.push_back(mean_of(undisc[key][seed_index]));
    }
    summary << key.first << ',' << key.second << ','
            << io::format_double(mean_of(seed_means_disc)) << ','
            << io::format_double(sample_std(seed_means_disc)) << ','
            << io::format_double(mean_of(seed_means_undisc)) << ','
            << io::format_double(sample_std(seed_means_undisc)) << ',' << seed_means_disc.size()
            << '\n';
    summary_json.push_back({{"k", key.first},
                            {"k_prime", key.second},
                            {"mean_discounted", mean_of(seed_means_disc)},
                            {"std_discounted", sample_std(seed_means_disc)},
                            {"mean_undiscounted", mean_of(seed_means_undisc)},
                            {"std_undiscounted", sample_std(seed_means_undisc)},
                            {"n_seeds", seed_means_disc.size()}});
  }
  io::write_text(out / "eval" / "summary.csv", summary.str());
  io::write_text(out / "eval" / "summary.json", summary_json.dump(2) + "\n");
}

void cmd_select(const ExperimentConfig& cfg, const fs::path& out) {
  fs::create_directories(out / "select");

  // Measured per-seed returns at k' = k, when an evaluation exists; used for
  // the performance-loss column.
  std::map<int, std::map<int, double>> eval_disc, eval_undisc;  // seed -> k -> mean
  const fs::path episodes_file = out / "eval" / "episodes.csv";
  const bool have_eval = fs::exists(episodes_file);
  if (have_eval) {
    std::map<std::pair<int, int>, std::vector<double>> disc_acc, undisc_acc;
    for (const auto& row : read_episode_rows(episodes_file)) {
      if (row.k != row.k_prime) continue;
      disc_acc[{row.seed_index, row.k}].push_back(row.discounted);
      undisc_acc[{row.seed_index, row.k}].push_back(row.undiscounted);
    }
    for (const auto& [key, values] : disc_acc) eval_disc[key.first][key.second] = mean_of(values);
    for (const auto& [key, values] : undisc_acc) {
      eval_undisc[key.first][key.second] = mean_of(values);
    }
  }

  json per_seed = json::array();
  std::map<int, int> chosen_counts;
  std::vector<double> losses_disc, losses_undisc;

  for (int s = 0; s < cfg.n_seeds; ++s) {
    const Dataset ds = io::read_dataset(seed_dir(out / "datasets", s));
    std::vector<PersistenceRun> shells(cfg.candidates.size());
    std::map<int, const PersistenceRun*> runs;
    double gamma = ds.manifest.discount;
    for (std::size_t i = 0; i < cfg.candidates.size(); ++i) {
      const int k = cfg.candidates[i];
      const fs::path dir = run_dir(out, s, k);
      const json meta = json::parse(io::read_text(dir / "config.json"));
      PersistenceRun& shell = shells[i];
      shell.config.persistence = k;
      shell.config.iterations = meta.at("J").get<int>();
      shell.gamma = meta.at("gamma").get<double>();
      shell.dataset_key = meta.at("dataset_key").get<std::uint64_t>();
      shell.final_q = io::load_model(dir / "model.json");
      shell.tilde_q = io::load_model(dir / "model_tilde.json");
      runs[k] = &shell;
      gamma = shell.gamma;
    }
    const SelectionReport report = select_persistence(runs, ds, gamma);
    chosen_counts[report.chosen] += 1;

    char name[32];
    std::snprintf(name, sizeof(name), "selection_seed%03d.csv", s);
    std::ostringstream csv;
    csv << "k,j_hat,residual,index,chosen\n";
    for (const auto& row : report.rows) {
      csv << row.k << ',' << io::format_double(row.j_hat) << ','
          << io::format_double(row.residual) << ',' << io::format_double(row.index) << ','
          << (row.k == report.chosen ? 1 : 0) << '\n';
    }
    io::write_text(out / "select" / name, csv.str());

    json entry = {{"seed_index", s}, {"chosen", report.chosen}};
    if (have_eval && eval_disc.count(s) != 0U &&
        eval_disc[s].count(report.chosen) != 0U) {
      const double loss_disc = performance_loss(eval_disc[s], report.chosen);
      const double loss_undisc = performance_loss(eval_undisc[s], report.chosen);
      losses_disc.push_back(loss_disc);
      losses_undisc.push_back(loss_undisc);
      entry["performance_loss_discounted"] = loss_disc;
      entry["performance_loss_undiscounted"] = loss_undisc;
    }
    per_seed.push_back(entry);
  }

  json summary = {{"per_seed", per_seed}, {"chosen_counts", json::object()}};
  for (const auto& [k, count] : chosen_counts) {
    summary["chosen_counts"][std::to_string(k)] = count;
  }
  if (!losses_disc.empty()) {
    summary["performance_loss_discounted_mean"] = mean_of(losses_disc);
    summary["performance_loss_discounted_std"] = sample_std(losses_disc);
    summary["performance_loss_undiscounted_mean"] = mean_of(losses_undisc);
    summary["performance_loss_undiscounted_std"] = sample_std(losses_undisc);
  }
  io::write_text(out / "select" / "selection.json", summary.dump(2) + "\n");
}

void cmd_report(const ExperimentConfig& cfg, const fs::path& out) {
  fs::create_directories(out / "report");

  // Table-shaped: one row per k at k' = k, undiscounted return scale.
  const auto rows = read_episode_rows(out / "eval" / "episodes.csv");
  std::map<int, std::map<int, std::vector<double>>> by_k;  // k -> seed -> returns
  std::map<int, std::map<int, std::vector<double>>> by_k_disc;
  for (const auto& row : rows) {
    if (row.k != row.k_prime) continue;
    by_k[row.k][row.seed_index].push_back(row.undiscounted);
    by_k_disc[row.k][row.seed_index].push_back(row.discounted);
  }
  std::ostringstream table;
  table << "env,k,mean,std,n_seeds\n";
  for (const auto& [k, by_seed] : by_k) {
    std::vector<double> seed_means;
    for (const auto& [seed_index, values] : by_seed) seed_means.push_back(mean_of(values));
    table << cfg.env_name << ',' << k << ',' << io::format_double(mean_of(seed_means)) << ','
          << io::format_double(sample_std(seed_means)) << ',' << seed_means.size() << '\n';
  }
  io::write_text(out / "report" / "table.csv", table.str());

  // Curve-shaped: per (k, iter) means over seeds of the selection statistics,
  // with the measured Monte-Carlo return attached at the final iteration.
  struct CurveAcc {
    std::vector<double> j_hat, residual, index;
  };
  std::map<std::pair<int, int>, CurveAcc> curves;  // (k, iter)
  for (int s = 0; s < cfg.n_seeds; ++s) {
    for (int k : cfg.candidates) {
      std::ifstream in(run_dir(out, s, k) / "curve.csv");
      if (!in) continue;
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        const int iter = std::stoi(field);
        auto& acc = curves[{k, iter}];
        std::getline(ss, field, ',');
        acc.j_hat.push_back(std::stod(field));
        std::getline(ss, field, ',');
        acc.residual.push_back(std::stod(field));
        std::getline(ss, field, ',');
        acc.index.push_back(std::stod(field));
      }
    }
  }
  std::ostringstream curves_csv;
  curves_csv << "k,iter,j_hat,residual,index,mc_return\n";
  for (const auto& [key, acc] : curves) {
    curves_csv << key.first << ',' << key.second << ',' << io::format_double(mean_of(acc.j_hat))
               << ',' << io::format_double(mean_of(acc.residual)) << ','
               << io::format_double(mean_of(acc.index)) << ',';
    if (key.second == cfg.iterations && by_k.count(key.first) != 0U) {
      std::vector<double> seed_means;
      for (const auto& [seed_index, values] : by_k[key.first]) {
        seed_means.push_back(mean_of(values));
      }
      curves_csv << io::format_double(mean_of(seed_means));
    }
    curves_csv << '\n';
  }
  io::write_text(out / "report" / "curves.csv", curves_csv.str());
}

}  // namespace pfqi::harness
