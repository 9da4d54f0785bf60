#pragma once

#include <filesystem>
#include <functional>

#include "pfqi/config.hpp"

namespace pfqi::harness {

// All commands operate on one experiment root directory:
//   <out>/datasets/seedNNN/   one dataset per seed (collect)
//   <out>/runs/seedNNN/kKKK/  one PFQI run per (seed, k) (train)
//   <out>/eval/               per-episode returns and aggregates (evaluate)
//   <out>/select/             per-seed selection reports and losses (select)
//   <out>/report/             flattened table- and curve-shaped CSVs (report)
// Artifacts are byte-reproducible from (config, master seed) except for
// wall-clock fields: the fit_seconds column of metrics.csv and timing.json.

void cmd_collect(const ExperimentConfig& cfg, const std::filesystem::path& out);
void cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out);
void cmd_evaluate(const ExperimentConfig& cfg, const std::filesystem::path& out);
void cmd_select(const ExperimentConfig& cfg, const std::filesystem::path& out);
void cmd_report(const ExperimentConfig& cfg, const std::filesystem::path& out);

// Runs fn(0..n-1) on a small thread pool. Tasks must write only to their own
// slots; results are then independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

std::filesystem::path seed_dir(const std::filesystem::path& base, int seed_index);
std::filesystem::path run_dir(const std::filesystem::path& out, int seed_index, int k);

}  // namespace pfqi::harness
