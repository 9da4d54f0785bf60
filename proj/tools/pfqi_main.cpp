#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pfqi/config.hpp"
#include "pfqi/harness.hpp"
#include "pfqi/io.hpp"
#include "pfqi/verify.hpp"

namespace {

struct CommonArgs {
  std::string config_file;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_file, "experiment config file")->required();
  cmd->add_option("-o,--out", args.out_dir, "experiment output directory");
  cmd->add_option("-s,--set", args.overrides, "override a config key, e.g. --set pfqi.J=64");
}

pfqi::ExperimentConfig load_config(const CommonArgs& args) {
  return pfqi::ExperimentConfig::load(args.config_file, args.overrides);
}

int run_verify(const std::string& suite, std::uint64_t seed, const std::string& json_out) {
  const pfqi::verify::Result result = pfqi::verify::run_suite(suite, seed);
  std::printf("[%s] %s: checks=%d failures=%d seed=%llu (%.2fs)\n",
              result.pass() ? "PASS" : "FAIL", result.suite.c_str(), result.checks,
              result.failures, static_cast<unsigned long long>(result.seed), result.seconds);
  for (const auto& note : result.notes) std::printf("  %s\n", note.c_str());
  if (!json_out.empty()) {
    pfqi::io::write_text(json_out, result.to_json().dump(2) + "\n");
  }
  return result.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"batch reinforcement learning with action persistence"};
  app.require_subcommand(1);

  CommonArgs collect_args, train_args, evaluate_args, select_args, report_args;
  add_common(app.add_subcommand("collect", "collect a batch dataset per seed"), collect_args);
  add_common(app.add_subcommand("train", "run PFQI for every (k, seed)"), train_args);
  add_common(app.add_subcommand("evaluate", "Monte-Carlo evaluation of trained policies"),
             evaluate_args);
  add_common(app.add_subcommand("select", "rank persistences with the selection index"),
             select_args);
  add_common(app.add_subcommand("report", "flatten runs into table/curve CSVs"), report_args);

  std::string verify_suite;
  std::uint64_t verify_seed = 20200213;
  std::string verify_json;
  CLI::App* verify_cmd = app.add_subcommand("verify", "numeric verification suites");
  verify_cmd
      ->add_option("suite", verify_suite,
                   "one of: contraction, duality, bound, counterexample, opcount")
      ->required();
  verify_cmd->add_option("--seed", verify_seed, "master seed for randomized instances");
  verify_cmd->add_option("--json", verify_json, "write the machine-readable result here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("collect")) {
      pfqi::harness::cmd_collect(load_config(collect_args), collect_args.out_dir);
    } else if (app.got_subcommand("train")) {
      pfqi::harness::cmd_train(load_config(train_args), train_args.out_dir);
    } else if (app.got_subcommand("evaluate")) {
      pfqi::harness::cmd_evaluate(load_config(evaluate_args), evaluate_args.out_dir);
    } else if (app.got_subcommand("select")) {
      pfqi::harness::cmd_select(load_config(select_args), select_args.out_dir);
    } else if (app.got_subcommand("report")) {
      pfqi::harness::cmd_report(load_config(report_args), report_args.out_dir);
    } else if (app.got_subcommand("verify")) {
      return run_verify(verify_suite, verify_seed, verify_json);
    }
  } catch (const std::exception& e) {
    const nlohmann::json err = {{"error", e.what()}};
    std::cout << err.dump() << std::endl;
    return 1;
  }
  return 0;
}
