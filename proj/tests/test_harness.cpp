#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pfqi/config.hpp"
#include "pfqi/harness.hpp"
#include "pfqi/io.hpp"
#include "pfqi/instances.hpp"
#include "pfqi/rng.hpp"

using namespace pfqi;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_counterexample_config() {
  return ExperimentConfig::from_map({{"env.name", "counterexample"},
                                     {"env.R", "1"},
                                     {"env.gamma", "0.5"},
                                     {"env.horizon", "64"},
                                     {"collect.n_trajectories", "8"},
                                     {"pfqi.J", "32"},
                                     {"pfqi.K", "1,2"},
                                     {"pfqi.regressor", "table"},
                                     {"eval.n_episodes", "4"},
                                     {"eval.k_prime", "1,2"},
                                     {"seeds.master", "2024"},
                                     {"seeds.n", "2"}});
}

// Byte comparison that masks the wall-clock column of metrics.csv.
bool equal_ignoring_fit_seconds(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a), fb(b);
  std::string la, lb;
  while (true) {
    const bool ga = static_cast<bool>(std::getline(fa, la));
    const bool gb = static_cast<bool>(std::getline(fb, lb));
    if (ga != gb) return false;
    if (!ga) return true;
    std::vector<std::string> ca, cb;
    std::stringstream sa(la), sb(lb);
    std::string f;
    while (std::getline(sa, f, ',')) ca.push_back(f);
    while (std::getline(sb, f, ',')) cb.push_back(f);
    if (ca.size() != cb.size()) return false;
    for (std::size_t i = 0; i < ca.size(); ++i) {
      if (i == 5) continue;  // fit_seconds
      if (ca[i] != cb[i]) return false;
    }
  }
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults per environment") {
    const auto c = ExperimentConfig::from_map({{"env.name", "mountaincar"}});
    CHECK(c.k_sampling == 8);
    CHECK(c.n_trajectories == 20);
    CHECK(c.iterations == 256);
    const auto cp = ExperimentConfig::from_map({{"env.name", "cartpole"}});
    CHECK(cp.k_sampling == 1);
    CHECK(cp.n_samples == 400);
    CHECK(cp.iterations == 512);
  }
  SUBCASE("divisibility is rejected before any training") {
    CHECK_THROWS_AS(
        ExperimentConfig::from_map({{"env.name", "cartpole"}, {"pfqi.K", "3"}}),
        std::invalid_argument);
  }
  SUBCASE("unknown keys are rejected") {
    CHECK_THROWS_AS(ExperimentConfig::from_map({{"env.nam", "cartpole"}}),
                    std::invalid_argument);
  }
  SUBCASE("text parsing with comments and overrides") {
    const auto kv = parse_config_text("# comment\nenv.name = pendulum\npfqi.J=32 # tail\n");
    CHECK(kv.at("env.name") == "pendulum");
    CHECK(kv.at("pfqi.J") == "32");
    CHECK_THROWS_AS(parse_config_text("env.name pendulum\n"), std::invalid_argument);
  }
  SUBCASE("canonical form and hash are stable") {
    const auto a = tiny_counterexample_config();
    const auto b = tiny_counterexample_config();
    CHECK(a.canonical() == b.canonical());
    CHECK(a.hash() == b.hash());
    auto kv = parse_config_text(a.canonical());
    kv["pfqi.J"] = "64";
    const auto c = ExperimentConfig::from_map(kv);
    CHECK(c.hash() != a.hash());
  }
}

TEST_CASE("dataset round trip preserves everything") {
  auto g = rng::engine(70);
  const TabularMdp m = random_mdp(g, 5, 3);
  const Dataset ds = synthetic_tabular_dataset(m, 40, 12);
  const fs::path tmp = fs::temp_directory_path() / "pfqi_test_roundtrip";
  fs::remove_all(tmp);
  io::write_dataset(tmp, ds);
  const Dataset back = io::read_dataset(tmp);
  CHECK(back.manifest.n_samples == ds.manifest.n_samples);
  CHECK(back.manifest.discount == ds.manifest.discount);
  CHECK(back.manifest.action_set == ds.manifest.action_set);
  REQUIRE(back.trajectories.size() == ds.trajectories.size());
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const auto& ta = ds.trajectories[i].transitions;
    const auto& tb = back.trajectories[i].transitions;
    REQUIRE(ta.size() == tb.size());
    for (std::size_t t = 0; t < ta.size(); ++t) {
      CHECK(ta[t].state == tb[t].state);
      CHECK(ta[t].next_state == tb[t].next_state);
      CHECK(ta[t].action == tb[t].action);
      CHECK(ta[t].reward == tb[t].reward);
      CHECK(ta[t].terminal == tb[t].terminal);
    }
  }
  fs::remove_all(tmp);
}

TEST_CASE("end-to-end pipeline on the counterexample") {
  const ExperimentConfig cfg = tiny_counterexample_config();
  const fs::path out = fs::temp_directory_path() / "pfqi_test_pipeline";
  fs::remove_all(out);

  harness::cmd_collect(cfg, out);
  harness::cmd_train(cfg, out);
  harness::cmd_evaluate(cfg, out);
  harness::cmd_select(cfg, out);
  harness::cmd_report(cfg, out);

  CHECK(fs::exists(out / "datasets" / "seed000" / "data.csv"));
  CHECK(fs::exists(out / "runs" / "seed001" / "k002" / "model_tilde.json"));
  CHECK(fs::exists(out / "eval" / "episodes.csv"));
  CHECK(fs::exists(out / "select" / "selection.json"));
  CHECK(fs::exists(out / "report" / "table.csv"));
  CHECK(fs::exists(out / "report" / "curves.csv"));

  // The exact index prefers k = 1 on the counterexample: higher estimated
  // return, both residuals near zero.
  const auto selection = nlohmann::json::parse(io::read_text(out / "select" / "selection.json"));
  CHECK(selection.at("chosen_counts").at("1").get<int>() == 2);

  // Evaluating the k=1 policy: gamma R/(1-gamma) = 1 at persistence 1,
  // -gamma R/(1-gamma) = -1 at persistence 2 (the counterexample trap).
  const auto summary = nlohmann::json::parse(io::read_text(out / "eval" / "summary.json"));
  double at_k1 = 0.0, at_k2 = 0.0;
  for (const auto& row : summary) {
    if (row.at("k") == 1 && row.at("k_prime") == 1) at_k1 = row.at("mean_discounted");
    if (row.at("k") == 1 && row.at("k_prime") == 2) at_k2 = row.at("mean_discounted");
  }
  CHECK(at_k1 == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(at_k2 == doctest::Approx(-1.0).epsilon(1e-6));

  // With measured evaluations present, the per-seed performance loss is 0:
  // the index picked the better persistence.
  CHECK(selection.at("performance_loss_discounted_mean").get<double>() ==
        doctest::Approx(0.0).epsilon(1e-9));

  fs::remove_all(out);
}

TEST_CASE("pipeline artifacts are byte-reproducible") {
  const ExperimentConfig cfg = tiny_counterexample_config();
  const fs::path out1 = fs::temp_directory_path() / "pfqi_test_repro1";
  const fs::path out2 = fs::temp_directory_path() / "pfqi_test_repro2";
  for (const auto& out : {out1, out2}) {
    fs::remove_all(out);
    harness::cmd_collect(cfg, out);
    harness::cmd_train(cfg, out);
    harness::cmd_evaluate(cfg, out);
    harness::cmd_select(cfg, out);
    harness::cmd_report(cfg, out);
  }
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(out1)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), out1);
    const fs::path other = out2 / rel;
    REQUIRE(fs::exists(other));
    if (rel.filename() == "timing.json") continue;  // wall clock, excluded
    ++compared;
    if (rel.filename() == "metrics.csv") {
      CHECK_MESSAGE(equal_ignoring_fit_seconds(entry.path(), other), rel.string());
    } else {
      CHECK_MESSAGE(io::read_text(entry.path()) == io::read_text(other), rel.string());
    }
  }
  CHECK(compared > 10);
  fs::remove_all(out1);
  fs::remove_all(out2);
}
