#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "distirl/cli.hpp"

using namespace distirl;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "distirl_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& text) {
  int lines = 0;
  for (char c : text) {
    if (c == '\n') ++lines;
  }
  return lines;
}

int run_cli(const std::vector<std::string>& args) { return cli::run(args); }

}  // namespace

TEST_CASE("full pipeline smoke run on a small gridworld") {
  const fs::path root = fresh_dir("pipeline");
  const fs::path env_dir = root / "env";
  const fs::path expert_dir = root / "expert";
  const fs::path demo_dir = root / "demos";
  const fs::path run_dir = root / "run";
  const fs::path eval_dir = root / "eval";
  const fs::path cdf_dir = root / "cdf";

  write_file(root / "env.json", R"json({
    "env_kind": "gridworld",
    "width": 3, "height": 3, "start": [1, 0],
    "goals": [
      {"cell": [0, 2], "reward": "gaussian(1,1)"},
      {"cell": [2, 2], "reward": "deterministic(1)"}
    ],
    "step_cost": 0.0, "slip_prob": 0.0, "gamma": 0.7
  })json");
  CHECK(run_cli({"make-env", "--config", (root / "env.json").string(),
                 "--out", env_dir.string()}) == 0);
  CHECK(fs::exists(env_dir / "env.mdp"));
  CHECK(fs::exists(env_dir / "env.rewards"));

  write_file(root / "expert.json", R"json({
    "env": ")json" + env_dir.string() + R"json(",
    "episodes": 2000, "horizon": 12, "n_quantiles": 32,
    "step_size": 0.2, "seed": 1
  })json");
  CHECK(run_cli({"train-expert", "--config", (root / "expert.json").string(),
                 "--out", expert_dir.string()}) == 0);
  CHECK(fs::exists(expert_dir / "expert_critic.txt"));
  CHECK(fs::exists(expert_dir / "expert_policy.txt"));

  write_file(root / "demos.json", R"json({
    "env": ")json" + env_dir.string() + R"json(",
    "critic": ")json" + (expert_dir / "expert_critic.txt").string() + R"json(",
    "distortion": "cvar(0.05)", "beta": 0.3,
    "n_traj": 6, "horizon": 12, "seed": 2
  })json");
  CHECK(run_cli({"gen-demos", "--config", (root / "demos.json").string(),
                 "--out", demo_dir.string()}) == 0);
  CHECK(fs::exists(demo_dir / "demos.txt"));

  write_file(root / "irl.json", R"json({
    "demos": ")json" + (demo_dir / "demos.txt").string() + R"json(",
    "iterations": 40, "batch_size": 32, "return_samples": 16,
    "horizon": 12, "n_quantiles": 32, "gamma": 0.7,
    "r_min": 0.0, "r_max": 2.0, "seed": 3
  })json");
  CHECK(run_cli({"train-irl", "--config", (root / "irl.json").string(),
                 "--out", run_dir.string()}) == 0);
  CHECK(fs::exists(run_dir / "reward_model.txt"));
  CHECK(fs::exists(run_dir / "policy.txt"));
  CHECK(fs::exists(run_dir / "critic.txt"));
  CHECK(fs::exists(run_dir / "config.json"));
  const std::string log = read_file(run_dir / "trainlog.csv");
  CHECK(count_lines(log) == 41);  // header + one row per iteration
  CHECK(log.rfind("iteration,fsd_violation,kl_term,critic_loss,"
                  "policy_entropy,drm_policy_return",
                  0) == 0);

  write_file(root / "eval.json", R"json({
    "env": ")json" + env_dir.string() + R"json(",
    "run": ")json" + run_dir.string() + R"json(",
    "demos": ")json" + (demo_dir / "demos.txt").string() + R"json(",
    "eval_rollouts": 500, "horizon": 12, "n_atoms": 32,
    "ref_samples": 256, "seed": 4
  })json");
  CHECK(run_cli({"eval", "--config", (root / "eval.json").string(), "--out",
                 eval_dir.string()}) == 0);
  CHECK(fs::exists(eval_dir / "eval_summary.csv"));
  CHECK(fs::exists(eval_dir / "eval_pairs.csv"));
  CHECK(read_file(eval_dir / "eval_pairs.csv")
            .rfind("s,a,visits,learned_mean,learned_sd,ref_mean,ref_sd,w1",
                   0) == 0);

  write_file(root / "cdf.json", R"json({
    "run": ")json" + run_dir.string() + R"json(",
    "demos": ")json" + (demo_dir / "demos.txt").string() + R"json(",
    "n_atoms": 32, "samples": 256, "seed": 5
  })json");
  CHECK(run_cli({"export-cdf", "--config", (root / "cdf.json").string(),
                 "--out", cdf_dir.string()}) == 0);
  CHECK(fs::exists(cdf_dir / "return_cdf_policy.csv"));
  CHECK(fs::exists(cdf_dir / "return_cdf_expert.csv"));
  // Per-pair reward CDFs exist for covered cells; spot-check the format.
  bool found_pair_cdf = false;
  for (const auto& entry : fs::directory_iterator(cdf_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("reward_cdf_s", 0) == 0) {
      found_pair_cdf = true;
      const std::string content = read_file(entry.path());
      CHECK(content.rfind("value,cum_prob", 0) == 0);
      CHECK(count_lines(content) == 33);
      break;
    }
  }
  CHECK(found_pair_cdf);

  // Stages refuse to overwrite their outputs unless forced.
  CHECK(run_cli({"train-irl", "--config", (root / "irl.json").string(),
                 "--out", run_dir.string()}) == 1);
  CHECK(run_cli({"train-irl", "--config", (root / "irl.json").string(),
                 "--out", run_dir.string(), "--force"}) == 0);
}

TEST_CASE("missing config file exits 1") {
  const fs::path root = fresh_dir("missing");
  CHECK(run_cli({"train-irl", "--config", (root / "nope.json").string(),
                 "--out", (root / "out").string()}) == 1);
}

TEST_CASE("unknown config key exits 2") {
  const fs::path root = fresh_dir("unknown_key");
  write_file(root / "bad.json", R"json({"env_kind": "bandit",
    "arms": ["deterministic(1)"], "gamma": 0.5, "bogus_key": 1})json");
  CHECK(run_cli({"make-env", "--config", (root / "bad.json").string(),
                 "--out", (root / "out").string()}) == 2);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run_cli({"not-a-command"}) == 2);
  CHECK(run_cli({"make-env", "--bogus-flag"}) == 2);
  CHECK(run_cli({}) == 2);
}

TEST_CASE("irl config json parsing mirrors the field names") {
  const IrlConfig config = cli::irl_config_from_json_text(R"json({
    "reward_kind": "skewnormal",
    "critic_kind": "mean",
    "reward_loss": "mean",
    "distortion": "wang(0.5)",
    "beta": 0.2,
    "iterations": 7,
    "gamma": 0.5,
    "r_min": -1.0,
    "r_max": 1.0,
    "seed": 9
  })json");
  CHECK(config.reward_kind == RewardKind::SkewNormal);
  CHECK(config.critic_kind == CriticKind::Mean);
  CHECK(config.reward_loss == RewardLossKind::Mean);
  CHECK(config.distortion.kind == Distortion::Kind::Wang);
  CHECK(config.iterations == 7);
  CHECK(config.seed == 9);
  // Untouched fields keep their defaults.
  CHECK(config.batch_size == 512);
  CHECK(config.n_quantiles == 200);
  CHECK(config.kl_weight == 0.01);

  CHECK_THROWS(cli::irl_config_from_json_text(R"json({"not_a_field": 1})json"));
  CHECK_THROWS(cli::irl_config_from_json_text(R"json({"gamma": 1.5})json"));
}

TEST_CASE("ablate on a toy bandit emits six scaled rows per seed") {
  const fs::path root = fresh_dir("ablate");
  const fs::path env_dir = root / "env";
  write_file(root / "env.json", R"json({
    "env_kind": "bandit",
    "arms": ["deterministic(1)", "gaussian(0.5,1.5)"],
    "gamma": 0.5
  })json");
  REQUIRE(run_cli({"make-env", "--config", (root / "env.json").string(),
                   "--out", env_dir.string()}) == 0);

  write_file(root / "ablate.json", R"json({
    "env": ")json" + env_dir.string() + R"json(",
    "n_seeds": 1,
    "seed_base": 7,
    "expert": {"episodes": 500, "horizon": 8, "n_quantiles": 16,
               "step_size": 0.2},
    "demo": {"n_traj": 4, "horizon": 8, "beta": 5.0},
    "irl": {"iterations": 60, "batch_size": 16, "return_samples": 8,
            "horizon": 8, "n_quantiles": 16, "gamma": 0.5,
            "r_min": -5.0, "r_max": 5.0}
  })json");
  REQUIRE(run_cli({"ablate", "--config", (root / "ablate.json").string(),
                   "--out", (root / "out").string()}) == 0);
  const std::string csv = read_file(root / "out" / "ablation.csv");
  CHECK(count_lines(csv) == 7);  // header + six configurations
  CHECK(csv.rfind("config,seed,raw_return,scaled_return", 0) == 0);

  // Scaled scores live in [0,1] with the extremes attained.
  std::istringstream ss(csv);
  std::string line;
  std::getline(ss, line);
  double lo = 1e9, hi = -1e9;
  while (std::getline(ss, line)) {
    const auto last_comma = line.rfind(',');
    const double scaled = std::stod(line.substr(last_comma + 1));
    CHECK(scaled >= 0.0);
    CHECK(scaled <= 1.0);
    lo = std::min(lo, scaled);
    hi = std::max(hi, scaled);
  }
  CHECK(lo == 0.0);
  CHECK(hi == 1.0);
}
