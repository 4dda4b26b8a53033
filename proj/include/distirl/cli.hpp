#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "distirl/forward_rl.hpp"
#include "distirl/irl.hpp"
#include "distirl/mdp.hpp"

namespace distirl::cli {

/// Entry point behind the binary: `distirl <subcommand> --config <file>
/// --out <dir> [--force]`. Returns 0 on success, 1 on validation or I/O
/// failure, 2 on usage errors (unknown subcommand/flag/config key).
int run(const std::vector<std::string>& args);

/// Parse an IrlConfig from a flat JSON object; unknown keys are errors.
IrlConfig irl_config_from_json_text(const std::string& text);

struct AblationRow {
  std::string config_name;
  int seed = 0;
  double raw_return = 0.0;
  double scaled_return = 0.0;
};

struct AblationSpec {
  TabularMdp mdp;
  TrueRewardSpec rewards;
  ExpertConfig expert;
  int demo_n_traj = 10;
  int demo_horizon = 40;
  double demo_beta = 0.1;
  IrlConfig base_irl;
  int n_seeds = 5;
  std::uint64_t seed_base = 0;
};

/// Run the six reward/critic/loss configurations (Dis-Qt-FSD, Dis-Qt-Mean,
/// Det-Qt-Mean, Dis-TD-FSD, Dis-TD-Mean, Det-TD-Mean) over n_seeds seeds on
/// shared per-seed demos. Scores are exact expected true returns; the scaled
/// column is min-max normalized within each seed.
std::vector<AblationRow> run_ablation(const AblationSpec& spec);

}  // namespace distirl::cli
