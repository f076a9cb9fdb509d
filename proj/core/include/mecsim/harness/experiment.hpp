#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mecsim/agents/arch.hpp"
#include "mecsim/agents/checkpoint.hpp"
#include "mecsim/agents/policy.hpp"
#include "mecsim/env/config.hpp"
#include "mecsim/train/trainer.hpp"

namespace mecsim::harness {

/// One experiment: scheme, plant/arch/training parameters, seeds and an
/// optional sweep. Loaded from a JSON file with sections
/// sim/arch/train/experiment; MEC_-prefixed environment variables override
/// single keys (MEC_TRAIN_EPISODES=500 -> train.episodes).
struct ExperimentSpec {
  std::string scheme = "cmaddpg";  // cmaddpg | gs | vanilla | saddpg | naive
  env::SimConfig sim;
  agents::ActorArch arch;
  train::TrainConfig train;
  std::vector<std::uint64_t> seeds{1};
  long eval_episodes = 300;
  int eval_n = 0;  // 0: draw out of [n_min, n_max] per episode

  std::string sweep_variable;        // "" | "n" | "f_max" | "n_schedule"
  std::vector<double> sweep_values;  // for "n" / "f_max"
  std::vector<int> n_schedule;       // for "n_schedule"
  int schedule_slots_per_phase = 10;

  std::string out_dir = "runs/out";
  std::string checkpoint;  // existing parameter file for eval/sweep

  void validate() const;
};

ExperimentSpec spec_from_file(const std::string& path, bool apply_env_overrides = true);
ExperimentSpec spec_from_json_text(const std::string& text, bool apply_env_overrides = false);

/// Fully resolved key=value lines (provenance echo stored in run folders).
std::vector<std::string> resolved_config_lines(const ExperimentSpec& spec);

/// Builds a fresh policy of the named scheme. Trainable schemes consume
/// draws from rng for their weight init.
std::unique_ptr<agents::Policy> make_policy(const std::string& scheme,
                                            const env::SimConfig& sim,
                                            const agents::ActorArch& arch, numkit::Rng& rng);

/// Restores a policy from a parameter file. The file's architecture must
/// match the requested scheme; the plant's n_max may differ for the scalable
/// schemes but not for saddpg.
std::unique_ptr<agents::Policy> policy_from_checkpoint(const std::string& scheme,
                                                       const env::SimConfig& sim,
                                                       const std::string& path);

struct TrainRunResult {
  std::uint64_t seed = 0;
  std::string run_dir;
  std::string metrics_csv;
  std::string checkpoint_file;
  double first_window_avg_energy = 0.0;  // mean over the first window episodes
  double last_window_avg_energy = 0.0;   // moving average at the end
  double wall_seconds = 0.0;
};

/// Algorithm-2 training for every seed in the spec. Writes metrics.csv,
/// moving_avg.csv, the final checkpoint (plus periodic ones when configured)
/// and the resolved-config echo under out_dir/<scheme>/seed_<s>/.
std::vector<TrainRunResult> run_training(const ExperimentSpec& spec);

struct EvalResult {
  std::uint64_t seed = 0;
  long episodes = 0;
  int n = 0;  // fixed device count, 0 when drawn per episode
  double mean_energy = 0.0;
  double std_energy = 0.0;
  double ms_per_decision = 0.0;  // around the decision round only
  int lambda_clamps = 0;
};

/// Greedy (noise-free) rollouts; decision wall-clock is measured around the
/// policy's decision round only and divided by the number of deciding
/// agents (N + 1).
EvalResult run_eval(const ExperimentSpec& spec, agents::Policy& policy, std::uint64_t seed,
                    int fixed_n);

/// Convenience wrapper: restores (or builds, for naive) the policy, then
/// evaluates per the spec and writes eval.csv into out_dir.
std::vector<EvalResult> run_eval_from_spec(const ExperimentSpec& spec);

struct SweepRow {
  std::string variable;
  double value = 0.0;
  std::uint64_t seed = 0;
  double mean_energy = 0.0;
  double std_energy = 0.0;
  double ms_per_decision = 0.0;
};

/// One evaluation per (sweep value, seed); writes sweep.csv plus a
/// two-column series_<scheme>.csv with per-value means. For "n_schedule"
/// runs a single per-slot trace instead (trace.csv).
std::vector<SweepRow> run_sweep(const ExperimentSpec& spec);

/// Per-slot energies of one episode whose device count follows the
/// configured schedule.
struct TraceRow {
  int slot = 0;
  int n = 0;
  double sum_energy = 0.0;
};
std::vector<TraceRow> run_schedule_trace(const ExperimentSpec& spec, std::uint64_t seed);

}  // namespace mecsim::harness
