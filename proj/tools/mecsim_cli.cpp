#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "mecsim/harness/experiment.hpp"
#include "mecsim/harness/verify.hpp"

namespace {

using mecsim::harness::ExperimentSpec;

struct CommonOpts {
  std::string config;
  std::string scheme;
  std::string out;
  std::string checkpoint;
  std::uint64_t seed = 0;
  bool seed_set = false;
  long episodes = 0;
  std::string n_ids;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config, "JSON config file (sections sim/arch/train/experiment)");
  cmd->add_option("--scheme", o.scheme, "cmaddpg|vanilla|gs|saddpg|naive")
      ->check(CLI::IsMember({"cmaddpg", "vanilla", "gs", "saddpg", "naive"}));
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--checkpoint", o.checkpoint, "parameter file for eval/sweep");
  cmd->add_option("--seed", o.seed, "seed (replaces the config's seed list)")
      ->each([&o](const std::string&) { o.seed_set = true; });
  cmd->add_option("--episodes", o.episodes, "training episodes override");
  cmd->add_option("--n-ids", o.n_ids, "device count range MIN:MAX (or a single N)");
}

ExperimentSpec resolve_spec(const CommonOpts& o) {
  ExperimentSpec spec = o.config.empty() ? ExperimentSpec{}
                                         : mecsim::harness::spec_from_file(o.config);
  if (!o.scheme.empty()) spec.scheme = o.scheme;
  if (!o.out.empty()) spec.out_dir = o.out;
  if (!o.checkpoint.empty()) spec.checkpoint = o.checkpoint;
  if (o.seed_set) spec.seeds = {o.seed};
  if (o.episodes > 0) spec.train.episodes = o.episodes;
  if (!o.n_ids.empty()) {
    const auto colon = o.n_ids.find(':');
    if (colon == std::string::npos) {
      spec.sim.n_min = spec.sim.n_max = std::stoi(o.n_ids);
    } else {
      spec.sim.n_min = std::stoi(o.n_ids.substr(0, colon));
      spec.sim.n_max = std::stoi(o.n_ids.substr(colon + 1));
    }
  }
  spec.validate();
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV-assisted MEC simulator: cooperative multi-agent training and evaluation"};
  app.require_subcommand(1);

  CommonOpts train_o, eval_o, sweep_o;
  auto* train_cmd = app.add_subcommand("train", "train a scheme and write metrics/checkpoints");
  add_common(train_cmd, train_o);
  auto* eval_cmd = app.add_subcommand("eval", "greedy rollouts from a checkpoint");
  add_common(eval_cmd, eval_o);
  auto* sweep_cmd = app.add_subcommand("sweep", "evaluate across sweep values and seeds");
  add_common(sweep_cmd, sweep_o);

  std::uint64_t gc_seed = 20240001;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gradcheck_cmd->add_option("--seed", gc_seed, "seed for the random architectures");

  long ov_steps = 10000;
  std::uint64_t ov_seed = 7;
  auto* oracle_cmd =
      app.add_subcommand("oracle-verify", "recompute plant steps with the scalar oracle");
  oracle_cmd->add_option("--steps", ov_steps, "number of random steps");
  oracle_cmd->add_option("--seed", ov_seed, "seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      const ExperimentSpec spec = resolve_spec(train_o);
      const auto results = mecsim::harness::run_training(spec);
      for (const auto& r : results) {
        std::printf("seed %llu: %s  first-window %.6g J  last-window %.6g J  (%.1f s)\n",
                    static_cast<unsigned long long>(r.seed), r.run_dir.c_str(),
                    r.first_window_avg_energy, r.last_window_avg_energy, r.wall_seconds);
      }
      return 0;
    }
    if (eval_cmd->parsed()) {
      const ExperimentSpec spec = resolve_spec(eval_o);
      const auto rows = mecsim::harness::run_eval_from_spec(spec);
      for (const auto& r : rows) {
        std::printf("seed %llu: mean %.6g J  std %.6g J  %.4g ms/decision\n",
                    static_cast<unsigned long long>(r.seed), r.mean_energy, r.std_energy,
                    r.ms_per_decision);
      }
      return 0;
    }
    if (sweep_cmd->parsed()) {
      const ExperimentSpec spec = resolve_spec(sweep_o);
      const auto rows = mecsim::harness::run_sweep(spec);
      for (const auto& r : rows) {
        std::printf("%s=%g seed %llu: mean %.6g J  std %.6g J\n", r.variable.c_str(), r.value,
                    static_cast<unsigned long long>(r.seed), r.mean_energy, r.std_energy);
      }
      std::printf("wrote %s\n", (spec.out_dir + "/" +
                                 (spec.sweep_variable == "n_schedule" ? "trace.csv" : "sweep.csv"))
                                    .c_str());
      return 0;
    }
    if (gradcheck_cmd->parsed()) {
      const auto rep = mecsim::harness::run_gradcheck(gc_seed);
      std::printf("small nets (%d): max rel err %.3e (tol 1e-4)\n", rep.nets_checked,
                  rep.max_rel_small);
      std::printf("actor-through-critic (%zu params): max rel err %.3e (tol 1e-3)\n",
                  rep.e2e_params, rep.max_rel_e2e);
      std::printf("runtime %.1f s\n%s\n", rep.seconds, rep.pass() ? "PASS" : "FAIL");
      return rep.pass() ? 0 : 1;
    }
    if (oracle_cmd->parsed()) {
      const auto rep = mecsim::harness::run_oracle_verify(ov_steps, ov_seed);
      std::printf("%ld steps: max relative deviation %.3e (tol 1e-12)\n%s\n", rep.steps,
                  rep.max_rel_dev, rep.pass() ? "PASS" : "FAIL");
      return rep.pass() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
