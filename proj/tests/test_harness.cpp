#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "mecsim/errors.hpp"
#include "mecsim/harness/experiment.hpp"
#include "mecsim/harness/verify.hpp"

using namespace mecsim;
using namespace mecsim::harness;
namespace fs = std::filesystem;

namespace {

std::string tiny_spec_json(const std::string& out_dir, int episodes = 10) {
  std::ostringstream ss;
  ss << R"({
    "sim": {"n_min": 2, "n_max": 3, "task_min_bits": 1e6, "task_max_bits": 1e7},
    "arch": {"msg_dim": 3, "feat_dim": 4, "mu_id_hidden": [6], "eps_uav_hidden": [5],
             "eps_id_hidden": [5], "gamma_v_hidden": [6], "gamma_f_hidden": [5],
             "pi_id_hidden": [5], "critic_hidden": [10]},
    "train": {"episodes": )"
     << episodes << R"(, "batch": 8, "optimizer": "adam", "moving_avg_window": 5},
    "experiment": {"scheme": "cmaddpg", "seeds": [11], "eval_episodes": 5,
                   "out_dir": ")"
     << out_dir << R"("}
  })";
  return ss.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

long count_lines(const fs::path& p) {
  std::ifstream in(p);
  long n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

fs::path fresh_dir(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("mecsim_harness_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("spec parsing, validation, environment overrides") {
  auto dir = fresh_dir("spec");
  auto spec = spec_from_json_text(tiny_spec_json(dir.string()));
  CHECK(spec.scheme == "cmaddpg");
  CHECK(spec.sim.n_max == 3);
  CHECK(spec.train.episodes == 10);

  CHECK_THROWS_AS(spec_from_json_text(R"({"experiment":{"scheme":"bogus"}})"), ConfigError);
  CHECK_THROWS_AS(spec_from_json_text(R"({"train":{"nope":1}})"), ConfigError);

  setenv("MEC_TRAIN_EPISODES", "77", 1);
  setenv("MEC_SIM_N_MAX", "4", 1);
  auto overridden = spec_from_json_text(tiny_spec_json(dir.string()), /*apply_env=*/true);
  unsetenv("MEC_TRAIN_EPISODES");
  unsetenv("MEC_SIM_N_MAX");
  CHECK(overridden.train.episodes == 77);
  CHECK(overridden.sim.n_max == 4);

  auto lines = resolved_config_lines(spec);
  bool saw_tau = false, saw_seed_list = false;
  for (const auto& l : lines) {
    saw_tau |= l.rfind("sim.tau_s=", 0) == 0;
    saw_seed_list |= l == "experiment.seeds=11";
  }
  CHECK(saw_tau);
  CHECK(saw_seed_list);
}

TEST_CASE("shipped config profiles parse and validate") {
  const fs::path root = MECSIM_SOURCE_DIR;
  auto desk = spec_from_file((root / "configs" / "desk.json").string(), false);
  CHECK(desk.sim.n_max == 5);
  CHECK(desk.train.episodes == 3000);
  CHECK(desk.sim.task_max == doctest::Approx(1e7));
  auto table1 = spec_from_file((root / "configs" / "table1.json").string(), false);
  CHECK(table1.arch.critic_hidden == std::vector<int>{512, 256, 128, 64});
  CHECK(table1.sim.task_max == doctest::Approx(20e9));
  CHECK(table1.train.optimizer == "sgd");
}

TEST_CASE("training run: row accounting and byte-identical reruns") {
  auto dir_a = fresh_dir("train_a");
  auto dir_b = fresh_dir("train_b");
  auto spec_a = spec_from_json_text(tiny_spec_json(dir_a.string()));
  auto spec_b = spec_from_json_text(tiny_spec_json(dir_b.string()));

  auto res_a = run_training(spec_a);
  auto res_b = run_training(spec_b);
  REQUIRE(res_a.size() == 1);

  // Header plus one row per episode.
  CHECK(count_lines(res_a[0].metrics_csv) == 11);
  CHECK(slurp(res_a[0].metrics_csv) == slurp(res_b[0].metrics_csv));
  CHECK(fs::exists(res_a[0].checkpoint_file));
  CHECK(fs::exists(fs::path(res_a[0].run_dir) / "resolved_config.txt"));
  CHECK(fs::exists(fs::path(res_a[0].run_dir) / "moving_avg.csv"));
}

TEST_CASE("eval: naive needs no checkpoint, trained schemes do") {
  auto dir = fresh_dir("eval");
  auto spec = spec_from_json_text(tiny_spec_json(dir.string()));
  spec.scheme = "naive";
  auto rows = run_eval_from_spec(spec);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].mean_energy > 0.0);
  CHECK(fs::exists(fs::path(spec.out_dir) / "eval.csv"));

  spec.scheme = "cmaddpg";
  spec.checkpoint.clear();
  CHECK_THROWS_AS(run_eval_from_spec(spec), ConfigError);
}

TEST_CASE("scalability contract: checkpoint runs at device counts never trained") {
  auto dir = fresh_dir("scal");
  auto spec = spec_from_json_text(tiny_spec_json(dir.string(), 3));
  auto trained = run_training(spec);

  // Evaluate at N = 6 although the checkpoint saw N in [2, 3].
  ExperimentSpec eval_spec = spec;
  eval_spec.sim.n_max = 6;
  eval_spec.sim.n_min = 6;
  eval_spec.eval_n = 6;
  eval_spec.eval_episodes = 3;
  auto policy = policy_from_checkpoint("cmaddpg", eval_spec.sim, trained[0].checkpoint_file);
  auto r = run_eval(eval_spec, *policy, 5, 6);
  CHECK(r.mean_energy > 0.0);
  CHECK(r.n == 6);

  // Wrong scheme is rejected.
  CHECK_THROWS_AS(policy_from_checkpoint("vanilla", eval_spec.sim, trained[0].checkpoint_file),
                  ContractError);
}

TEST_CASE("sweep: cartesian accounting and plot series") {
  auto dir = fresh_dir("sweep");
  auto spec = spec_from_json_text(tiny_spec_json(dir.string(), 3));
  auto trained = run_training(spec);

  ExperimentSpec sw = spec;
  sw.checkpoint = trained[0].checkpoint_file;
  sw.seeds = {1, 2};
  sw.eval_episodes = 2;
  sw.sweep_variable = "n";
  sw.sweep_values = {2, 3};
  sw.out_dir = (dir / "sweep_out").string();
  auto rows = run_sweep(sw);
  CHECK(rows.size() == 4);  // 2 values x 2 seeds
  CHECK(fs::exists(fs::path(sw.out_dir) / "sweep.csv"));
  CHECK(fs::exists(fs::path(sw.out_dir) / "series_cmaddpg.csv"));

  ExperimentSpec fx = sw;
  fx.sweep_variable = "f_max";
  fx.sweep_values = {20e9, 40e9};
  fx.seeds = {1};
  fx.out_dir = (dir / "sweep_fmax").string();
  auto rows_f = run_sweep(fx);
  CHECK(rows_f.size() == 2);
}

TEST_CASE("time-varying device schedule emits a per-slot trace") {
  auto dir = fresh_dir("trace");
  auto spec = spec_from_json_text(tiny_spec_json(dir.string(), 3));
  auto trained = run_training(spec);

  ExperimentSpec tr = spec;
  tr.checkpoint = trained[0].checkpoint_file;
  tr.sweep_variable = "n_schedule";
  tr.n_schedule = {2, 4, 3};
  tr.schedule_slots_per_phase = 3;
  tr.out_dir = (dir / "trace_out").string();
  auto rows = run_schedule_trace(tr, 5);
  REQUIRE(rows.size() == 9);
  CHECK(rows[0].n == 2);
  CHECK(rows[3].n == 4);  // the checkpoint was trained on [2, 3]
  CHECK(rows[8].n == 3);
  for (const auto& r : rows) CHECK(r.sum_energy > 0.0);

  run_sweep(tr);
  CHECK(fs::exists(fs::path(tr.out_dir) / "trace.csv"));
}

TEST_CASE("verification entry points pass on small workloads") {
  auto oracle_rep = run_oracle_verify(500, 3);
  CHECK(oracle_rep.steps == 500);
  CHECK(oracle_rep.max_rel_dev < 1e-12);
}

TEST_SUITE_END();
