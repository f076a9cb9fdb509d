#include "mecsim/harness/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "../internal/json_io.hpp"
#include "../internal/sections.hpp"
#include "mecsim/agents/cmaddpg.hpp"
#include "mecsim/baselines/naive.hpp"
#include "mecsim/baselines/saddpg.hpp"
#include "mecsim/baselines/vanilla.hpp"
#include "mecsim/errors.hpp"

extern char** environ;

namespace mecsim::harness {

using internal::Json;
namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const std::vector<std::string> kExperimentKeys = {
    "scheme",       "seeds",          "eval_episodes", "eval_n",
    "sweep",        "n_schedule",     "schedule_slots_per_phase",
    "out_dir",      "checkpoint"};

void apply_env_overrides_to(Json& root) {
  for (char** e = environ; *e != nullptr; ++e) {
    const std::string kv(*e);
    if (kv.rfind("MEC_", 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    std::string name = kv.substr(4, eq - 4);
    const std::string value = kv.substr(eq + 1);
    const auto us = name.find('_');
    if (us == std::string::npos) continue;
    std::string section = name.substr(0, us);
    std::string key = name.substr(us + 1);
    for (auto& c : section) c = static_cast<char>(std::tolower(c));
    for (auto& c : key) c = static_cast<char>(std::tolower(c));
    if (section != "sim" && section != "arch" && section != "train" &&
        section != "experiment") {
      throw ConfigError("environment override names unknown section: " + kv.substr(0, eq));
    }
    Json parsed;
    try {
      parsed = Json::parse(value);
    } catch (...) {
      parsed = value;  // plain string
    }
    root[section][key] = parsed;
  }
}

ExperimentSpec spec_from_json(Json root, bool with_env) {
  if (with_env) apply_env_overrides_to(root);
  ExperimentSpec spec;
  if (root.contains("sim")) spec.sim = env::sim_config_from_json(root.at("sim"));
  if (root.contains("arch")) spec.arch = agents::actor_arch_from_json(root.at("arch"));
  if (root.contains("train")) spec.train = train::train_config_from_json(root.at("train"));
  if (root.contains("experiment")) {
    const Json& j = root.at("experiment");
    internal::check_known_keys(j, kExperimentKeys, "experiment");
    internal::read_key(j, "scheme", spec.scheme);
    internal::read_key(j, "seeds", spec.seeds);
    internal::read_key(j, "eval_episodes", spec.eval_episodes);
    internal::read_key(j, "eval_n", spec.eval_n);
    internal::read_key(j, "n_schedule", spec.n_schedule);
    internal::read_key(j, "schedule_slots_per_phase", spec.schedule_slots_per_phase);
    internal::read_key(j, "out_dir", spec.out_dir);
    internal::read_key(j, "checkpoint", spec.checkpoint);
    if (j.contains("sweep")) {
      const Json& s = j.at("sweep");
      internal::check_known_keys(s, {"variable", "values"}, "experiment.sweep");
      internal::read_key(s, "variable", spec.sweep_variable);
      internal::read_key(s, "values", spec.sweep_values);
    }
  }
  spec.validate();
  return spec;
}

}  // namespace

void ExperimentSpec::validate() const {
  sim.validate();
  arch.validate();
  train.validate();
  if (scheme != "cmaddpg" && scheme != "gs" && scheme != "vanilla" && scheme != "saddpg" &&
      scheme != "naive") {
    throw ConfigError("experiment.scheme must be one of cmaddpg|gs|vanilla|saddpg|naive");
  }
  if (seeds.empty()) throw ConfigError("experiment.seeds must not be empty");
  if (eval_episodes < 1) throw ConfigError("experiment.eval_episodes must be >= 1");
  if (eval_n < 0) throw ConfigError("experiment.eval_n must be >= 0");
  if (!sweep_variable.empty() && sweep_variable != "n" && sweep_variable != "f_max" &&
      sweep_variable != "n_schedule") {
    throw ConfigError("experiment.sweep.variable must be n, f_max or n_schedule");
  }
  if ((sweep_variable == "n" || sweep_variable == "f_max") && sweep_values.empty()) {
    throw ConfigError("experiment.sweep.values must not be empty");
  }
  for (double v : sweep_values) {
    if (!(v > 0.0)) throw ConfigError("experiment.sweep.values must be positive");
  }
  if (sweep_variable == "n_schedule" && n_schedule.empty()) {
    throw ConfigError("experiment.n_schedule must not be empty");
  }
  for (int n : n_schedule) {
    if (n < 1) throw ConfigError("experiment.n_schedule entries must be >= 1");
  }
  if (schedule_slots_per_phase < 1) {
    throw ConfigError("experiment.schedule_slots_per_phase must be >= 1");
  }
}

ExperimentSpec spec_from_file(const std::string& path, bool apply_env) {
  return spec_from_json(internal::load_json_file(path), apply_env);
}

ExperimentSpec spec_from_json_text(const std::string& text, bool apply_env) {
  return spec_from_json(internal::parse_json_text(text, "experiment spec"), apply_env);
}

std::vector<std::string> resolved_config_lines(const ExperimentSpec& s) {
  std::vector<std::string> out;
  auto kv = [&out](const std::string& k, const std::string& v) { out.push_back(k + "=" + v); };
  auto kvd = [&](const std::string& k, double v) { kv(k, fmt17(v)); };
  auto kvi = [&](const std::string& k, long long v) { kv(k, std::to_string(v)); };
  auto kvv = [&](const std::string& k, const std::vector<int>& v) {
    std::string s2;
    for (std::size_t i = 0; i < v.size(); ++i) s2 += (i ? "," : "") + std::to_string(v[i]);
    kv(k, s2);
  };

  kv("experiment.scheme", s.scheme);
  {
    std::string seeds;
    for (std::size_t i = 0; i < s.seeds.size(); ++i) {
      seeds += (i ? "," : "") + std::to_string(s.seeds[i]);
    }
    kv("experiment.seeds", seeds);
  }
  kvi("experiment.eval_episodes", s.eval_episodes);
  kvi("experiment.eval_n", s.eval_n);
  kv("experiment.sweep.variable", s.sweep_variable);
  {
    std::string vals;
    for (std::size_t i = 0; i < s.sweep_values.size(); ++i) {
      vals += (i ? "," : "") + fmt17(s.sweep_values[i]);
    }
    kv("experiment.sweep.values", vals);
  }
  kvv("experiment.n_schedule", s.n_schedule);
  kvi("experiment.schedule_slots_per_phase", s.schedule_slots_per_phase);
  kv("experiment.out_dir", s.out_dir);
  kv("experiment.checkpoint", s.checkpoint);

  kvd("sim.tau_s", s.sim.tau);
  kvi("sim.slots", s.sim.slots);
  kvi("sim.n_min", s.sim.n_min);
  kvi("sim.n_max", s.sim.n_max);
  kvd("sim.area_side_m", s.sim.area_side);
  kvd("sim.alt_min_m", s.sim.alt_min);
  kvd("sim.alt_max_m", s.sim.alt_max);
  kvd("sim.v_max_mps", s.sim.v_max);
  kvd("sim.f_max_hz", s.sim.f_max);
  kvd("sim.cycles_per_bit", s.sim.cycles_per_bit);
  kvd("sim.cap_coeff", s.sim.cap_coeff);
  kvd("sim.out_ratio", s.sim.out_ratio);
  kvd("sim.bandwidth_hz", s.sim.bandwidth);
  kvd("sim.noise_w", s.sim.noise_w);
  kvd("sim.p_up_w", s.sim.p_up);
  kvd("sim.p_down_w", s.sim.p_down);
  kvd("sim.rho0", s.sim.rho0);
  kvd("sim.pathloss_exp", s.sim.pathloss_exp);
  kvd("sim.chi_los", s.sim.chi_los);
  kvd("sim.chi_nlos", s.sim.chi_nlos);
  kvd("sim.k1", s.sim.k1);
  kvd("sim.k2", s.sim.k2);
  kvd("sim.task_min_bits", s.sim.task_min);
  kvd("sim.task_max_bits", s.sim.task_max);
  kvd("sim.mem_speed", s.sim.mem_speed);
  kvd("sim.mem_heading", s.sim.mem_heading);
  kvd("sim.mean_speed_max_mps", s.sim.mean_speed_max);
  kvd("sim.sigma_speed_mps", s.sim.sigma_speed);
  kvd("sim.sigma_heading_rad", s.sim.sigma_heading);

  kvi("arch.msg_dim", s.arch.msg_dim);
  kvi("arch.feat_dim", s.arch.feat_dim);
  kvv("arch.mu_id_hidden", s.arch.mu_id_hidden);
  kvv("arch.eps_uav_hidden", s.arch.eps_uav_hidden);
  kvv("arch.eps_id_hidden", s.arch.eps_id_hidden);
  kvv("arch.gamma_v_hidden", s.arch.gamma_v_hidden);
  kvv("arch.gamma_f_hidden", s.arch.gamma_f_hidden);
  kvv("arch.pi_id_hidden", s.arch.pi_id_hidden);
  kvv("arch.critic_hidden", s.arch.critic_hidden);
  kv("arch.hidden_act", numkit::act_to_string(s.arch.hidden_act));
  kv("arch.critic_sees_messages", s.arch.critic_sees_messages ? "true" : "false");

  kvi("train.episodes", s.train.episodes);
  kvi("train.batch", s.train.batch);
  kvd("train.lr_actor", s.train.lr_actor);
  kvd("train.lr_critic", s.train.lr_critic);
  kvd("train.discount", s.train.discount);
  kvd("train.target_rate_actor", s.train.target_rate_actor);
  kvd("train.target_rate_critic", s.train.target_rate_critic);
  kvd("train.sigma2_init", s.train.sigma2_init);
  kvd("train.sigma2_decay", s.train.sigma2_decay);
  kv("train.optimizer", s.train.optimizer);
  kvi("train.replay_capacity", s.train.replay_capacity);
  kvi("train.checkpoint_every", s.train.checkpoint_every);
  kvi("train.moving_avg_window", s.train.moving_avg_window);
  return out;
}

std::unique_ptr<agents::Policy> make_policy(const std::string& scheme,
                                            const env::SimConfig& sim,
                                            const agents::ActorArch& arch, numkit::Rng& rng) {
  if (scheme == "cmaddpg") {
    return std::make_unique<agents::CmaddpgActors>(sim, arch, agents::Aggregator::gat, rng);
  }
  if (scheme == "gs") {
    return std::make_unique<agents::CmaddpgActors>(sim, arch, agents::Aggregator::graphsage,
                                                   rng);
  }
  if (scheme == "vanilla") return std::make_unique<baselines::VanillaActors>(sim, arch, rng);
  if (scheme == "saddpg") return std::make_unique<baselines::SaddpgActor>(sim, arch, rng);
  if (scheme == "naive") return std::make_unique<baselines::NaivePolicy>(sim);
  throw ConfigError("unknown scheme: " + scheme);
}

std::unique_ptr<agents::Policy> policy_from_checkpoint(const std::string& scheme,
                                                       const env::SimConfig& sim,
                                                       const std::string& path) {
  if (scheme == "naive") return std::make_unique<baselines::NaivePolicy>(sim);
  const agents::Checkpoint ck = agents::load_checkpoint(path);
  const std::string ck_scheme = ck.meta.scheme == "cmaddpg-gs" ? "gs" : ck.meta.scheme;
  if (ck_scheme != scheme) {
    throw ContractError("checkpoint scheme '" + ck.meta.scheme + "' does not match requested '" +
                        scheme + "'");
  }
  if (scheme == "saddpg" && ck.meta.n_max != sim.n_max) {
    throw ContractError("saddpg checkpoint is fixed to N = " + std::to_string(ck.meta.n_max) +
                        " but the plant has n_max = " + std::to_string(sim.n_max));
  }
  numkit::Rng rng(ck.meta.seed);
  auto policy = make_policy(scheme, sim, ck.meta.arch, rng);
  auto* trainable = dynamic_cast<agents::TrainablePolicy*>(policy.get());
  trainable->set_params(ck.actor_params);
  return policy;
}

namespace {

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot write " + path);
  for (const auto& l : lines) out << l << "\n";
}

}  // namespace

std::vector<TrainRunResult> run_training(const ExperimentSpec& spec) {
  if (spec.scheme == "naive") {
    throw ConfigError("the naive scheme is training-free; use eval");
  }
  std::vector<TrainRunResult> results;
  for (const std::uint64_t seed : spec.seeds) {
    const fs::path run_dir = fs::path(spec.out_dir) / spec.scheme / ("seed_" + std::to_string(seed));
    fs::create_directories(run_dir);

    auto lines = resolved_config_lines(spec);
    lines.push_back("run.seed=" + std::to_string(seed));
    write_lines((run_dir / "resolved_config.txt").string(), lines);

    numkit::Rng rng(seed);
    auto policy = make_policy(spec.scheme, spec.sim, spec.arch, rng);
    auto* trainable = dynamic_cast<agents::TrainablePolicy*>(policy.get());
    train::TrainConfig tcfg = spec.train;
    tcfg.seed = seed;
    train::Trainer trainer(*trainable, spec.sim, spec.arch, tcfg, rng);

    std::ofstream metrics(run_dir / "metrics.csv");
    metrics << "episode,n,sum_energy_J,reward,critic_loss,actor_objective,sigma2\n";
    std::ofstream mavg(run_dir / "moving_avg.csv");
    mavg << "episode,avg_energy_J\n";

    const int window = spec.train.moving_avg_window;
    std::vector<double> ring(static_cast<std::size_t>(window), 0.0);
    long count = 0;
    double ring_sum = 0.0;
    double first_avg = 0.0, last_avg = 0.0;

    agents::CheckpointMeta meta;
    meta.scheme = policy->kind();
    meta.arch = spec.arch;
    meta.n_max = spec.sim.n_max;
    meta.n_min = spec.sim.n_min;
    meta.seed = seed;

    const auto t0 = std::chrono::steady_clock::now();
    trainer.run([&](const train::EpisodeRecord& r) {
      metrics << r.episode << ',' << r.n_active << ',' << fmt17(r.sum_energy) << ','
              << fmt17(r.reward) << ',' << fmt17(r.critic_loss) << ','
              << fmt17(r.actor_objective) << ',' << fmt17(r.sigma2) << "\n";
      const std::size_t slot = static_cast<std::size_t>((r.episode - 1) % window);
      if (count >= window) ring_sum -= ring[slot];
      ring[slot] = r.sum_energy;
      ring_sum += r.sum_energy;
      ++count;
      if (count >= window) {
        last_avg = ring_sum / window;
        mavg << r.episode << ',' << fmt17(last_avg) << "\n";
        if (count == window) first_avg = last_avg;
      }
      if (spec.train.checkpoint_every > 0 && r.episode % spec.train.checkpoint_every == 0) {
        meta.episodes_trained = r.episode;
        save_checkpoint((run_dir / ("checkpoint_ep" + std::to_string(r.episode) + ".mecp"))
                            .string(),
                        meta, trainable->params(), nullptr);
      }
    });
    const auto t1 = std::chrono::steady_clock::now();

    // Short runs: fall back to the plain mean over what we saw.
    if (count < window && count > 0) {
      double s = 0.0;
      for (long i = 0; i < count; ++i) s += ring[static_cast<std::size_t>(i)];
      first_avg = last_avg = s / count;
    }

    meta.episodes_trained = spec.train.episodes;
    numkit::ParamSet critic_params = trainer.critic().params();
    const std::string ckpt = (run_dir / "checkpoint.mecp").string();
    save_checkpoint(ckpt, meta, trainable->params(), &critic_params);

    TrainRunResult res;
    res.seed = seed;
    res.run_dir = run_dir.string();
    res.metrics_csv = (run_dir / "metrics.csv").string();
    res.checkpoint_file = ckpt;
    res.first_window_avg_energy = first_avg;
    res.last_window_avg_energy = last_avg;
    res.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    results.push_back(res);
  }
  return results;
}

EvalResult run_eval(const ExperimentSpec& spec, agents::Policy& policy, std::uint64_t seed,
                    int fixed_n) {
  env::SimConfig sim = spec.sim;
  if (fixed_n > sim.n_max) throw ConfigError("eval_n exceeds sim.n_max");
  env::Env e(sim);
  numkit::Rng rng(seed);

  EvalResult res;
  res.seed = seed;
  res.episodes = spec.eval_episodes;
  res.n = fixed_n;

  double sum = 0.0, sum2 = 0.0;
  double decision_seconds = 0.0;
  long decisions = 0;
  for (long ep = 0; ep < spec.eval_episodes; ++ep) {
    const int n = (fixed_n > 0) ? fixed_n : rng.uniform_int(sim.n_min, sim.n_max);
    std::vector<int> idx(sim.n_max);
    for (int i = 0; i < sim.n_max; ++i) idx[i] = i;
    for (int i = sim.n_max - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(0, i)]);
    std::vector<std::uint8_t> mask(sim.n_max, 0);
    for (int i = 0; i < n; ++i) mask[idx[i]] = 1;
    e.reset(rng, mask);

    double ep_energy = 0.0;
    for (int t = 0; t < sim.slots; ++t) {
      const auto c0 = std::chrono::steady_clock::now();
      ActionBundle a = policy.act(e);
      const auto c1 = std::chrono::steady_clock::now();
      decision_seconds += std::chrono::duration<double>(c1 - c0).count();
      decisions += n + 1;
      const auto out = e.step(a, rng, policy.clamp_lambda_in_env());
      ep_energy += -out.reward;
      res.lambda_clamps += out.lambda_clamps;
    }
    sum += ep_energy;
    sum2 += ep_energy * ep_energy;
  }
  const double mean = sum / spec.eval_episodes;
  res.mean_energy = mean;
  res.std_energy = std::sqrt(std::max(0.0, sum2 / spec.eval_episodes - mean * mean));
  res.ms_per_decision = decisions > 0 ? 1e3 * decision_seconds / decisions : 0.0;
  return res;
}

std::vector<EvalResult> run_eval_from_spec(const ExperimentSpec& spec) {
  fs::create_directories(spec.out_dir);
  std::unique_ptr<agents::Policy> policy;
  if (spec.scheme == "naive") {
    numkit::Rng rng(0);
    policy = make_policy("naive", spec.sim, spec.arch, rng);
  } else {
    if (spec.checkpoint.empty()) {
      throw ConfigError("eval of scheme '" + spec.scheme + "' needs a checkpoint");
    }
    policy = policy_from_checkpoint(spec.scheme, spec.sim, spec.checkpoint);
  }

  std::ofstream csv(fs::path(spec.out_dir) / "eval.csv");
  csv << "scheme,seed,episodes,n,mean_energy_J,std_energy_J,ms_per_decision\n";
  std::vector<EvalResult> rows;
  for (std::uint64_t seed : spec.seeds) {
    EvalResult r = run_eval(spec, *policy, seed, spec.eval_n);
    csv << spec.scheme << ',' << seed << ',' << r.episodes << ',' << r.n << ','
        << fmt17(r.mean_energy) << ',' << fmt17(r.std_energy) << ','
        << fmt17(r.ms_per_decision) << "\n";
    rows.push_back(r);
  }
  return rows;
}

std::vector<TraceRow> run_schedule_trace(const ExperimentSpec& spec, std::uint64_t seed) {
  if (spec.n_schedule.empty()) throw ConfigError("n_schedule is empty");
  env::SimConfig sim = spec.sim;
  int peak = 0;
  for (int n : spec.n_schedule) peak = std::max(peak, n);
  sim.n_max = std::max(sim.n_max, peak);
  sim.n_min = std::min(sim.n_min, peak);

  std::unique_ptr<agents::Policy> policy;
  if (spec.scheme == "naive") {
    numkit::Rng rng(0);
    policy = make_policy("naive", sim, spec.arch, rng);
  } else {
    if (spec.checkpoint.empty()) throw ConfigError("schedule trace needs a checkpoint");
    policy = policy_from_checkpoint(spec.scheme, sim, spec.checkpoint);
  }

  numkit::Rng rng(seed);
  env::Env e(sim);
  auto mask_for = [&](int n) {
    std::vector<std::uint8_t> mask(sim.n_max, 0);
    for (int i = 0; i < n; ++i) mask[i] = 1;
    return mask;
  };
  e.reset(rng, mask_for(spec.n_schedule.front()));

  std::vector<TraceRow> rows;
  int slot = 0;
  for (std::size_t phase = 0; phase < spec.n_schedule.size(); ++phase) {
    if (phase > 0) e.set_active(mask_for(spec.n_schedule[phase]), rng);
    for (int t = 0; t < spec.schedule_slots_per_phase; ++t) {
      ActionBundle a = policy->act(e);
      const auto out = e.step(a, rng, policy->clamp_lambda_in_env());
      rows.push_back({slot++, spec.n_schedule[phase], -out.reward});
    }
  }
  return rows;
}

std::vector<SweepRow> run_sweep(const ExperimentSpec& spec) {
  fs::create_directories(spec.out_dir);
  std::vector<SweepRow> rows;

  if (spec.sweep_variable == "n_schedule") {
    std::ofstream csv(fs::path(spec.out_dir) / "trace.csv");
    csv << "slot,n,sum_energy_J\n";
    for (const auto& r : run_schedule_trace(spec, spec.seeds.front())) {
      csv << r.slot << ',' << r.n << ',' << fmt17(r.sum_energy) << "\n";
    }
    return rows;
  }
  if (spec.sweep_variable.empty()) throw ConfigError("sweep: no sweep variable configured");

  std::ofstream csv(fs::path(spec.out_dir) / "sweep.csv");
  csv << "variable,value,seed,scheme,mean_energy_J,std_energy_J,ms_per_decision\n";
  for (double value : spec.sweep_values) {
    for (std::uint64_t seed : spec.seeds) {
      ExperimentSpec cell = spec;
      int fixed_n = spec.eval_n;
      if (spec.sweep_variable == "n") {
        fixed_n = static_cast<int>(value);
        cell.sim.n_max = std::max(cell.sim.n_max, fixed_n);
      } else {
        cell.sim.f_max = value;
      }

      std::unique_ptr<agents::Policy> policy;
      if (cell.scheme == "naive") {
        numkit::Rng rng(0);
        policy = make_policy("naive", cell.sim, cell.arch, rng);
      } else if (cell.scheme == "saddpg" && spec.sweep_variable == "n") {
        // Non-scalable by design: train per device count.
        env::SimConfig per_n = cell.sim;
        per_n.n_min = per_n.n_max = fixed_n;
        ExperimentSpec tspec = cell;
        tspec.sim = per_n;
        tspec.seeds = {seed};
        tspec.out_dir = (fs::path(spec.out_dir) / ("saddpg_n" + std::to_string(fixed_n))).string();
        auto trained = run_training(tspec);
        policy = policy_from_checkpoint("saddpg", per_n, trained.front().checkpoint_file);
        cell.sim = per_n;  // fixed-N plant for the fixed-N policy
      } else {
        if (cell.checkpoint.empty()) throw ConfigError("sweep needs a checkpoint");
        policy = policy_from_checkpoint(cell.scheme, cell.sim, cell.checkpoint);
      }

      const EvalResult r = run_eval(cell, *policy, seed, fixed_n);
      SweepRow row;
      row.variable = spec.sweep_variable;
      row.value = value;
      row.seed = seed;
      row.mean_energy = r.mean_energy;
      row.std_energy = r.std_energy;
      row.ms_per_decision = r.ms_per_decision;
      rows.push_back(row);
      csv << row.variable << ',' << fmt17(row.value) << ',' << seed << ',' << spec.scheme << ','
          << fmt17(row.mean_energy) << ',' << fmt17(row.std_energy) << ','
          << fmt17(row.ms_per_decision) << "\n";
    }
  }

  // Two-column plot series: value, mean over seeds.
  std::ofstream series(fs::path(spec.out_dir) / ("series_" + spec.scheme + ".csv"));
  series << "value,mean_energy_J\n";
  for (double value : spec.sweep_values) {
    double acc = 0.0;
    int cnt = 0;
    for (const auto& r : rows) {
      if (r.value == value) {
        acc += r.mean_energy;
        ++cnt;
      }
    }
    if (cnt > 0) series << fmt17(value) << ',' << fmt17(acc / cnt) << "\n";
  }
  return rows;
}

}  // namespace mecsim::harness
