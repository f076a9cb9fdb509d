#pragma once

#include <functional>
#include <memory>
#include <string>

#include "mecsim/agents/critic.hpp"
#include "mecsim/agents/policy.hpp"
#include "mecsim/env/env.hpp"
#include "mecsim/train/replay.hpp"

namespace mecsim::train {

struct TrainConfig {
  long episodes = 100000;
  int batch = 256;
  double lr_actor = 1e-4;
  double lr_critic = 1e-3;
  double discount = 0.95;
  double target_rate_actor = 0.005;   // actor soft-update rate
  double target_rate_critic = 0.005;  // critic soft-update rate
  double sigma2_init = 0.45;          // exploration noise variance
  double sigma2_decay = 0.9995;       // per-episode decay ratio
  std::string optimizer = "sgd";      // "sgd" or "adam"
  long replay_capacity = 100000;
  long checkpoint_every = 0;  // episodes between checkpoints; 0 = final only
  int moving_avg_window = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

TrainConfig train_config_from_json_text(const std::string& text);

/// Pre-projection Gaussian exploration on the solution actions: trajectory
/// raws, raw CPU shares and offload sigmoids are noised, then every
/// projection is re-applied (range clamps, CPU normalization, feasible
/// offload bound at the noised trajectory). Messages are left untouched.
/// sigma2 == 0 returns the bundle unchanged (draws are still consumed).
ActionBundle inject_exploration(const ActionBundle& a, double sigma2, numkit::Rng& rng,
                                const env::Env& e);

struct EpisodeRecord {
  long episode = 0;
  int n_active = 0;
  double sum_energy = 0.0;  // [J], summed over the episode's slots
  double reward = 0.0;      // summed reward
  double critic_loss = 0.0;       // mean over the episode's updates
  double actor_objective = 0.0;   // mean over the episode's updates
  double sigma2 = 0.0;
  int lambda_clamps = 0;
};

/// Centralized-training loop: per slot one critic regression step, one actor
/// ascent step and a soft target blend, with per-episode device-count
/// randomization and masking.
class Trainer {
 public:
  Trainer(agents::TrainablePolicy& policy, const env::SimConfig& sim,
          const agents::ActorArch& arch, const TrainConfig& cfg, numkit::Rng rng);

  using EpisodeCallback = std::function<void(const EpisodeRecord&)>;
  void run(const EpisodeCallback& cb);

  // Individual update steps, exposed for direct testing.
  double critic_update(const std::vector<const TransitionSample*>& batch);
  double actor_update(const std::vector<const TransitionSample*>& batch);
  void soft_update_targets();

  /// d(mean batch Q)/d(actor params) plus the objective value, without
  /// applying the step.
  std::pair<numkit::ParamSet, double> actor_gradient(
      const std::vector<const TransitionSample*>& batch);

  agents::Critic& critic() { return critic_; }
  const agents::Critic& target_critic() const { return target_critic_; }
  const agents::TrainablePolicy& target_policy() const { return *target_policy_; }
  ReplayBuffer& buffer() { return buffer_; }
  env::Env& environment() { return env_; }
  double sigma2() const { return sigma2_; }
  long critic_updates() const { return critic_updates_; }
  long actor_updates() const { return actor_updates_; }

  void store_transition(TransitionSample t);

 private:
  agents::TrainablePolicy& policy_;
  std::unique_ptr<agents::TrainablePolicy> target_policy_;
  env::SimConfig sim_;
  TrainConfig cfg_;
  agents::Critic critic_;
  agents::Critic target_critic_;
  ReplayBuffer buffer_;
  env::Env env_;
  numkit::Rng rng_;
  double sigma2_;
  long critic_updates_ = 0;
  long actor_updates_ = 0;
  numkit::AdamState adam_actor_;
  numkit::AdamState adam_critic_;
  bool use_adam_ = false;

  void validate_transition(const TransitionSample& t) const;
  std::vector<const TransitionSample*> sample_batch();
  void critic_input_rows(const std::vector<const TransitionSample*>& batch, bool next,
                         const numkit::Tensor2& actions, numkit::Tensor2& out) const;
};

}  // namespace mecsim::train
