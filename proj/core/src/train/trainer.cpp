#include "mecsim/train/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "../internal/json_io.hpp"
#include "mecsim/agents/cmaddpg.hpp"
#include "mecsim/errors.hpp"

namespace mecsim::train {

using agents::TrainablePolicy;
using numkit::ParamSet;
using numkit::Rng;
using numkit::Tensor2;

void TrainConfig::validate() const {
  if (episodes < 1) throw ConfigError("train.episodes must be >= 1");
  if (batch < 1) throw ConfigError("train.batch must be >= 1");
  if (!(lr_actor >= 0.0) || !(lr_critic >= 0.0)) throw ConfigError("train: negative lr");
  // 0 is allowed: the myopic target y = r is a meaningful degenerate case.
  if (!(discount >= 0.0 && discount <= 1.0)) throw ConfigError("train.discount must be in [0, 1]");
  if (!(target_rate_actor >= 0.0 && target_rate_actor <= 1.0) ||
      !(target_rate_critic >= 0.0 && target_rate_critic <= 1.0)) {
    throw ConfigError("train: target rates must be in [0, 1]");
  }
  if (sigma2_init < 0.0) throw ConfigError("train.sigma2_init must be >= 0");
  if (!(sigma2_decay > 0.0 && sigma2_decay <= 1.0)) {
    throw ConfigError("train.sigma2_decay must be in (0, 1]");
  }
  if (optimizer != "sgd" && optimizer != "adam") {
    throw ConfigError("train.optimizer must be 'sgd' or 'adam'");
  }
  if (replay_capacity < 1) throw ConfigError("train.replay_capacity must be >= 1");
  if (moving_avg_window < 1) throw ConfigError("train.moving_avg_window must be >= 1");
}

namespace {
const std::vector<std::string> kTrainKeys = {
    "episodes",        "batch",           "lr_actor",       "lr_critic",
    "discount",        "target_rate_actor", "target_rate_critic", "sigma2_init",
    "sigma2_decay",    "optimizer",       "replay_capacity", "checkpoint_every",
    "moving_avg_window", "seed"};
}

TrainConfig train_config_from_json(const internal::Json& j) {
  using internal::read_key;
  internal::check_known_keys(j, kTrainKeys, "train");
  TrainConfig c;
  read_key(j, "episodes", c.episodes);
  read_key(j, "batch", c.batch);
  read_key(j, "lr_actor", c.lr_actor);
  read_key(j, "lr_critic", c.lr_critic);
  read_key(j, "discount", c.discount);
  read_key(j, "target_rate_actor", c.target_rate_actor);
  read_key(j, "target_rate_critic", c.target_rate_critic);
  read_key(j, "sigma2_init", c.sigma2_init);
  read_key(j, "sigma2_decay", c.sigma2_decay);
  read_key(j, "optimizer", c.optimizer);
  read_key(j, "replay_capacity", c.replay_capacity);
  read_key(j, "checkpoint_every", c.checkpoint_every);
  read_key(j, "moving_avg_window", c.moving_avg_window);
  read_key(j, "seed", c.seed);
  c.validate();
  return c;
}

TrainConfig train_config_from_json_text(const std::string& text) {
  const auto j = internal::parse_json_text(text, "train config");
  return train_config_from_json(j.contains("train") ? j.at("train") : j);
}

ActionBundle inject_exploration(const ActionBundle& a, double sigma2, Rng& rng,
                                const env::Env& e) {
  if (sigma2 < 0.0) throw ContractError("inject_exploration: negative variance");
  const auto& cfg = e.cfg();
  ActionBundle out = a;

  for (int k = 0; k < 3; ++k) {
    out.traj_raw[k] = std::clamp(a.traj_raw[k] + rng.gaussian(0.0, sigma2), -1.0, 1.0);
  }
  const agents::TrajProjection t = agents::project_traj(out.traj_raw, cfg);
  out.v = t.v;
  out.eta = t.eta;
  out.beta = t.beta;

  std::vector<double> ft_active;
  for (int j = 0; j < a.n_max; ++j) {
    if (!a.active[j]) continue;
    const double noised = a.f_tilde[j] + rng.gaussian(0.0, sigma2);
    out.f_tilde[j] = std::max(0.0, noised);
    ft_active.push_back(out.f_tilde[j]);
  }
  std::vector<double> f_active;
  agents::normalize_f(ft_active, cfg.f_max, f_active);
  int slot = 0;
  for (int j = 0; j < a.n_max; ++j) {
    if (a.active[j]) out.f[j] = f_active[slot++];
  }

  for (int j = 0; j < a.n_max; ++j) {
    if (!a.active[j]) continue;
    out.lambda_sig[j] = std::clamp(a.lambda_sig[j] + rng.gaussian(0.0, sigma2), 0.0, 1.0);
  }
  // Re-derive the feasible bound at the noised trajectory and CPU split.
  const env::RatePreview preview = e.rates_after_uav_move(out.v, out.eta, out.beta);
  for (int j = 0; j < a.n_max; ++j) {
    if (!a.active[j]) continue;
    out.lambda_cap[j] = env::lambda_max(e.id(j).task_bits, preview.rate_up[j],
                                        preview.rate_down[j], out.f[j], cfg);
    out.lambda[j] = out.lambda_cap[j] * out.lambda_sig[j];
  }
  return out;
}

Trainer::Trainer(TrainablePolicy& policy, const env::SimConfig& sim,
                 const agents::ActorArch& arch, const TrainConfig& cfg, Rng rng)
    : policy_(policy),
      target_policy_(policy.clone()),
      sim_(sim),
      cfg_(cfg),
      critic_(policy.state_width(), policy.action_width(), arch, rng),
      target_critic_(critic_),
      buffer_(static_cast<std::size_t>(cfg.replay_capacity)),
      env_(sim),
      rng_(rng),
      sigma2_(cfg.sigma2_init),
      use_adam_(cfg.optimizer == "adam") {
  cfg_.validate();
  sim_.validate();
}

void Trainer::validate_transition(const TransitionSample& t) const {
  const int nm = policy_.n_max();
  if (static_cast<int>(t.mask.size()) != nm) throw TrainingError("transition: bad mask length");
  if (static_cast<int>(t.s.size()) != policy_.state_width() ||
      static_cast<int>(t.s_next.size()) != policy_.state_width() ||
      static_cast<int>(t.a.size()) != policy_.action_width()) {
    throw TrainingError("transition: width mismatch");
  }
  if (!std::isfinite(t.r)) throw TrainingError("transition: non-finite reward");
  const int pm = policy_.packed_msg_dim();
  const int pf = policy_.packed_feat_dim();
  for (int j = 0; j < nm; ++j) {
    if (t.mask[j]) continue;
    for (int k = 0; k < 7; ++k) {
      if (t.s[3 + 7 * j + k] != 0.0 || t.s_next[3 + 7 * j + k] != 0.0) {
        throw TrainingError("transition: masked state slot not zero");
      }
    }
    if (t.a[3 + j] != 0.0 || t.a[3 + nm + j] != 0.0) {
      throw TrainingError("transition: masked action slot not zero");
    }
    for (int k = 0; k < pm; ++k) {
      if (t.a[3 + 2 * nm + j * pm + k] != 0.0) {
        throw TrainingError("transition: masked uplink slot not zero");
      }
    }
    for (int k = 0; k < pf; ++k) {
      if (t.a[3 + 2 * nm + nm * pm + j * pf + k] != 0.0) {
        throw TrainingError("transition: masked downlink slot not zero");
      }
    }
  }
}

void Trainer::store_transition(TransitionSample t) {
  validate_transition(t);
  buffer_.push(std::move(t));
}

std::vector<const TransitionSample*> Trainer::sample_batch() {
  std::vector<const TransitionSample*> batch(static_cast<std::size_t>(cfg_.batch));
  for (auto& p : batch) p = &buffer_.sample(rng_);
  return batch;
}

void Trainer::critic_input_rows(const std::vector<const TransitionSample*>& batch, bool next,
                                const Tensor2& actions, Tensor2& out) const {
  const int b = static_cast<int>(batch.size());
  const int ws = policy_.state_width();
  const int wa = policy_.action_width();
  if (out.rows() != b || out.cols() != ws + wa) out = Tensor2(b, ws + wa);
  for (int i = 0; i < b; ++i) {
    const auto& s = next ? batch[i]->s_next : batch[i]->s;
    double* row = out.row(i);
    std::copy(s.begin(), s.end(), row);
    if (actions.rows() == b) {
      std::copy(actions.row(i), actions.row(i) + wa, row + ws);
    } else {
      std::copy(batch[i]->a.begin(), batch[i]->a.end(), row + ws);
    }
  }
}

double Trainer::critic_update(const std::vector<const TransitionSample*>& batch) {
  if (batch.empty()) throw ContractError("critic_update: empty batch");
  const int b = static_cast<int>(batch.size());
  const int ws = policy_.state_width();

  // Target action at the next state, masking preserved.
  Tensor2 s_next(b, ws);
  agents::MaskMat masks(b);
  for (int i = 0; i < b; ++i) {
    std::copy(batch[i]->s_next.begin(), batch[i]->s_next.end(), s_next.row(i));
    masks[i] = batch[i]->mask;
  }
  const agents::Geometry geom = agents::geometry_from_states(s_next, policy_.n_max(), sim_);
  auto cache = target_policy_->make_cache();
  Tensor2 a_next;
  target_policy_->forward_batch(s_next, masks, geom, *cache, a_next);

  Tensor2 sa_next;
  critic_input_rows(batch, /*next=*/true, a_next, sa_next);
  const Tensor2 q_next = target_critic_.net().forward(sa_next);

  Tensor2 sa;
  critic_input_rows(batch, /*next=*/false, Tensor2(), sa);
  numkit::DenseNet::Cache ccache;
  const Tensor2 q = critic_.net().forward(sa, &ccache);

  double loss = 0.0;
  Tensor2 d_q(b, 1);
  for (int i = 0; i < b; ++i) {
    const double y = batch[i]->r + cfg_.discount * q_next(i, 0);
    const double resid = q(i, 0) - y;
    loss += resid * resid;
    d_q(i, 0) = 2.0 * resid / b;
  }
  loss /= b;
  if (!std::isfinite(loss)) {
    throw TrainingError("critic_update: non-finite loss after " +
                        std::to_string(critic_updates_) + " updates");
  }

  ParamSet grads = numkit::zeros_like(critic_.params());
  critic_.net().backward(ccache, d_q, grads, 0);
  if (!grads.all_finite()) throw TrainingError("critic_update: non-finite gradient");
  ParamSet params = critic_.params();
  if (use_adam_) {
    numkit::adam_step_inplace(params, grads, cfg_.lr_critic, adam_critic_);
  } else {
    numkit::sgd_step_inplace(params, grads, cfg_.lr_critic);
  }
  critic_.set_params(params);
  ++critic_updates_;
  return loss;
}

std::pair<ParamSet, double> Trainer::actor_gradient(
    const std::vector<const TransitionSample*>& batch) {
  if (batch.empty()) throw ContractError("actor_gradient: empty batch");
  const int b = static_cast<int>(batch.size());
  const int ws = policy_.state_width();

  Tensor2 states(b, ws);
  agents::MaskMat masks(b);
  for (int i = 0; i < b; ++i) {
    std::copy(batch[i]->s.begin(), batch[i]->s.end(), states.row(i));
    masks[i] = batch[i]->mask;
  }
  const agents::Geometry geom = agents::geometry_from_states(states, policy_.n_max(), sim_);
  auto cache = policy_.make_cache();
  Tensor2 a_pi;
  policy_.forward_batch(states, masks, geom, *cache, a_pi);

  Tensor2 sa;
  critic_input_rows(batch, /*next=*/false, a_pi, sa);
  numkit::DenseNet::Cache ccache;
  const Tensor2 q = critic_.net().forward(sa, &ccache);
  double objective = 0.0;
  for (int i = 0; i < b; ++i) objective += q(i, 0);
  objective /= b;

  Tensor2 d_q(b, 1);
  for (int i = 0; i < b; ++i) d_q(i, 0) = 1.0 / b;
  const Tensor2 d_sa = critic_.net().backward_input_only(ccache, d_q);

  Tensor2 d_a(b, policy_.action_width());
  for (int i = 0; i < b; ++i) {
    std::copy(d_sa.row(i) + ws, d_sa.row(i) + d_sa.cols(), d_a.row(i));
  }
  ParamSet grads = numkit::zeros_like(policy_.params());
  policy_.backward_batch(*cache, d_a, grads);
  if (!grads.all_finite()) throw TrainingError("actor_gradient: non-finite gradient");
  return {std::move(grads), objective};
}

double Trainer::actor_update(const std::vector<const TransitionSample*>& batch) {
  auto [grads, objective] = actor_gradient(batch);
  // Ascent on the objective = descent on its negation.
  numkit::scale_inplace(grads, -1.0);
  ParamSet params = policy_.params();
  if (use_adam_) {
    numkit::adam_step_inplace(params, grads, cfg_.lr_actor, adam_actor_);
  } else {
    numkit::sgd_step_inplace(params, grads, cfg_.lr_actor);
  }
  policy_.set_params(params);
  ++actor_updates_;
  return objective;
}

void Trainer::soft_update_targets() {
  ParamSet actor_t = target_policy_->params();
  numkit::soft_blend_inplace(actor_t, policy_.params(), cfg_.target_rate_actor);
  target_policy_->set_params(actor_t);

  ParamSet critic_t = target_critic_.params();
  numkit::soft_blend_inplace(critic_t, critic_.params(), cfg_.target_rate_critic);
  target_critic_.set_params(critic_t);
}

void Trainer::run(const EpisodeCallback& cb) {
  const int nm = sim_.n_max;
  for (long ep = 1; ep <= cfg_.episodes; ++ep) {
    sigma2_ *= cfg_.sigma2_decay;
    const int n = rng_.uniform_int(sim_.n_min, sim_.n_max);
    // Fisher-Yates over the device indices, then the first n become active.
    std::vector<int> idx(nm);
    for (int i = 0; i < nm; ++i) idx[i] = i;
    for (int i = nm - 1; i > 0; --i) std::swap(idx[i], idx[rng_.uniform_int(0, i)]);
    std::vector<std::uint8_t> mask(nm, 0);
    for (int i = 0; i < n; ++i) mask[idx[i]] = 1;

    env_.reset(rng_, mask);
    std::vector<double> s = env_.state_vector();

    EpisodeRecord rec;
    rec.episode = ep;
    rec.n_active = n;
    rec.sigma2 = sigma2_;
    double loss_acc = 0.0, obj_acc = 0.0;

    for (int t = 0; t < sim_.slots; ++t) {
      ActionBundle bundle = policy_.act(env_);
      bundle = inject_exploration(bundle, sigma2_, rng_, env_);
      const std::vector<double> a = bundle.pack(sim_.f_max, sim_.v_max);
      const env::StepOutcome out = env_.step(bundle, rng_, policy_.clamp_lambda_in_env());
      std::vector<double> s_next = env_.state_vector();

      rec.reward += out.reward;
      rec.sum_energy += -out.reward;
      rec.lambda_clamps += out.lambda_clamps;

      store_transition({s, a, out.reward, s_next, mask});
      auto batch = sample_batch();
      loss_acc += critic_update(batch);
      obj_acc += actor_update(batch);
      soft_update_targets();
      s = std::move(s_next);
    }
    rec.critic_loss = loss_acc / sim_.slots;
    rec.actor_objective = obj_acc / sim_.slots;
    if (cb) cb(rec);
  }
}

}  // namespace mecsim::train
