#pragma once

#include "mecsim/agents/arch.hpp"
#include "mecsim/agents/policy.hpp"
#include "mecsim/numkit/net.hpp"

namespace mecsim::baselines {

/// Message-free ablation: every agent's solution actor sees only its own
/// observation. The server's trajectory comes from its own position alone;
/// its CPU head consumes a learned embedding of that observation replicated
/// per device slot, which normalizes to the equal split. Devices bound their
/// offload ratio with the equal-split CPU assumption, so the plant clamps
/// any residual infeasibility.
class VanillaActors final : public agents::TrainablePolicy {
 public:
  VanillaActors(const env::SimConfig& sim, agents::ActorArch arch, numkit::Rng& rng);

  std::string kind() const override { return "vanilla"; }
  bool clamp_lambda_in_env() const override { return true; }
  int n_max() const override { return sim_.n_max; }

  ActionBundle act(const env::Env& e) const override;

  std::unique_ptr<Cache> make_cache() const override;
  void forward_batch(const numkit::Tensor2& states, const agents::MaskMat& masks,
                     const agents::Geometry& geom, Cache& cache,
                     numkit::Tensor2& actions) const override;
  void backward_batch(const Cache& cache, const numkit::Tensor2& d_actions,
                      numkit::ParamSet& grads) const override;

  numkit::ParamSet params() const override;
  void set_params(const numkit::ParamSet& ps) override;
  std::unique_ptr<TrainablePolicy> clone() const override;

 private:
  env::SimConfig sim_;
  agents::ActorArch arch_;
  numkit::DenseNet traj_net_;    // 3 -> 3, tanh output
  numkit::DenseNet f_embed_;     // 3 -> E, relu output
  numkit::DenseNet f_head_;      // E -> 1, relu output (replicated per slot)
  numkit::DenseNet lambda_net_;  // 7 -> 1, sigmoid output

  struct BatchCache;
};

}  // namespace mecsim::baselines
