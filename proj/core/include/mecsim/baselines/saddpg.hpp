#pragma once

#include "mecsim/agents/arch.hpp"
#include "mecsim/agents/policy.hpp"
#include "mecsim/numkit/net.hpp"

namespace mecsim::baselines {

/// Centralized single-agent baseline: one trunk maps the full state to every
/// solution action. Deliberately non-scalable: the input width is tied to
/// the device count it was built for, so it must be trained per N.
class SaddpgActor final : public agents::TrainablePolicy {
 public:
  SaddpgActor(const env::SimConfig& sim, agents::ActorArch arch, numkit::Rng& rng);

  std::string kind() const override { return "saddpg"; }
  int n_max() const override { return sim_.n_max; }
  int n_fixed() const { return sim_.n_max; }
  int input_width() const { return state_width(); }

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
  numkit::DenseNet trunk_;  // (3 + 7N) -> (3 + 2N), identity output

  struct BatchCache;
};

}  // namespace mecsim::baselines
