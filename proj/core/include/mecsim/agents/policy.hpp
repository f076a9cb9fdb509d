#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mecsim/action.hpp"
#include "mecsim/env/env.hpp"
#include "mecsim/numkit/params.hpp"
#include "mecsim/numkit/tensor.hpp"

namespace mecsim::agents {

using MaskMat = std::vector<std::vector<std::uint8_t>>;

/// Exact per-device geometry the actor pipelines need to reproduce the
/// plant's rates: server position before the move, device positions and task
/// sizes. Built either from the environment (rollout) or by de-normalizing
/// stored states (training updates).
struct Geometry {
  std::vector<env::Vec3> u_prev;                 // per sample
  std::vector<std::vector<env::Vec3>> id_pos;    // per sample, n_max entries
  std::vector<std::vector<double>> task_bits;    // per sample, n_max entries
};

Geometry geometry_from_env(const env::Env& e);
Geometry geometry_from_states(const numkit::Tensor2& states, int n_max,
                              const env::SimConfig& cfg);

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string kind() const = 0;
  /// One full decision round for the current slot (message exchange included
  /// where the scheme has one).
  virtual ActionBundle act(const env::Env& e) const = 0;
  virtual bool trainable() const { return false; }
  /// Whether the plant should clamp infeasible offload ratios instead of
  /// rejecting them (schemes whose devices cannot know their true CPU share).
  virtual bool clamp_lambda_in_env() const { return false; }
};

/// A policy the DDPG machinery can differentiate through.
class TrainablePolicy : public Policy {
 public:
  struct Cache {
    virtual ~Cache() = default;
  };

  bool trainable() const override { return true; }

  virtual int n_max() const = 0;
  /// Message widths that enter the critic's action vector (0 if none).
  virtual int packed_msg_dim() const { return 0; }
  virtual int packed_feat_dim() const { return 0; }

  int state_width() const { return env::Env::state_width(n_max()); }
  int action_width() const {
    return ActionBundle::packed_width(n_max(), packed_msg_dim(), packed_feat_dim());
  }

  virtual std::unique_ptr<Cache> make_cache() const = 0;
  /// Batched action recomputation A(s; psi). states: batch x state_width,
  /// one mask row per sample. Fills actions (batch x action_width).
  virtual void forward_batch(const numkit::Tensor2& states, const MaskMat& masks,
                             const Geometry& geom, Cache& cache,
                             numkit::Tensor2& actions) const = 0;
  /// Accumulates d(objective)/d(params) into grads given d(objective)/d(actions).
  virtual void backward_batch(const Cache& cache, const numkit::Tensor2& d_actions,
                              numkit::ParamSet& grads) const = 0;

  virtual numkit::ParamSet params() const = 0;
  virtual void set_params(const numkit::ParamSet& ps) = 0;
  virtual std::unique_ptr<TrainablePolicy> clone() const = 0;
};

}  // namespace mecsim::agents
