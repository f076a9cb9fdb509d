#pragma once

#include <span>

#include "mecsim/agents/arch.hpp"
#include "mecsim/numkit/net.hpp"

namespace mecsim::agents {

/// Centralized Q(s, a): one dense net over the concatenated padded state and
/// action vectors. Used during training only.
class Critic {
 public:
  Critic(int state_width, int action_width, const ActorArch& arch, numkit::Rng& rng);

  int state_width() const { return state_width_; }
  int action_width() const { return action_width_; }

  double value(std::span<const double> state, std::span<const double> action) const;

  numkit::DenseNet& net() { return net_; }
  const numkit::DenseNet& net() const { return net_; }

  numkit::ParamSet params() const { return net_.param_set(); }
  void set_params(const numkit::ParamSet& ps) { net_.load_params(ps, 0); }

 private:
  int state_width_;
  int action_width_;
  numkit::DenseNet net_;
};

}  // namespace mecsim::agents
