#pragma once

#include <string>
#include <vector>

#include "mecsim/numkit/activation.hpp"

namespace mecsim::agents {

/// Network sizing for the actor group and the critic. Defaults follow the
/// full-scale profile; the desk profile overrides the hidden stacks with
/// smaller ones.
struct ActorArch {
  int msg_dim = 8;    // uplink message length M
  int feat_dim = 16;  // per-device downlink feature length E

  std::vector<int> mu_id_hidden{128, 128, 128};
  std::vector<int> eps_uav_hidden{128, 128, 128};
  std::vector<int> eps_id_hidden{128, 128, 128};
  // The pairwise attention scorer is fixed: one hidden layer of width
  // feat_dim with leaky-relu, scalar output.
  std::vector<int> gamma_v_hidden{128, 128, 128, 128};
  std::vector<int> gamma_f_hidden{128, 128, 128, 128};
  std::vector<int> pi_id_hidden{128, 128, 128, 128};
  std::vector<int> critic_hidden{512, 256, 128, 64};

  numkit::Act hidden_act = numkit::Act::relu;

  /// Whether message actions enter the critic's action vector.
  bool critic_sees_messages = true;

  void validate() const;
};

ActorArch actor_arch_from_json_text(const std::string& text);

}  // namespace mecsim::agents
