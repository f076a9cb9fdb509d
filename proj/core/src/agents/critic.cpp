#include "mecsim/agents/critic.hpp"

#include "mecsim/errors.hpp"

namespace mecsim::agents {

Critic::Critic(int state_width, int action_width, const ActorArch& arch, numkit::Rng& rng)
    : state_width_(state_width),
      action_width_(action_width),
      net_("critic", state_width + action_width, arch.critic_hidden, 1, arch.hidden_act,
           numkit::Act::identity, rng) {}

double Critic::value(std::span<const double> state, std::span<const double> action) const {
  if (static_cast<int>(state.size()) != state_width_ ||
      static_cast<int>(action.size()) != action_width_) {
    throw ContractError("Critic::value: state/action width mismatch");
  }
  std::vector<double> in;
  in.reserve(state.size() + action.size());
  in.insert(in.end(), state.begin(), state.end());
  in.insert(in.end(), action.begin(), action.end());
  return net_.forward1(in)[0];
}

}  // namespace mecsim::agents
