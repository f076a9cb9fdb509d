#include "mecsim/agents/arch.hpp"

#include "../internal/json_io.hpp"

namespace mecsim::agents {

namespace {
const std::vector<std::string> kArchKeys = {
    "msg_dim",        "feat_dim",       "mu_id_hidden",  "eps_uav_hidden",
    "eps_id_hidden",  "gamma_v_hidden", "gamma_f_hidden", "pi_id_hidden",
    "critic_hidden",  "hidden_act",     "critic_sees_messages"};
}

ActorArch actor_arch_from_json(const internal::Json& j) {
  using internal::read_key;
  internal::check_known_keys(j, kArchKeys, "arch");
  ActorArch a;
  read_key(j, "msg_dim", a.msg_dim);
  read_key(j, "feat_dim", a.feat_dim);
  read_key(j, "mu_id_hidden", a.mu_id_hidden);
  read_key(j, "eps_uav_hidden", a.eps_uav_hidden);
  read_key(j, "eps_id_hidden", a.eps_id_hidden);
  read_key(j, "gamma_v_hidden", a.gamma_v_hidden);
  read_key(j, "gamma_f_hidden", a.gamma_f_hidden);
  read_key(j, "pi_id_hidden", a.pi_id_hidden);
  read_key(j, "critic_hidden", a.critic_hidden);
  std::string act = numkit::act_to_string(a.hidden_act);
  read_key(j, "hidden_act", act);
  a.hidden_act = numkit::act_from_string(act);
  read_key(j, "critic_sees_messages", a.critic_sees_messages);
  a.validate();
  return a;
}

ActorArch actor_arch_from_json_text(const std::string& text) {
  const auto j = internal::parse_json_text(text, "arch config");
  return actor_arch_from_json(j.contains("arch") ? j.at("arch") : j);
}

}  // namespace mecsim::agents
