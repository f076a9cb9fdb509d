#include "mecsim/numkit/activation.hpp"

#include "mecsim/errors.hpp"

namespace mecsim::numkit {

Act act_from_string(const std::string& s) {
  if (s == "identity") return Act::identity;
  if (s == "relu") return Act::relu;
  if (s == "tanh") return Act::tanh;
  if (s == "sigmoid") return Act::sigmoid;
  if (s == "leaky_relu" || s == "leaky-relu") return Act::leaky_relu;
  throw ConfigError("unknown activation: " + s);
}

std::string act_to_string(Act a) {
  switch (a) {
    case Act::identity: return "identity";
    case Act::relu: return "relu";
    case Act::tanh: return "tanh";
    case Act::sigmoid: return "sigmoid";
    case Act::leaky_relu: return "leaky_relu";
  }
  return "identity";
}

}  // namespace mecsim::numkit
