#pragma once

#include "mecsim/agents/policy.hpp"

namespace mecsim::baselines {

/// Training-free heuristic: fly toward the centroid of the active devices at
/// the fastest feasible speed (altitude toward the middle of the allowed
/// band), split the CPU budget equally, offload at the feasible bound.
class NaivePolicy final : public agents::Policy {
 public:
  explicit NaivePolicy(const env::SimConfig& sim) : sim_(sim) {}

  std::string kind() const override { return "naive"; }
  ActionBundle act(const env::Env& e) const override;

 private:
  env::SimConfig sim_;
};

}  // namespace mecsim::baselines
