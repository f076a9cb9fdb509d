#pragma once

#include <cstdint>
#include <string>

#include "mecsim/agents/arch.hpp"
#include "mecsim/numkit/params.hpp"

namespace mecsim::agents {

/// Provenance and architecture carried inside a parameter file; loading
/// rejects files whose architecture does not match the requesting scheme.
struct CheckpointMeta {
  std::string scheme;  // cmaddpg | cmaddpg-gs | vanilla | saddpg
  ActorArch arch;
  int n_max = 0;
  int n_min = 0;
  std::uint64_t seed = 0;
  long episodes_trained = 0;
};

/// Flat binary format: magic, a JSON manifest (names and shapes in order),
/// then the raw 64-bit little-endian values.
void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const numkit::ParamSet& actor_params,
                     const numkit::ParamSet* critic_params = nullptr);

struct Checkpoint {
  CheckpointMeta meta;
  numkit::ParamSet actor_params;
  numkit::ParamSet critic_params;
  bool has_critic = false;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace mecsim::agents
