#pragma once

// Internal section parsers shared between the config loaders and the
// experiment harness. Each takes an already-parsed JSON section object.

#include "json_io.hpp"
#include "mecsim/env/config.hpp"

namespace mecsim::env {
SimConfig sim_config_from_json(const internal::Json& j);
}

namespace mecsim::agents {
struct ActorArch;
ActorArch actor_arch_from_json(const mecsim::internal::Json& j);
}

namespace mecsim::train {
struct TrainConfig;
TrainConfig train_config_from_json(const mecsim::internal::Json& j);
}
