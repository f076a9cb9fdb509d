#pragma once

#include <cstdint>

namespace mecsim::harness {

/// Analytic-vs-central-difference gradient verification: a batch of random
/// small dense nets, then the full actor-through-critic path on a reduced
/// configuration.
struct GradCheckReport {
  double max_rel_small = 0.0;
  double max_rel_e2e = 0.0;
  double seconds = 0.0;
  int nets_checked = 0;
  std::size_t e2e_params = 0;
  bool pass() const { return max_rel_small < 1e-4 && max_rel_e2e < 1e-3; }
};

GradCheckReport run_gradcheck(std::uint64_t seed = 20240001);

/// Random plant steps recomputed by the independent scalar transcription.
struct OracleReport {
  double max_rel_dev = 0.0;
  long steps = 0;
  bool pass() const { return max_rel_dev < 1e-12; }
};

OracleReport run_oracle_verify(long steps = 10000, std::uint64_t seed = 7);

}  // namespace mecsim::harness
