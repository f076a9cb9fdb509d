#pragma once

#include "mecsim/env/config.hpp"
#include "mecsim/env/env.hpp"

namespace mecsim::agents {

/// Differentiable path from the trajectory action and a device's CPU share
/// to the rates and the feasible offload bound:
///   (v, eta, beta) -> moved server -> geometry -> LoS -> gain -> rates,
///   (rates, f)     -> lambda_max.
/// Forward delegates to the env kernels so values match the plant bit for
/// bit; backward is the hand-derived chain.
struct RateChainCache {
  // Inputs.
  double v = 0, eta = 0, beta = 0, f = 0, task_bits = 0;
  int n_active = 1;
  env::Vec3 u_prev, q;
  // Post-move server position and which coordinates the box clamp froze.
  env::Vec3 u;
  bool clamped[3] = {false, false, false};
  // Geometry and channel intermediates.
  double dx = 0, dy = 0, dz = 0, dh = 0, dist = 0;
  double p_los = 0, mix = 0, gain = 0;
  double snr_up = 0, snr_down = 0;
  double rate_up = 0, rate_down = 0;
  double per_bit = 0;  // 1/R_u + delta/R_d + C/f
  double cap = 0;
  bool cap_at_one = false;
  bool cap_guarded = false;  // f <= 0 branch
};

struct RateChainGrad {
  double dv = 0, deta = 0, dbeta = 0, df = 0;
};

RateChainCache rate_chain_forward(const env::SimConfig& cfg, const env::Vec3& u_prev,
                                  const env::Vec3& q, double task_bits, int n_active, double v,
                                  double eta, double beta, double f);

RateChainGrad rate_chain_backward(const env::SimConfig& cfg, const RateChainCache& c,
                                  double d_rate_up, double d_rate_down, double d_cap);

}  // namespace mecsim::agents
