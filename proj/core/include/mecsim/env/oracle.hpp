#pragma once

#include <vector>

#include "mecsim/action.hpp"
#include "mecsim/env/config.hpp"
#include "mecsim/env/env.hpp"
#include "mecsim/numkit/rng.hpp"

namespace mecsim::oracle {

// Independent scalar transcription of the plant equations, kept free of any
// code shared with env::. Used as the reference side of equivalence checks;
// keep it dumb and direct.

double los_probability(double uav_x, double uav_y, double uav_z, double id_x, double id_y,
                       const env::SimConfig& cfg);
double channel_gain(double uav_x, double uav_y, double uav_z, double id_x, double id_y,
                    const env::SimConfig& cfg);
double rate_up(double gain, const env::SimConfig& cfg, int n_active);
double rate_down(double gain, const env::SimConfig& cfg, int n_active);
double local_energy(double lambda, double task_bits, const env::SimConfig& cfg);
double offload_energy(double lambda, double task_bits, double r_up, const env::SimConfig& cfg);
double offload_latency(double lambda, double task_bits, double r_up, double r_down, double f,
                       const env::SimConfig& cfg);
double lambda_max(double task_bits, double r_up, double r_down, double f,
                  const env::SimConfig& cfg);

struct StepCheck {
  std::vector<double> e_local;
  std::vector<double> e_offload;
  std::vector<double> latency;
  std::vector<double> rate_up;
  std::vector<double> rate_down;
  double reward = 0.0;
  env::Vec3 uav_after;
  std::vector<env::Vec3> id_after;
};

/// Recomputes one full slot from the pre-step snapshot with its own copy of
/// the generator stream (same seed and counter as the environment consumed).
StepCheck recompute_step(const env::SimConfig& cfg, const env::UavState& uav_before,
                         const std::vector<env::IdState>& ids_before,
                         const std::vector<std::uint8_t>& active, const ActionBundle& a,
                         numkit::Rng rng);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
double rel_dev(double a, double b, double floor = 1e-30);

}  // namespace mecsim::oracle
