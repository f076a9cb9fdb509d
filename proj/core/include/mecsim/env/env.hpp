#pragma once

#include <vector>

#include "mecsim/action.hpp"
#include "mecsim/env/config.hpp"
#include "mecsim/numkit/rng.hpp"

namespace mecsim::env {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct IdState {
  Vec3 pos;  // z stays 0
  double speed = 0.0;
  double heading = 0.0;
  double mean_speed = 0.0;
  double mean_heading = 0.0;
  double task_bits = 0.0;  // I_j, fixed for the episode
  // Previous-slot quantities exposed through the observation.
  double prev_local_bits = 0.0;
  double prev_offload_bits = 0.0;
  double prev_rate_up = 0.0;
};

struct UavState {
  Vec3 pos;
};

/// Per-slot accounting. Vectors are padded to n_max; inactive slots are zero.
struct StepOutcome {
  std::vector<double> e_local;     // [J]
  std::vector<double> e_offload;   // [J]
  std::vector<double> latency;     // [s]
  std::vector<double> rate_up;     // [bit/s]
  std::vector<double> rate_down;   // [bit/s]
  std::vector<double> lambda_eff;  // ratio actually executed
  int lambda_clamps = 0;           // offload ratios clamped to the true bound
  double reward = 0.0;             // -(sum of energies) [-J]
};

/// Uplink/downlink rates each device would see after the server moves with
/// the given trajectory action, before any offloading happens. This is what
/// a device can measure locally at the start of the slot.
struct RatePreview {
  Vec3 uav_pos;  // post-move, clamped
  std::vector<double> rate_up;    // padded to n_max
  std::vector<double> rate_down;  // padded to n_max
};

// --- Single-formula kernels -------------------------------------------------

/// Gauss-Markov speed/heading update followed by a position advance of
/// tau * v' * (cos o', sin o', 0). Position is clamped to the area box,
/// speed to >= 0. Consumes exactly two gaussians.
IdState step_id_mobility(const IdState& id, const SimConfig& cfg, numkit::Rng& rng);

/// u' = u + tau * v * (sin b cos e, sin b sin e, cos b), clamped to the box.
/// beta is the polar angle in [0, pi], eta the azimuth in [0, 2*pi].
UavState step_uav(const UavState& uav, double v, double eta, double beta, const SimConfig& cfg);

/// P = 1 / (1 + K1 * exp(-K2 * (nu - K1))), elevation angle nu in degrees.
double los_probability(const UavState& uav, const IdState& id, const SimConfig& cfg);

/// h = d^-alpha / (rho0 * (P chi_los + (1 - P) chi_nlos)).
double channel_gain(const UavState& uav, const IdState& id, const SimConfig& cfg);

struct RatePair {
  double up = 0.0;
  double down = 0.0;
};

/// R = (B/N) log2(1 + N p h / (B N0)) for each direction; N = active count.
RatePair rates(double gain, const SimConfig& cfg, int n_active);

/// E_l = cap_coeff * (C (1 - lambda) I)^3 / (tau^2 T^3).
double local_energy(double lambda, double task_bits, const SimConfig& cfg);

/// E_o = p_up * lambda * I / (R_u * T).
double offload_energy(double lambda, double task_bits, double rate_up, const SimConfig& cfg);

/// L = lambda I / (R_u T) + C lambda I / (f T) + delta lambda I / (R_d T);
/// zero when lambda == 0 regardless of f.
double offload_latency(double lambda, double task_bits, double rate_up, double rate_down,
                       double f, const SimConfig& cfg);

/// min{1, (tau T / I) / (1/R_u + delta/R_d + C/f)}; 0 if any of R_u, R_d, f
/// is zero.
double lambda_max(double task_bits, double rate_up, double rate_down, double f,
                  const SimConfig& cfg);

// --- Environment -------------------------------------------------------------

/// Time-slotted single-server MEC world. One Env is confined to one logical
/// execution stream; run independent copies with independent Rng streams for
/// parallel experiments.
class Env {
 public:
  explicit Env(SimConfig cfg);

  const SimConfig& cfg() const { return cfg_; }

  /// Draws a fresh deployment: server position, then per device (active or
  /// not) position, task size, mean speed and mean heading, in index order.
  /// Previous-slot fields start at the documented defaults (lambda = 0,
  /// rate = 0).
  void reset(numkit::Rng& rng, const std::vector<std::uint8_t>& active);

  /// Activates/deactivates devices mid-run. Newly activated devices get a
  /// fresh task and default previous-slot fields.
  void set_active(const std::vector<std::uint8_t>& active, numkit::Rng& rng);

  const std::vector<std::uint8_t>& active() const { return active_; }
  int active_count() const;
  int slot() const { return slot_; }
  const UavState& uav() const { return uav_; }
  const IdState& id(int j) const { return ids_[j]; }

  /// Normalized observations: positions / area_side, bits / task_max,
  /// rates / bandwidth. UAV observation is 3 wide, device observations 7.
  std::vector<double> uav_observation() const;
  std::vector<double> id_observation(int j) const;
  /// Concatenation [o_0 | o_1 | ... | o_n_max], inactive slots exactly zero.
  std::vector<double> state_vector() const;
  static int state_width(int n_max) { return 3 + 7 * n_max; }

  RatePreview rates_after_uav_move(double v, double eta, double beta) const;

  /// Advances one slot: server moves, rates realize at the new position,
  /// offloading executes, devices move last. Throws ConstraintError when the
  /// bundle violates a bound; with clamp_lambda the offload ratio is clamped
  /// to the true feasible bound instead and the clamp is counted.
  StepOutcome step(const ActionBundle& a, numkit::Rng& rng, bool clamp_lambda = false);

 private:
  SimConfig cfg_;
  UavState uav_;
  std::vector<IdState> ids_;
  std::vector<std::uint8_t> active_;
  int slot_ = 0;

  void init_id(int j, numkit::Rng& rng);
};

}  // namespace mecsim::env
