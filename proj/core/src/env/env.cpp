#include "mecsim/env/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mecsim/errors.hpp"

namespace mecsim::env {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLatencySlack = 1e-9;

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

double horizontal_dist(const Vec3& a, const Vec3& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

double dist3(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                   (a.z - b.z) * (a.z - b.z));
}

}  // namespace

IdState step_id_mobility(const IdState& id, const SimConfig& cfg, numkit::Rng& rng) {
  IdState out = id;
  const double phi_v = rng.gaussian(0.0, cfg.sigma_speed * cfg.sigma_speed);
  const double phi_o = rng.gaussian(0.0, cfg.sigma_heading * cfg.sigma_heading);
  const double kv = cfg.mem_speed, ko = cfg.mem_heading;
  double v = kv * id.speed + (1.0 - kv) * id.mean_speed + std::sqrt(1.0 - kv * kv) * phi_v;
  double o = ko * id.heading + (1.0 - ko) * id.mean_heading + std::sqrt(1.0 - ko * ko) * phi_o;
  v = std::max(v, 0.0);
  out.speed = v;
  out.heading = o;
  out.pos.x = clamp(id.pos.x + cfg.tau * v * std::cos(o), 0.0, cfg.area_side);
  out.pos.y = clamp(id.pos.y + cfg.tau * v * std::sin(o), 0.0, cfg.area_side);
  out.pos.z = 0.0;
  return out;
}

UavState step_uav(const UavState& uav, double v, double eta, double beta, const SimConfig& cfg) {
  if (!(v >= 0.0 && v <= cfg.v_max + 1e-9)) {
    throw ContractError("step_uav: v outside [0, v_max]");
  }
  if (!(eta >= 0.0 && eta <= 2.0 * kPi + 1e-9)) {
    throw ContractError("step_uav: eta outside [0, 2*pi]");
  }
  if (!(beta >= 0.0 && beta <= kPi + 1e-9)) {
    throw ContractError("step_uav: beta outside [0, pi]");
  }
  UavState out;
  const double sb = std::sin(beta);
  out.pos.x = clamp(uav.pos.x + cfg.tau * v * sb * std::cos(eta), 0.0, cfg.area_side);
  out.pos.y = clamp(uav.pos.y + cfg.tau * v * sb * std::sin(eta), 0.0, cfg.area_side);
  out.pos.z = clamp(uav.pos.z + cfg.tau * v * std::cos(beta), cfg.alt_min, cfg.alt_max);
  return out;
}

double los_probability(const UavState& uav, const IdState& id, const SimConfig& cfg) {
  const double dh = horizontal_dist(uav.pos, id.pos);
  const double dz = uav.pos.z - id.pos.z;
  if (dh == 0.0 && dz == 0.0) {
    throw ContractError("los_probability: UAV and device are co-located");
  }
  const double nu_deg = std::atan2(dz, dh) * (180.0 / kPi);
  return 1.0 / (1.0 + cfg.k1 * std::exp(-cfg.k2 * (nu_deg - cfg.k1)));
}

double channel_gain(const UavState& uav, const IdState& id, const SimConfig& cfg) {
  const double d = dist3(uav.pos, id.pos);
  if (d <= 0.0) throw ContractError("channel_gain: zero distance");
  const double p_los = los_probability(uav, id, cfg);
  const double mix = p_los * cfg.chi_los + (1.0 - p_los) * cfg.chi_nlos;
  return std::pow(d, -cfg.pathloss_exp) / (cfg.rho0 * mix);
}

RatePair rates(double gain, const SimConfig& cfg, int n_active) {
  if (!(gain > 0.0) || n_active < 1) throw ContractError("rates: need gain > 0 and N >= 1");
  const double n = static_cast<double>(n_active);
  const double share = cfg.bandwidth / n;
  const double denom = cfg.bandwidth * cfg.noise_w;
  RatePair r;
  r.up = share * std::log2(1.0 + n * cfg.p_up * gain / denom);
  r.down = share * std::log2(1.0 + n * cfg.p_down * gain / denom);
  return r;
}

double local_energy(double lambda, double task_bits, const SimConfig& cfg) {
  const double bits = cfg.cycles_per_bit * (1.0 - lambda) * task_bits;
  const double t = static_cast<double>(cfg.slots);
  return cfg.cap_coeff * bits * bits * bits / (cfg.tau * cfg.tau * t * t * t);
}

double offload_energy(double lambda, double task_bits, double rate_up, const SimConfig& cfg) {
  if (lambda == 0.0) return 0.0;
  if (!(rate_up > 0.0)) throw ContractError("offload_energy: R_u = 0 with lambda > 0");
  return cfg.p_up * lambda * task_bits / (rate_up * static_cast<double>(cfg.slots));
}

double offload_latency(double lambda, double task_bits, double rate_up, double rate_down,
                       double f, const SimConfig& cfg) {
  if (lambda == 0.0) return 0.0;
  if (!(f > 0.0)) throw ContractError("offload_latency: f = 0 with lambda > 0");
  const double t = static_cast<double>(cfg.slots);
  const double li = lambda * task_bits;
  return li / (rate_up * t) + cfg.cycles_per_bit * li / (f * t) +
         cfg.out_ratio * li / (rate_down * t);
}

double lambda_max(double task_bits, double rate_up, double rate_down, double f,
                  const SimConfig& cfg) {
  if (rate_up <= 0.0 || rate_down <= 0.0 || f <= 0.0) return 0.0;
  const double budget = cfg.tau * static_cast<double>(cfg.slots) / task_bits;
  const double per_bit =
      1.0 / rate_up + cfg.out_ratio / rate_down + cfg.cycles_per_bit / f;
  return std::min(1.0, budget / per_bit);
}

Env::Env(SimConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  ids_.resize(cfg_.n_max);
  active_.assign(cfg_.n_max, 0);
}

void Env::init_id(int j, numkit::Rng& rng) {
  IdState& id = ids_[j];
  id.pos = {rng.uniform(0.0, cfg_.area_side), rng.uniform(0.0, cfg_.area_side), 0.0};
  id.task_bits = rng.uniform(cfg_.task_min, cfg_.task_max);
  id.mean_speed = rng.uniform(0.0, cfg_.mean_speed_max);
  id.mean_heading = rng.uniform(0.0, 2.0 * kPi);
  id.speed = id.mean_speed;
  id.heading = id.mean_heading;
  // Slot-1 defaults: previous split with lambda = 0, no previous rate.
  id.prev_local_bits = id.task_bits / cfg_.slots;
  id.prev_offload_bits = 0.0;
  id.prev_rate_up = 0.0;
}

void Env::reset(numkit::Rng& rng, const std::vector<std::uint8_t>& active) {
  if (static_cast<int>(active.size()) != cfg_.n_max) {
    throw ContractError("Env::reset: active mask must be n_max long");
  }
  uav_.pos = {rng.uniform(0.0, cfg_.area_side), rng.uniform(0.0, cfg_.area_side),
              rng.uniform(cfg_.alt_min, cfg_.alt_max)};
  for (int j = 0; j < cfg_.n_max; ++j) init_id(j, rng);
  active_ = active;
  if (active_count() < 1) throw ContractError("Env::reset: need at least one active device");
  slot_ = 0;
}

void Env::set_active(const std::vector<std::uint8_t>& active, numkit::Rng& rng) {
  if (static_cast<int>(active.size()) != cfg_.n_max) {
    throw ContractError("Env::set_active: active mask must be n_max long");
  }
  for (int j = 0; j < cfg_.n_max; ++j) {
    if (active[j] && !active_[j]) init_id(j, rng);
  }
  active_ = active;
  if (active_count() < 1) throw ContractError("Env::set_active: need at least one active device");
}

int Env::active_count() const {
  int n = 0;
  for (auto a : active_) n += a ? 1 : 0;
  return n;
}

std::vector<double> Env::uav_observation() const {
  const double inv = 1.0 / cfg_.area_side;
  return {uav_.pos.x * inv, uav_.pos.y * inv, uav_.pos.z * inv};
}

std::vector<double> Env::id_observation(int j) const {
  const IdState& id = ids_[j];
  const double inv_pos = 1.0 / cfg_.area_side;
  const double inv_bits = 1.0 / cfg_.task_max;
  const double inv_rate = 1.0 / cfg_.bandwidth;
  return {id.pos.x * inv_pos,           id.pos.y * inv_pos,
          id.pos.z * inv_pos,           id.prev_local_bits * inv_bits,
          id.prev_offload_bits * inv_bits, id.task_bits * inv_bits,
          id.prev_rate_up * inv_rate};
}

std::vector<double> Env::state_vector() const {
  std::vector<double> s;
  s.reserve(state_width(cfg_.n_max));
  const auto o0 = uav_observation();
  s.insert(s.end(), o0.begin(), o0.end());
  for (int j = 0; j < cfg_.n_max; ++j) {
    if (active_[j]) {
      const auto oj = id_observation(j);
      s.insert(s.end(), oj.begin(), oj.end());
    } else {
      s.insert(s.end(), 7, 0.0);
    }
  }
  return s;
}

RatePreview Env::rates_after_uav_move(double v, double eta, double beta) const {
  RatePreview out;
  const UavState moved = step_uav(uav_, v, eta, beta, cfg_);
  out.uav_pos = moved.pos;
  out.rate_up.assign(cfg_.n_max, 0.0);
  out.rate_down.assign(cfg_.n_max, 0.0);
  const int n = active_count();
  for (int j = 0; j < cfg_.n_max; ++j) {
    if (!active_[j]) continue;
    const double h = channel_gain(moved, ids_[j], cfg_);
    const RatePair r = rates(h, cfg_, n);
    out.rate_up[j] = r.up;
    out.rate_down[j] = r.down;
  }
  return out;
}

StepOutcome Env::step(const ActionBundle& a, numkit::Rng& rng, bool clamp_lambda) {
  if (a.n_max != cfg_.n_max) throw ContractError("Env::step: bundle n_max mismatch");
  if (a.active != active_) throw ContractError("Env::step: bundle active mask mismatch");
  const int n = active_count();

  // Bound checks, named after the violated constraint.
  if (!(a.v >= 0.0 && a.v <= cfg_.v_max * (1.0 + 1e-9))) {
    throw ConstraintError("trajectory speed v outside [0, v_max]");
  }
  if (!(a.eta >= 0.0 && a.eta <= 2.0 * kPi * (1.0 + 1e-9))) {
    throw ConstraintError("trajectory azimuth eta outside [0, 2*pi]");
  }
  if (!(a.beta >= 0.0 && a.beta <= kPi * (1.0 + 1e-9))) {
    throw ConstraintError("trajectory polar angle beta outside [0, pi]");
  }
  double f_sum = 0.0;
  for (int j = 0; j < cfg_.n_max; ++j) {
    if (!active_[j]) {
      if (a.f[j] != 0.0 || a.lambda[j] != 0.0) {
        throw ConstraintError("inactive device slot " + std::to_string(j) + " not zero-masked");
      }
      continue;
    }
    if (a.f[j] < 0.0) throw ConstraintError("CPU frequency f < 0 for device " + std::to_string(j));
    if (a.lambda[j] < 0.0 || a.lambda[j] > 1.0) {
      throw ConstraintError("offload ratio lambda outside [0, 1] for device " + std::to_string(j));
    }
    f_sum += a.f[j];
  }
  if (f_sum > cfg_.f_max * (1.0 + 1e-6)) {
    throw ConstraintError("sum CPU frequency exceeds f_max");
  }

  // Server moves first; rates realize at the new position.
  uav_ = step_uav(uav_, a.v, a.eta, a.beta, cfg_);

  StepOutcome out;
  out.e_local.assign(cfg_.n_max, 0.0);
  out.e_offload.assign(cfg_.n_max, 0.0);
  out.latency.assign(cfg_.n_max, 0.0);
  out.rate_up.assign(cfg_.n_max, 0.0);
  out.rate_down.assign(cfg_.n_max, 0.0);
  out.lambda_eff.assign(cfg_.n_max, 0.0);

  double energy = 0.0;
  for (int j = 0; j < cfg_.n_max; ++j) {
    if (!active_[j]) continue;
    IdState& id = ids_[j];
    const double h = channel_gain(uav_, id, cfg_);
    const RatePair r = rates(h, cfg_, n);
    const double cap = lambda_max(id.task_bits, r.up, r.down, a.f[j], cfg_);
    double lam = a.lambda[j];
    if (lam > cap + kLatencySlack) {
      if (!clamp_lambda) {
        throw ConstraintError("offload ratio exceeds latency bound for device " +
                              std::to_string(j));
      }
      lam = cap;
      ++out.lambda_clamps;
    }
    const double el = local_energy(lam, id.task_bits, cfg_);
    const double eo = offload_energy(lam, id.task_bits, r.up, cfg_);
    const double lo = offload_latency(lam, id.task_bits, r.up, r.down, a.f[j], cfg_);
    if (lo > cfg_.tau + kLatencySlack) {
      throw ConstraintError("offload latency exceeds slot length for device " +
                            std::to_string(j));
    }
    out.e_local[j] = el;
    out.e_offload[j] = eo;
    out.latency[j] = lo;
    out.rate_up[j] = r.up;
    out.rate_down[j] = r.down;
    out.lambda_eff[j] = lam;
    energy += el + eo;

    id.prev_local_bits = (1.0 - lam) * id.task_bits / cfg_.slots;
    id.prev_offload_bits = lam * id.task_bits / cfg_.slots;
    id.prev_rate_up = r.up;
  }
  out.reward = -energy;

  // Devices move at the end of the slot; all of them, active or not, so the
  // per-slot draw count does not depend on the active set.
  for (int j = 0; j < cfg_.n_max; ++j) ids_[j] = step_id_mobility(ids_[j], cfg_, rng);

  ++slot_;
  return out;
}

}  // namespace mecsim::env
