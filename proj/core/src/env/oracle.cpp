#include "mecsim/env/oracle.hpp"

#include <cmath>

namespace mecsim::oracle {

namespace {
const double PI = 3.14159265358979323846;
double clampd(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }
}  // namespace

double los_probability(double uav_x, double uav_y, double uav_z, double id_x, double id_y,
                       const env::SimConfig& cfg) {
  double dx = uav_x - id_x, dy = uav_y - id_y;
  double dh = std::sqrt(dx * dx + dy * dy);
  double nu = std::atan2(uav_z, dh) * 180.0 / PI;
  return 1.0 / (1.0 + cfg.k1 * std::exp(-cfg.k2 * (nu - cfg.k1)));
}

double channel_gain(double uav_x, double uav_y, double uav_z, double id_x, double id_y,
                    const env::SimConfig& cfg) {
  double dx = uav_x - id_x, dy = uav_y - id_y, dz = uav_z;
  double d = std::sqrt(dx * dx + dy * dy + dz * dz);
  double p = los_probability(uav_x, uav_y, uav_z, id_x, id_y, cfg);
  return std::pow(d, -cfg.pathloss_exp) /
         (cfg.rho0 * (p * cfg.chi_los + (1.0 - p) * cfg.chi_nlos));
}

double rate_up(double gain, const env::SimConfig& cfg, int n_active) {
  double n = n_active;
  return cfg.bandwidth / n *
         std::log2(1.0 + n * cfg.p_up * gain / (cfg.bandwidth * cfg.noise_w));
}

double rate_down(double gain, const env::SimConfig& cfg, int n_active) {
  double n = n_active;
  return cfg.bandwidth / n *
         std::log2(1.0 + n * cfg.p_down * gain / (cfg.bandwidth * cfg.noise_w));
}

double local_energy(double lambda, double task_bits, const env::SimConfig& cfg) {
  double c = cfg.cycles_per_bit * (1.0 - lambda) * task_bits;
  double T = cfg.slots;
  return cfg.cap_coeff * c * c * c / (cfg.tau * cfg.tau * T * T * T);
}

double offload_energy(double lambda, double task_bits, double r_up, const env::SimConfig& cfg) {
  if (lambda == 0.0) return 0.0;
  return cfg.p_up * lambda * task_bits / (r_up * cfg.slots);
}

double offload_latency(double lambda, double task_bits, double r_up, double r_down, double f,
                       const env::SimConfig& cfg) {
  if (lambda == 0.0) return 0.0;
  double T = cfg.slots;
  return lambda * task_bits / (r_up * T) +
         cfg.cycles_per_bit * lambda * task_bits / (f * T) +
         cfg.out_ratio * lambda * task_bits / (r_down * T);
}

double lambda_max(double task_bits, double r_up, double r_down, double f,
                  const env::SimConfig& cfg) {
  if (r_up <= 0.0 || r_down <= 0.0 || f <= 0.0) return 0.0;
  double bound = (cfg.tau * cfg.slots / task_bits) /
                 (1.0 / r_up + cfg.out_ratio / r_down + cfg.cycles_per_bit / f);
  return bound < 1.0 ? bound : 1.0;
}

StepCheck recompute_step(const env::SimConfig& cfg, const env::UavState& uav_before,
                         const std::vector<env::IdState>& ids_before,
                         const std::vector<std::uint8_t>& active, const ActionBundle& a,
                         numkit::Rng rng) {
  StepCheck out;
  const int n_max = cfg.n_max;
  int n = 0;
  for (auto m : active) n += m ? 1 : 0;

  // Server move.
  double ux = uav_before.pos.x + cfg.tau * a.v * std::sin(a.beta) * std::cos(a.eta);
  double uy = uav_before.pos.y + cfg.tau * a.v * std::sin(a.beta) * std::sin(a.eta);
  double uz = uav_before.pos.z + cfg.tau * a.v * std::cos(a.beta);
  ux = clampd(ux, 0.0, cfg.area_side);
  uy = clampd(uy, 0.0, cfg.area_side);
  uz = clampd(uz, cfg.alt_min, cfg.alt_max);
  out.uav_after = {ux, uy, uz};

  out.e_local.assign(n_max, 0.0);
  out.e_offload.assign(n_max, 0.0);
  out.latency.assign(n_max, 0.0);
  out.rate_up.assign(n_max, 0.0);
  out.rate_down.assign(n_max, 0.0);
  double energy = 0.0;
  for (int j = 0; j < n_max; ++j) {
    if (!active[j]) continue;
    const env::IdState& id = ids_before[j];
    double g = (channel_gain)(ux, uy, uz, id.pos.x, id.pos.y, cfg);
    double ru = (rate_up)(g, cfg, n);
    double rd = (rate_down)(g, cfg, n);
    double cap = (lambda_max)(id.task_bits, ru, rd, a.f[j], cfg);
    double lam = a.lambda[j] > cap ? cap : a.lambda[j];
    out.rate_up[j] = ru;
    out.rate_down[j] = rd;
    out.e_local[j] = (local_energy)(lam, id.task_bits, cfg);
    out.e_offload[j] = (offload_energy)(lam, id.task_bits, ru, cfg);
    out.latency[j] = (offload_latency)(lam, id.task_bits, ru, rd, a.f[j], cfg);
    energy += out.e_local[j] + out.e_offload[j];
  }
  out.reward = -energy;

  // Device moves, same draw order as the environment: two gaussians per
  // device in index order, active or not.
  out.id_after.resize(n_max);
  for (int j = 0; j < n_max; ++j) {
    const env::IdState& id = ids_before[j];
    double phi_v = rng.gaussian(0.0, cfg.sigma_speed * cfg.sigma_speed);
    double phi_o = rng.gaussian(0.0, cfg.sigma_heading * cfg.sigma_heading);
    double v = cfg.mem_speed * id.speed + (1.0 - cfg.mem_speed) * id.mean_speed +
               std::sqrt(1.0 - cfg.mem_speed * cfg.mem_speed) * phi_v;
    double o = cfg.mem_heading * id.heading + (1.0 - cfg.mem_heading) * id.mean_heading +
               std::sqrt(1.0 - cfg.mem_heading * cfg.mem_heading) * phi_o;
    if (v < 0.0) v = 0.0;
    out.id_after[j].x = clampd(id.pos.x + cfg.tau * v * std::cos(o), 0.0, cfg.area_side);
    out.id_after[j].y = clampd(id.pos.y + cfg.tau * v * std::sin(o), 0.0, cfg.area_side);
    out.id_after[j].z = 0.0;
  }
  return out;
}

double rel_dev(double a, double b, double floor) {
  double denom = std::max(std::max(std::fabs(a), std::fabs(b)), floor);
  return std::fabs(a - b) / denom;
}

}  // namespace mecsim::oracle
