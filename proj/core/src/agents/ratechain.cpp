#include "mecsim/agents/ratechain.hpp"

#include <cmath>
#include <numbers>

namespace mecsim::agents {

RateChainCache rate_chain_forward(const env::SimConfig& cfg, const env::Vec3& u_prev,
                                  const env::Vec3& q, double task_bits, int n_active, double v,
                                  double eta, double beta, double f) {
  RateChainCache c;
  c.v = v;
  c.eta = eta;
  c.beta = beta;
  c.f = f;
  c.task_bits = task_bits;
  c.n_active = n_active;
  c.u_prev = u_prev;
  c.q = q;

  env::UavState before;
  before.pos = u_prev;
  const env::UavState moved = env::step_uav(before, v, eta, beta, cfg);
  c.u = moved.pos;
  const double sb = std::sin(beta);
  c.clamped[0] = moved.pos.x != u_prev.x + cfg.tau * v * sb * std::cos(eta);
  c.clamped[1] = moved.pos.y != u_prev.y + cfg.tau * v * sb * std::sin(eta);
  c.clamped[2] = moved.pos.z != u_prev.z + cfg.tau * v * std::cos(beta);

  env::IdState id;
  id.pos = q;
  c.gain = env::channel_gain(moved, id, cfg);
  const env::RatePair r = env::rates(c.gain, cfg, n_active);
  c.rate_up = r.up;
  c.rate_down = r.down;

  c.dx = c.u.x - q.x;
  c.dy = c.u.y - q.y;
  c.dz = c.u.z - q.z;
  c.dh = std::hypot(c.dx, c.dy);
  c.dist = std::sqrt(c.dx * c.dx + c.dy * c.dy + c.dz * c.dz);
  const double nu_deg = std::atan2(c.dz, c.dh) * (180.0 / std::numbers::pi);
  c.p_los = 1.0 / (1.0 + cfg.k1 * std::exp(-cfg.k2 * (nu_deg - cfg.k1)));
  c.mix = c.p_los * cfg.chi_los + (1.0 - c.p_los) * cfg.chi_nlos;
  const double bn0 = cfg.bandwidth * cfg.noise_w;
  c.snr_up = n_active * cfg.p_up * c.gain / bn0;
  c.snr_down = n_active * cfg.p_down * c.gain / bn0;

  c.cap = env::lambda_max(task_bits, c.rate_up, c.rate_down, f, cfg);
  c.cap_guarded = !(c.rate_up > 0.0 && c.rate_down > 0.0 && f > 0.0);
  if (!c.cap_guarded) {
    c.per_bit = 1.0 / c.rate_up + cfg.out_ratio / c.rate_down + cfg.cycles_per_bit / f;
    c.cap_at_one = c.cap >= 1.0;
  }
  return c;
}

RateChainGrad rate_chain_backward(const env::SimConfig& cfg, const RateChainCache& c,
                                  double d_rate_up, double d_rate_down, double d_cap) {
  RateChainGrad g;
  double dru = d_rate_up;
  double drd = d_rate_down;

  // lambda_max = min{1, K / D}, K = tau*T/I, D = 1/R_u + delta/R_d + C/f.
  if (d_cap != 0.0 && !c.cap_guarded && !c.cap_at_one) {
    const double k = cfg.tau * static_cast<double>(cfg.slots) / c.task_bits;
    const double d2 = c.per_bit * c.per_bit;
    dru += d_cap * k / (d2 * c.rate_up * c.rate_up);
    drd += d_cap * k * cfg.out_ratio / (d2 * c.rate_down * c.rate_down);
    g.df = d_cap * k * cfg.cycles_per_bit / (d2 * c.f * c.f);
  }
  if (dru == 0.0 && drd == 0.0) return g;

  // R = (B/N) log2(1 + snr), snr = N p gain / (B N0).
  const double n = static_cast<double>(c.n_active);
  const double bn0 = cfg.bandwidth * cfg.noise_w;
  const double ln2 = std::numbers::ln2;
  double dgain = 0.0;
  dgain += dru * (cfg.bandwidth / n) / (ln2 * (1.0 + c.snr_up)) * (n * cfg.p_up / bn0);
  dgain += drd * (cfg.bandwidth / n) / (ln2 * (1.0 + c.snr_down)) * (n * cfg.p_down / bn0);

  // gain = dist^-alpha / (rho0 mix).
  const double ddist = dgain * (-cfg.pathloss_exp * c.gain / c.dist);
  const double dmix = dgain * (-c.gain / c.mix);

  // mix = P chi_los + (1-P) chi_nlos; dP/dnu = K2 P (1 - P) [per degree].
  const double dp = dmix * (cfg.chi_los - cfg.chi_nlos);
  const double dnu = dp * cfg.k2 * c.p_los * (1.0 - c.p_los);

  // nu = (180/pi) atan2(dz, dh).
  const double r2 = c.dh * c.dh + c.dz * c.dz;
  const double scale = 180.0 / std::numbers::pi;
  const double ddz_nu = dnu * scale * c.dh / r2;
  const double ddh_nu = -dnu * scale * c.dz / r2;

  // dist and dh back to the displacement components.
  double ddx = ddist * c.dx / c.dist;
  double ddy = ddist * c.dy / c.dist;
  double ddz = ddist * c.dz / c.dist + ddz_nu;
  if (c.dh > 0.0) {
    ddx += ddh_nu * c.dx / c.dh;
    ddy += ddh_nu * c.dy / c.dh;
  }

  // Moved server position back to the trajectory action; clamped
  // coordinates are frozen.
  const double sb = std::sin(c.beta), cb = std::cos(c.beta);
  const double se = std::sin(c.eta), ce = std::cos(c.eta);
  const double tv = cfg.tau * c.v;
  if (!c.clamped[0]) {
    g.dv += ddx * cfg.tau * sb * ce;
    g.deta += ddx * (-tv * sb * se);
    g.dbeta += ddx * tv * cb * ce;
  }
  if (!c.clamped[1]) {
    g.dv += ddy * cfg.tau * sb * se;
    g.deta += ddy * tv * sb * ce;
    g.dbeta += ddy * tv * cb * se;
  }
  if (!c.clamped[2]) {
    g.dv += ddz * cfg.tau * cb;
    g.dbeta += ddz * (-tv * sb);
  }
  return g;
}

}  // namespace mecsim::agents
