#include "mecsim/baselines/naive.hpp"

#include <cmath>
#include <numbers>

#include "mecsim/errors.hpp"

namespace mecsim::baselines {

namespace {
constexpr double kPi = std::numbers::pi;
}

ActionBundle NaivePolicy::act(const env::Env& e) const {
  const auto& cfg = e.cfg();
  const int n = e.active_count();
  if (n < 1) throw ContractError("naive: need at least one active device");

  double cx = 0.0, cy = 0.0;
  for (int j = 0; j < cfg.n_max; ++j) {
    if (!e.active()[j]) continue;
    cx += e.id(j).pos.x;
    cy += e.id(j).pos.y;
  }
  cx /= n;
  cy /= n;
  const double cz = 0.5 * (cfg.alt_min + cfg.alt_max);

  const auto& u = e.uav().pos;
  const double dx = cx - u.x, dy = cy - u.y, dz = cz - u.z;
  const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);

  ActionBundle a;
  a.resize(cfg.n_max, 0, 0);
  a.active = e.active();
  if (dist < 1e-12) {
    a.v = 0.0;
    a.eta = 0.0;
    a.beta = kPi / 2.0;
  } else {
    a.v = std::min(cfg.v_max, dist / cfg.tau);
    a.eta = std::atan2(dy, dx);
    if (a.eta < 0.0) a.eta += 2.0 * kPi;
    a.beta = std::acos(std::clamp(dz / dist, -1.0, 1.0));
  }
  a.traj_raw = {2.0 * a.v / cfg.v_max - 1.0, a.eta / kPi - 1.0, 2.0 * a.beta / kPi - 1.0};

  for (int j = 0; j < cfg.n_max; ++j) {
    if (!e.active()[j]) continue;
    a.f[j] = cfg.f_max / n;
    a.f_tilde[j] = 1.0;
  }
  const env::RatePreview preview = e.rates_after_uav_move(a.v, a.eta, a.beta);
  for (int j = 0; j < cfg.n_max; ++j) {
    if (!e.active()[j]) continue;
    a.lambda_cap[j] = env::lambda_max(e.id(j).task_bits, preview.rate_up[j],
                                      preview.rate_down[j], a.f[j], cfg);
    a.lambda_sig[j] = 1.0;
    a.lambda[j] = a.lambda_cap[j];
  }
  return a;
}

}  // namespace mecsim::baselines
