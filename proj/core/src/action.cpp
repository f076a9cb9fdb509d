#include "mecsim/action.hpp"

#include <numbers>

#include "mecsim/errors.hpp"

namespace mecsim {

void ActionBundle::resize(int n_max_, int msg_dim_, int feat_dim_) {
  n_max = n_max_;
  msg_dim = msg_dim_;
  feat_dim = feat_dim_;
  f.assign(n_max, 0.0);
  f_tilde.assign(n_max, 0.0);
  lambda.assign(n_max, 0.0);
  lambda_sig.assign(n_max, 0.0);
  lambda_cap.assign(n_max, 0.0);
  uplink.assign(static_cast<std::size_t>(n_max) * msg_dim, 0.0);
  downlink.assign(static_cast<std::size_t>(n_max) * feat_dim, 0.0);
  active.assign(n_max, 0);
}

int ActionBundle::active_count() const {
  int n = 0;
  for (auto a : active) n += a ? 1 : 0;
  return n;
}

int ActionBundle::packed_width(int n_max, int msg_dim, int feat_dim) {
  return 3 + n_max * (2 + msg_dim + feat_dim);
}

std::vector<double> ActionBundle::pack(double f_max, double v_max) const {
  if (static_cast<int>(f.size()) != n_max) throw ContractError("ActionBundle::pack: not sized");
  const int pm = pack_messages ? msg_dim : 0;
  const int pf = pack_messages ? feat_dim : 0;
  // The raw head outputs and the projected values satisfy
  // v = (raw0+1)/2 * v_max etc.; packing from the raws keeps the stored
  // vector bit-identical to the training-side assembly.
  (void)v_max;
  std::vector<double> out;
  out.reserve(packed_width(n_max, pm, pf));
  out.push_back((traj_raw[0] + 1.0) * 0.5);
  out.push_back((traj_raw[1] + 1.0) * 0.5);
  out.push_back((traj_raw[2] + 1.0) * 0.5);
  for (int j = 0; j < n_max; ++j) out.push_back(active[j] ? f[j] / f_max : 0.0);
  for (int j = 0; j < n_max; ++j) out.push_back(active[j] ? lambda[j] : 0.0);
  if (pm > 0) out.insert(out.end(), uplink.begin(), uplink.end());
  if (pf > 0) out.insert(out.end(), downlink.begin(), downlink.end());
  return out;
}

}  // namespace mecsim
