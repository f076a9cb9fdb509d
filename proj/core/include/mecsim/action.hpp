#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace mecsim {

/// Joint action of one slot: the server trajectory and CPU split, per-device
/// offload ratios, and (for message-passing schemes) the exchanged message
/// payloads. All per-device vectors are padded to n_max with zeros in
/// inactive slots. Raw pre-projection head outputs ride along so exploration
/// noise can be injected before the projections are re-applied.
struct ActionBundle {
  int n_max = 0;
  int msg_dim = 0;   // uplink message width (0 when the scheme has none)
  int feat_dim = 0;  // downlink message width per device
  /// Message segments enter the packed critic vector only when set (the
  /// payloads themselves are always carried for the plant and inspection).
  bool pack_messages = true;

  // Trajectory, projected into the feasible box.
  double v = 0.0;
  double eta = 0.0;
  double beta = 0.0;
  std::array<double, 3> traj_raw{};  // tanh outputs in (-1, 1)

  std::vector<double> f;            // [cycles/s], sums to f_max over active
  std::vector<double> f_tilde;      // nonnegative pre-normalization outputs
  std::vector<double> lambda;       // offload ratios in [0, lambda_cap]
  std::vector<double> lambda_sig;   // sigmoid outputs in (0, 1)
  std::vector<double> lambda_cap;   // feasible upper bound used at decision time
  std::vector<double> uplink;       // n_max x msg_dim, row-major
  std::vector<double> downlink;     // n_max x feat_dim, row-major

  std::vector<std::uint8_t> active;

  void resize(int n_max_, int msg_dim_, int feat_dim_);
  int active_count() const;

  /// Width of the padded action vector fed to a critic:
  /// 3 + n_max * (2 + msg_dim + feat_dim).
  static int packed_width(int n_max, int msg_dim, int feat_dim);
  /// Packs [v, eta, beta normalized to [0,1]] + [f / f_max] + [lambda] +
  /// uplink + downlink. Inactive slots stay exactly zero.
  std::vector<double> pack(double f_max, double v_max) const;
};

}  // namespace mecsim
