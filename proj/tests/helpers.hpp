#pragma once

// Shared helpers for the unit and acceptance suites.

#include <cmath>
#include <vector>

#include "mecsim/env/config.hpp"
#include "mecsim/numkit/net.hpp"
#include "mecsim/numkit/params.hpp"
#include "mecsim/numkit/rng.hpp"

namespace testkit {

using mecsim::numkit::DenseNet;
using mecsim::numkit::ParamSet;
using mecsim::numkit::Rng;
using mecsim::numkit::Tensor2;

/// Independent scalar forward pass reading the net's weights directly.
/// Intentionally plain loops; the reference side of forward checks.
inline std::vector<double> scalar_forward(const DenseNet& net, std::vector<double> x) {
  using mecsim::numkit::act_apply;
  for (int l = 0; l < net.layer_count(); ++l) {
    const Tensor2& w = net.weight(l);
    const Tensor2& b = net.bias(l);
    std::vector<double> y(w.cols(), 0.0);
    for (int j = 0; j < w.cols(); ++j) {
      double acc = 0.0;
      for (int i = 0; i < w.rows(); ++i) acc += x[i] * w(i, j);
      y[j] = act_apply(net.activation(l), acc + b(0, j));
    }
    x = std::move(y);
  }
  return x;
}

struct FdReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

/// Central finite differences of a scalar function of the parameters against
/// an analytic gradient, elementwise.
template <typename EvalFn>
FdReport fd_compare(ParamSet& params, const ParamSet& analytic, EvalFn&& eval, double h = 1e-5) {
  FdReport rep;
  auto flat = mecsim::numkit::flatten(params);
  const auto ga = mecsim::numkit::flatten(analytic);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double keep = flat[i];
    flat[i] = keep + h;
    mecsim::numkit::unflatten(flat, params);
    const double up = eval();
    flat[i] = keep - h;
    mecsim::numkit::unflatten(flat, params);
    const double dn = eval();
    flat[i] = keep;
    mecsim::numkit::unflatten(flat, params);
    const double gf = (up - dn) / (2.0 * h);
    const double denom = std::max({std::fabs(ga[i]), std::fabs(gf), 1e-6});
    rep.max_rel_err = std::max(rep.max_rel_err, std::fabs(ga[i] - gf) / denom);
    ++rep.checked;
  }
  return rep;
}

/// Moves every bias off the zero-init manifold. Freshly built nets have
/// exact-zero biases, which parks relu units downstream of dead messages
/// exactly on their kink; finite differences are only valid at generic
/// parameter points.
inline void jitter_biases(ParamSet& ps, Rng& rng, double scale = 0.1) {
  for (auto& e : ps.entries) {
    if (e.name.size() >= 2 && e.name.compare(e.name.size() - 2, 2, ".b") == 0) {
      for (std::size_t i = 0; i < e.value.size(); ++i) {
        e.value.data()[i] += rng.uniform(-scale, scale);
      }
    }
  }
}

/// Desk-scale plant parameters used across tests: same physics constants as
/// the full-scale profile, megabit tasks.
inline mecsim::env::SimConfig desk_sim(int n_min = 3, int n_max = 5) {
  mecsim::env::SimConfig cfg;
  cfg.n_min = n_min;
  cfg.n_max = n_max;
  cfg.task_min = 1e6;
  cfg.task_max = 1e7;
  return cfg;
}

inline std::vector<std::uint8_t> full_mask(int n_max) {
  return std::vector<std::uint8_t>(static_cast<std::size_t>(n_max), 1);
}

/// Random active mask with exactly n ones.
inline std::vector<std::uint8_t> random_mask(int n_max, int n, Rng& rng) {
  std::vector<int> idx(n_max);
  for (int i = 0; i < n_max; ++i) idx[i] = i;
  for (int i = n_max - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(0, i)]);
  std::vector<std::uint8_t> mask(n_max, 0);
  for (int i = 0; i < n; ++i) mask[idx[i]] = 1;
  return mask;
}

}  // namespace testkit

#include "mecsim/action.hpp"
#include "mecsim/env/env.hpp"

namespace testkit {

/// Random feasible action for the environment's current state: trajectory in
/// the box, CPU split normalized to f_max, offload ratios under the true
/// feasible bound.
inline mecsim::ActionBundle random_feasible_bundle(const mecsim::env::Env& e, Rng& rng) {
  const auto& cfg = e.cfg();
  mecsim::ActionBundle a;
  a.resize(cfg.n_max, 0, 0);
  a.active = e.active();
  a.v = rng.uniform(0.0, cfg.v_max);
  a.eta = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  a.beta = rng.uniform(0.0, 3.14159265358979323846);

  double s = 0.0;
  for (int j = 0; j < cfg.n_max; ++j) {
    if (!a.active[j]) continue;
    a.f_tilde[j] = rng.uniform(0.05, 1.0);
    s += a.f_tilde[j];
  }
  for (int j = 0; j < cfg.n_max; ++j) {
    if (a.active[j]) a.f[j] = a.f_tilde[j] / s * cfg.f_max;
  }

  const auto preview = e.rates_after_uav_move(a.v, a.eta, a.beta);
  for (int j = 0; j < cfg.n_max; ++j) {
    if (!a.active[j]) continue;
    a.lambda_cap[j] = mecsim::env::lambda_max(e.id(j).task_bits, preview.rate_up[j],
                                              preview.rate_down[j], a.f[j], cfg);
    a.lambda_sig[j] = rng.uniform01();
    a.lambda[j] = a.lambda_cap[j] * a.lambda_sig[j];
  }
  return a;
}

}  // namespace testkit
