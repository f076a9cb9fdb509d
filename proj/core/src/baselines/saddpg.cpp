#include "mecsim/baselines/saddpg.hpp"

#include <cmath>
#include <numbers>

#include "mecsim/agents/cmaddpg.hpp"
#include "mecsim/agents/ratechain.hpp"
#include "mecsim/errors.hpp"

namespace mecsim::baselines {

using agents::Geometry;
using agents::MaskMat;
using agents::RateChainCache;
using numkit::Act;
using numkit::DenseNet;
using numkit::ParamSet;
using numkit::Tensor2;

namespace {
constexpr double kPi = std::numbers::pi;
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

SaddpgActor::SaddpgActor(const env::SimConfig& sim, agents::ActorArch arch, numkit::Rng& rng)
    : sim_(sim), arch_(std::move(arch)) {
  arch_.validate();
  trunk_ = DenseNet("saddpg", env::Env::state_width(sim_.n_max), arch_.gamma_v_hidden,
                    3 + 2 * sim_.n_max, arch_.hidden_act, Act::identity, rng);
}

ParamSet SaddpgActor::params() const { return trunk_.param_set(); }

void SaddpgActor::set_params(const ParamSet& ps) {
  if (static_cast<int>(ps.entries.size()) != trunk_.entry_count()) {
    throw ContractError("saddpg set_params: entry count mismatch");
  }
  trunk_.load_params(ps, 0);
}

std::unique_ptr<agents::TrainablePolicy> SaddpgActor::clone() const {
  return std::make_unique<SaddpgActor>(*this);
}

struct SaddpgActor::BatchCache : Cache {
  int batch = 0;
  DenseNet::Cache trunk_cache;
  Tensor2 out;  // b x (3 + 2N), pre-slice activations
  std::vector<std::array<double, 3>> g;     // tanh of the first three
  std::vector<std::array<double, 3>> traj;  // projected
  std::vector<double> f_tilde;              // b * N, relu applied
  std::vector<double> f_sum;
  std::vector<std::uint8_t> f_fallback;
  std::vector<double> f_vals;  // b * N
  std::vector<double> sig;     // b * N
  std::vector<RateChainCache> chains;
};

std::unique_ptr<agents::TrainablePolicy::Cache> SaddpgActor::make_cache() const {
  return std::make_unique<BatchCache>();
}

void SaddpgActor::forward_batch(const Tensor2& states, const MaskMat& masks,
                                const Geometry& geom, Cache& cache_base,
                                Tensor2& actions) const {
  auto& c = static_cast<BatchCache&>(cache_base);
  const int b = states.rows();
  const int n = sim_.n_max;
  if (states.cols() != state_width()) {
    throw ContractError("saddpg: input width mismatch (trained for a fixed N)");
  }
  for (const auto& m : masks) {
    for (auto v : m) {
      if (!v) throw ContractError("saddpg: all devices must be active (fixed-N scheme)");
    }
  }

  c.batch = b;
  c.out = trunk_.forward(states, &c.trunk_cache);
  c.g.assign(b, {});
  c.traj.assign(b, {});
  c.f_tilde.assign(static_cast<std::size_t>(b) * n, 0.0);
  c.f_sum.assign(b, 0.0);
  c.f_fallback.assign(b, 0);
  c.f_vals.assign(static_cast<std::size_t>(b) * n, 0.0);
  c.sig.assign(static_cast<std::size_t>(b) * n, 0.0);
  c.chains.assign(static_cast<std::size_t>(b) * n, {});

  const int aw = action_width();
  if (actions.rows() != b || actions.cols() != aw) actions = Tensor2(b, aw);
  actions.fill(0.0);
  for (int i = 0; i < b; ++i) {
    for (int k = 0; k < 3; ++k) c.g[i][k] = std::tanh(c.out(i, k));
    const agents::TrajProjection t = agents::project_traj(c.g[i], sim_);
    c.traj[i] = {t.v, t.eta, t.beta};

    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      const double raw = c.out(i, 3 + j);
      const double ft = raw > 0.0 ? raw : 0.0;
      c.f_tilde[static_cast<std::size_t>(i) * n + j] = ft;
      sum += ft;
    }
    c.f_sum[i] = sum;
    for (int j = 0; j < n; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * n + j;
      if (sum == 0.0) {
        c.f_fallback[i] = 1;
        c.f_vals[idx] = sim_.f_max / n;
      } else {
        c.f_vals[idx] = c.f_tilde[idx] / sum * sim_.f_max;
      }
    }

    double* out = actions.row(i);
    out[0] = (c.g[i][0] + 1.0) * 0.5;
    out[1] = (c.g[i][1] + 1.0) * 0.5;
    out[2] = (c.g[i][2] + 1.0) * 0.5;
    for (int j = 0; j < n; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * n + j;
      c.sig[idx] = sigmoid(c.out(i, 3 + n + j));
      c.chains[idx] =
          agents::rate_chain_forward(sim_, geom.u_prev[i], geom.id_pos[i][j], geom.task_bits[i][j], n,
                             c.traj[i][0], c.traj[i][1], c.traj[i][2], c.f_vals[idx]);
      out[3 + j] = c.f_vals[idx] / sim_.f_max;
      out[3 + n + j] = c.chains[idx].cap * c.sig[idx];
    }
  }
}

void SaddpgActor::backward_batch(const Cache& cache_base, const Tensor2& d_actions,
                                 ParamSet& grads) const {
  const auto& c = static_cast<const BatchCache&>(cache_base);
  const int b = c.batch;
  if (b == 0) throw StateError("saddpg backward: no forward cache");
  const int n = sim_.n_max;
  if (d_actions.rows() != b || d_actions.cols() != action_width()) {
    throw ContractError("saddpg backward: upstream shape mismatch");
  }

  Tensor2 d_out(b, 3 + 2 * n);
  d_out.fill(0.0);
  for (int i = 0; i < b; ++i) {
    std::array<double, 3> d_traj_phys{0.0, 0.0, 0.0};
    std::vector<double> d_f(n, 0.0);
    for (int j = 0; j < n; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * n + j;
      const double d_lambda = d_actions(i, 3 + n + j);
      const double d_sig = d_lambda * c.chains[idx].cap;
      const double d_cap = d_lambda * c.sig[idx];
      const agents::RateChainGrad g =
          agents::rate_chain_backward(sim_, c.chains[idx], 0.0, 0.0, d_cap);
      d_f[j] = g.df + d_actions(i, 3 + j) / sim_.f_max;
      d_traj_phys[0] += g.dv;
      d_traj_phys[1] += g.deta;
      d_traj_phys[2] += g.dbeta;
      d_out(i, 3 + n + j) = d_sig * c.sig[idx] * (1.0 - c.sig[idx]);
    }
    if (!c.f_fallback[i]) {
      const double s = c.f_sum[i];
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += d_f[j] * c.f_tilde[static_cast<std::size_t>(i) * n + j];
      for (int j = 0; j < n; ++j) {
        const std::size_t idx = static_cast<std::size_t>(i) * n + j;
        const double d_ft = sim_.f_max / s * (d_f[j] - dot / s);
        d_out(i, 3 + j) = c.f_tilde[idx] > 0.0 ? d_ft : 0.0;  // relu gate
      }
    }
    const double dg0 = d_actions(i, 0) * 0.5 + d_traj_phys[0] * (sim_.v_max * 0.5);
    const double dg1 = d_actions(i, 1) * 0.5 + d_traj_phys[1] * kPi;
    const double dg2 = d_actions(i, 2) * 0.5 + d_traj_phys[2] * (kPi * 0.5);
    d_out(i, 0) = dg0 * (1.0 - c.g[i][0] * c.g[i][0]);
    d_out(i, 1) = dg1 * (1.0 - c.g[i][1] * c.g[i][1]);
    d_out(i, 2) = dg2 * (1.0 - c.g[i][2] * c.g[i][2]);
  }
  trunk_.backward(c.trunk_cache, d_out, grads, 0);
}

ActionBundle SaddpgActor::act(const env::Env& e) const {
  const int n = sim_.n_max;
  if (e.cfg().n_max != n || e.active_count() != n) {
    throw ContractError("saddpg act: scheme is fixed to N = " + std::to_string(n) +
                        " active devices");
  }
  Tensor2 states(1, state_width());
  const auto s = e.state_vector();
  std::copy(s.begin(), s.end(), states.row(0));
  MaskMat masks{e.active()};
  const Geometry geom = agents::geometry_from_env(e);

  BatchCache cache;
  Tensor2 actions;
  forward_batch(states, masks, geom, cache, actions);

  ActionBundle a;
  a.resize(n, 0, 0);
  a.active = e.active();
  a.v = cache.traj[0][0];
  a.eta = cache.traj[0][1];
  a.beta = cache.traj[0][2];
  a.traj_raw = {cache.g[0][0], cache.g[0][1], cache.g[0][2]};
  for (int j = 0; j < n; ++j) {
    a.f[j] = cache.f_vals[j];
    a.f_tilde[j] = cache.f_tilde[j];
    a.lambda_sig[j] = cache.sig[j];
    a.lambda_cap[j] = cache.chains[j].cap;
    a.lambda[j] = a.lambda_cap[j] * a.lambda_sig[j];
  }
  return a;
}

}  // namespace mecsim::baselines
