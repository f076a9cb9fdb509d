#include "mecsim/baselines/vanilla.hpp"

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
constexpr int kUavObs = 3;
constexpr int kIdObs = 7;
}  // namespace

VanillaActors::VanillaActors(const env::SimConfig& sim, agents::ActorArch arch, numkit::Rng& rng)
    : sim_(sim), arch_(std::move(arch)) {
  arch_.validate();
  const Act hact = arch_.hidden_act;
  traj_net_ = DenseNet("van_traj", kUavObs, arch_.gamma_v_hidden, 3, hact, Act::tanh, rng);
  f_embed_ = DenseNet("van_femb", kUavObs, arch_.eps_uav_hidden, arch_.feat_dim, hact,
                      Act::relu, rng);
  f_head_ = DenseNet("van_fhead", arch_.feat_dim, arch_.gamma_f_hidden, 1, hact, Act::relu, rng);
  lambda_net_ = DenseNet("van_lambda", kIdObs, arch_.pi_id_hidden, 1, hact, Act::sigmoid, rng);
}

ParamSet VanillaActors::params() const {
  ParamSet ps;
  traj_net_.append_params_to(ps);
  f_embed_.append_params_to(ps);
  f_head_.append_params_to(ps);
  lambda_net_.append_params_to(ps);
  return ps;
}

void VanillaActors::set_params(const ParamSet& ps) {
  int off = 0;
  traj_net_.load_params(ps, off);
  off += traj_net_.entry_count();
  f_embed_.load_params(ps, off);
  off += f_embed_.entry_count();
  f_head_.load_params(ps, off);
  off += f_head_.entry_count();
  lambda_net_.load_params(ps, off);
  off += lambda_net_.entry_count();
  if (off != static_cast<int>(ps.entries.size())) {
    throw ContractError("vanilla set_params: entry count mismatch");
  }
}

std::unique_ptr<agents::TrainablePolicy> VanillaActors::clone() const {
  return std::make_unique<VanillaActors>(*this);
}

struct VanillaActors::BatchCache : Cache {
  int batch = 0;
  std::vector<std::vector<int>> act_ids;
  std::vector<int> row_off;
  int total_ids = 0;
  DenseNet::Cache traj_cache, emb_cache, fhead_cache, lam_cache;
  Tensor2 traj_out;              // b x 3 (tanh)
  Tensor2 fhead_out;             // b x 1
  Tensor2 lam_out;               // total_ids x 1 (sigmoid)
  std::vector<RateChainCache> chains;
  std::vector<std::array<double, 3>> traj;
};

std::unique_ptr<agents::TrainablePolicy::Cache> VanillaActors::make_cache() const {
  return std::make_unique<BatchCache>();
}

void VanillaActors::forward_batch(const Tensor2& states, const MaskMat& masks,
                                  const Geometry& geom, Cache& cache_base,
                                  Tensor2& actions) const {
  auto& c = static_cast<BatchCache&>(cache_base);
  const int b = states.rows();
  const int nm = sim_.n_max;
  if (states.cols() != state_width()) throw ContractError("vanilla: state width mismatch");

  c.batch = b;
  c.act_ids.assign(b, {});
  c.row_off.assign(b + 1, 0);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < nm; ++j) {
      if (masks[i][j]) c.act_ids[i].push_back(j);
    }
    if (c.act_ids[i].empty()) throw ContractError("vanilla: sample without active devices");
    c.row_off[i + 1] = c.row_off[i] + static_cast<int>(c.act_ids[i].size());
  }
  c.total_ids = c.row_off[b];

  Tensor2 o0(b, kUavObs);
  Tensor2 oj(c.total_ids, kIdObs);
  for (int i = 0; i < b; ++i) {
    const double* s = states.row(i);
    std::copy(s, s + kUavObs, o0.row(i));
    for (std::size_t a = 0; a < c.act_ids[i].size(); ++a) {
      const int j = c.act_ids[i][a];
      std::copy(s + kUavObs + kIdObs * j, s + kUavObs + kIdObs * (j + 1),
                oj.row(c.row_off[i] + static_cast<int>(a)));
    }
  }

  c.traj_out = traj_net_.forward(o0, &c.traj_cache);
  const Tensor2 emb = f_embed_.forward(o0, &c.emb_cache);
  c.fhead_out = f_head_.forward(emb, &c.fhead_cache);
  c.lam_out = lambda_net_.forward(oj, &c.lam_cache);

  c.traj.assign(b, {});
  for (int i = 0; i < b; ++i) {
    const agents::TrajProjection t =
        agents::project_traj({c.traj_out(i, 0), c.traj_out(i, 1), c.traj_out(i, 2)}, sim_);
    c.traj[i] = {t.v, t.eta, t.beta};
  }

  // The replicated CPU head normalizes to the equal split by construction.
  c.chains.assign(c.total_ids, {});
  const int aw = action_width();
  if (actions.rows() != b || actions.cols() != aw) actions = Tensor2(b, aw);
  actions.fill(0.0);
  for (int i = 0; i < b; ++i) {
    double* out = actions.row(i);
    out[0] = (c.traj_out(i, 0) + 1.0) * 0.5;
    out[1] = (c.traj_out(i, 1) + 1.0) * 0.5;
    out[2] = (c.traj_out(i, 2) + 1.0) * 0.5;
    const int n = static_cast<int>(c.act_ids[i].size());
    const double f_share = sim_.f_max / n;
    for (int a = 0; a < n; ++a) {
      const int j = c.act_ids[i][a];
      const int row = c.row_off[i] + a;
      c.chains[row] = agents::rate_chain_forward(sim_, geom.u_prev[i], geom.id_pos[i][j],
                                         geom.task_bits[i][j], n, c.traj[i][0], c.traj[i][1],
                                         c.traj[i][2], f_share);
      out[3 + j] = f_share / sim_.f_max;
      out[3 + nm + j] = c.chains[row].cap * c.lam_out(row, 0);
    }
  }
}

void VanillaActors::backward_batch(const Cache& cache_base, const Tensor2& d_actions,
                                   ParamSet& grads) const {
  const auto& c = static_cast<const BatchCache&>(cache_base);
  const int b = c.batch;
  if (b == 0) throw StateError("vanilla backward: no forward cache");
  const int nm = sim_.n_max;
  if (d_actions.rows() != b || d_actions.cols() != action_width()) {
    throw ContractError("vanilla backward: upstream shape mismatch");
  }

  Tensor2 d_sig(c.total_ids, 1);
  std::vector<std::array<double, 3>> d_traj_phys(b, {0.0, 0.0, 0.0});
  for (int i = 0; i < b; ++i) {
    const int n = static_cast<int>(c.act_ids[i].size());
    for (int a = 0; a < n; ++a) {
      const int j = c.act_ids[i][a];
      const int row = c.row_off[i] + a;
      const double d_lambda = d_actions(i, 3 + nm + j);
      d_sig(row, 0) = d_lambda * c.chains[row].cap;
      const double d_cap = d_lambda * c.lam_out(row, 0);
      const agents::RateChainGrad g =
          agents::rate_chain_backward(sim_, c.chains[row], 0.0, 0.0, d_cap);
      // The equal-split CPU share is structurally constant, so g.df and the
      // direct f slots have no parameter path.
      d_traj_phys[i][0] += g.dv;
      d_traj_phys[i][1] += g.deta;
      d_traj_phys[i][2] += g.dbeta;
    }
  }
  lambda_net_.backward(c.lam_cache, d_sig, grads,
                       traj_net_.entry_count() + f_embed_.entry_count() +
                           f_head_.entry_count());

  Tensor2 d_g(b, 3);
  for (int i = 0; i < b; ++i) {
    d_g(i, 0) = d_actions(i, 0) * 0.5 + d_traj_phys[i][0] * (sim_.v_max * 0.5);
    d_g(i, 1) = d_actions(i, 1) * 0.5 + d_traj_phys[i][1] * kPi;
    d_g(i, 2) = d_actions(i, 2) * 0.5 + d_traj_phys[i][2] * (kPi * 0.5);
  }
  traj_net_.backward(c.traj_cache, d_g, grads, 0);
}

ActionBundle VanillaActors::act(const env::Env& e) const {
  const int nm = sim_.n_max;
  if (e.cfg().n_max != nm) throw ContractError("vanilla act: environment n_max mismatch");
  Tensor2 states(1, state_width());
  const auto s = e.state_vector();
  std::copy(s.begin(), s.end(), states.row(0));
  MaskMat masks{e.active()};
  const Geometry geom = agents::geometry_from_env(e);

  BatchCache cache;
  Tensor2 actions;
  forward_batch(states, masks, geom, cache, actions);

  ActionBundle a;
  a.resize(nm, 0, 0);
  a.active = e.active();
  a.v = cache.traj[0][0];
  a.eta = cache.traj[0][1];
  a.beta = cache.traj[0][2];
  a.traj_raw = {cache.traj_out(0, 0), cache.traj_out(0, 1), cache.traj_out(0, 2)};
  for (std::size_t idx = 0; idx < cache.act_ids[0].size(); ++idx) {
    const int j = cache.act_ids[0][idx];
    const int row = static_cast<int>(idx);
    const int n = static_cast<int>(cache.act_ids[0].size());
    a.f[j] = sim_.f_max / n;
    a.f_tilde[j] = cache.fhead_out(0, 0);
    a.lambda_sig[j] = cache.lam_out(row, 0);
    a.lambda_cap[j] = cache.chains[row].cap;
    a.lambda[j] = a.lambda_cap[j] * a.lambda_sig[j];
  }
  return a;
}

}  // namespace mecsim::baselines
