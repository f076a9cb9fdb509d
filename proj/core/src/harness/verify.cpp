#include "mecsim/harness/verify.hpp"

#include <chrono>
#include <cmath>

#include "mecsim/agents/cmaddpg.hpp"
#include "mecsim/env/oracle.hpp"
#include "mecsim/train/trainer.hpp"

namespace mecsim::harness {

using numkit::Act;
using numkit::DenseNet;
using numkit::ParamSet;
using numkit::Rng;
using numkit::Tensor2;

namespace {

/// Central finite differences over every parameter of `params` against the
/// analytic gradient, with denominator floor 1e-6.
template <typename EvalFn>
double fd_max_rel(ParamSet& params, const ParamSet& analytic, EvalFn&& eval, double h) {
  auto flat = numkit::flatten(params);
  const auto ga = numkit::flatten(analytic);
  double worst = 0.0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double keep = flat[i];
    flat[i] = keep + h;
    numkit::unflatten(flat, params);
    const double up = eval();
    flat[i] = keep - h;
    numkit::unflatten(flat, params);
    const double dn = eval();
    flat[i] = keep;
    numkit::unflatten(flat, params);
    const double gf = (up - dn) / (2.0 * h);
    const double denom = std::max({std::fabs(ga[i]), std::fabs(gf), 1e-6});
    worst = std::max(worst, std::fabs(ga[i] - gf) / denom);
  }
  return worst;
}

void jitter_biases(ParamSet& ps, Rng& rng, double scale = 0.1) {
  for (auto& e : ps.entries) {
    if (e.name.size() >= 2 && e.name.compare(e.name.size() - 2, 2, ".b") == 0) {
      for (std::size_t i = 0; i < e.value.size(); ++i) {
        e.value.data()[i] += rng.uniform(-scale, scale);
      }
    }
  }
}

}  // namespace

GradCheckReport run_gradcheck(std::uint64_t seed) {
  GradCheckReport rep;
  const auto t0 = std::chrono::steady_clock::now();

  // Part 1: twenty random architectures under 1000 parameters.
  Rng master(seed);
  const Act acts[] = {Act::tanh, Act::sigmoid, Act::relu, Act::leaky_relu};
  for (int trial = 0; trial < 20; ++trial) {
    const int in = master.uniform_int(2, 8);
    const int out = master.uniform_int(1, 5);
    std::vector<int> hidden;
    const int depth = master.uniform_int(0, 2);
    for (int d = 0; d < depth; ++d) hidden.push_back(master.uniform_int(2, 12));
    DenseNet net("g", in, hidden, out, acts[master.uniform_int(0, 3)], Act::identity, master);

    Tensor2 x(2, in);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < in; ++c) x(r, c) = master.uniform(-1.5, 1.5);
    std::vector<double> mix(static_cast<std::size_t>(out));
    for (auto& m : mix) m = master.uniform(-1.0, 1.0);

    ParamSet params = net.param_set();
    auto eval = [&]() {
      net.load_params(params, 0);
      Tensor2 y = net.forward(x);
      double s = 0.0;
      for (int r = 0; r < y.rows(); ++r)
        for (int c = 0; c < y.cols(); ++c) s += mix[c] * y(r, c);
      return s;
    };
    DenseNet::Cache cache;
    net.forward(x, &cache);
    Tensor2 up(2, out);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < out; ++c) up(r, c) = mix[c];
    ParamSet analytic = numkit::zeros_like(params);
    net.backward(cache, up, analytic, 0);
    rep.max_rel_small = std::max(rep.max_rel_small, fd_max_rel(params, analytic, eval, 1e-5));
    ++rep.nets_checked;
  }

  // Part 2: the actor group differentiated through the critic on a reduced
  // configuration, evaluated at a generic (bias-jittered) parameter point.
  env::SimConfig sim;
  sim.n_min = 2;
  sim.n_max = 3;
  sim.task_min = 1e6;
  sim.task_max = 1e7;
  agents::ActorArch arch;
  arch.msg_dim = 3;
  arch.feat_dim = 4;
  arch.mu_id_hidden = {6};
  arch.eps_uav_hidden = {5};
  arch.eps_id_hidden = {5};
  arch.gamma_v_hidden = {6};
  arch.gamma_f_hidden = {5};
  arch.pi_id_hidden = {5};
  arch.critic_hidden = {10};
  arch.hidden_act = Act::tanh;

  Rng rng(seed + 1);
  agents::CmaddpgActors actors(sim, arch, agents::Aggregator::gat, rng);
  {
    ParamSet ps = actors.params();
    jitter_biases(ps, rng);
    actors.set_params(ps);
  }

  train::TrainConfig tcfg;
  tcfg.batch = 3;
  train::Trainer trainer(actors, sim, arch, tcfg, Rng(seed + 2));

  std::vector<train::TransitionSample> transitions;
  {
    Rng roll(seed + 3);
    env::Env e(sim);
    while (transitions.size() < 3) {
      const int n = roll.uniform_int(sim.n_min, sim.n_max);
      std::vector<int> idx(sim.n_max);
      for (int i = 0; i < sim.n_max; ++i) idx[i] = i;
      for (int i = sim.n_max - 1; i > 0; --i) std::swap(idx[i], idx[roll.uniform_int(0, i)]);
      std::vector<std::uint8_t> mask(sim.n_max, 0);
      for (int i = 0; i < n; ++i) mask[idx[i]] = 1;
      e.reset(roll, mask);
      auto s = e.state_vector();
      for (int t = 0; t < sim.slots && transitions.size() < 3; ++t) {
        auto bundle = actors.act(e);
        bundle = train::inject_exploration(bundle, 0.05, roll, e);
        auto a = bundle.pack(sim.f_max, sim.v_max);
        auto out = e.step(bundle, roll);
        auto s_next = e.state_vector();
        transitions.push_back({s, a, out.reward, s_next, mask});
        s = std::move(s_next);
      }
    }
  }
  std::vector<const train::TransitionSample*> batch;
  for (const auto& t : transitions) batch.push_back(&t);

  auto [analytic, objective] = trainer.actor_gradient(batch);
  (void)objective;
  ParamSet params = actors.params();
  rep.e2e_params = params.scalar_count();
  auto eval = [&]() {
    actors.set_params(params);
    return trainer.actor_gradient(batch).second;
  };
  rep.max_rel_e2e = fd_max_rel(params, analytic, eval, 1e-6);
  actors.set_params(params);

  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

OracleReport run_oracle_verify(long steps, std::uint64_t seed) {
  OracleReport rep;
  env::SimConfig cfg;  // full-scale constants
  cfg.n_min = 1;
  cfg.n_max = 6;
  cfg.task_min = 1e6;  // keep offloading exercised alongside local work
  cfg.task_max = 2e9;

  Rng rng(seed);
  env::Env e(cfg);
  long done = 0;
  while (done < steps) {
    const int n = rng.uniform_int(1, cfg.n_max);
    std::vector<int> idx(cfg.n_max);
    for (int i = 0; i < cfg.n_max; ++i) idx[i] = i;
    for (int i = cfg.n_max - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(0, i)]);
    std::vector<std::uint8_t> mask(cfg.n_max, 0);
    for (int i = 0; i < n; ++i) mask[idx[i]] = 1;
    e.reset(rng, mask);

    for (int t = 0; t < cfg.slots && done < steps; ++t, ++done) {
      // Random feasible action at the current state.
      ActionBundle a;
      a.resize(cfg.n_max, 0, 0);
      a.active = mask;
      a.v = rng.uniform(0.0, cfg.v_max);
      a.eta = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
      a.beta = rng.uniform(0.0, 3.14159265358979323846);
      a.traj_raw = {2.0 * a.v / cfg.v_max - 1.0, a.eta / 3.14159265358979323846 - 1.0,
                    2.0 * a.beta / 3.14159265358979323846 - 1.0};
      double fsum = 0.0;
      for (int j = 0; j < cfg.n_max; ++j) {
        if (!mask[j]) continue;
        a.f_tilde[j] = rng.uniform(0.05, 1.0);
        fsum += a.f_tilde[j];
      }
      for (int j = 0; j < cfg.n_max; ++j) {
        if (mask[j]) a.f[j] = a.f_tilde[j] / fsum * cfg.f_max;
      }
      const auto preview = e.rates_after_uav_move(a.v, a.eta, a.beta);
      for (int j = 0; j < cfg.n_max; ++j) {
        if (!mask[j]) continue;
        a.lambda_cap[j] = env::lambda_max(e.id(j).task_bits, preview.rate_up[j],
                                          preview.rate_down[j], a.f[j], cfg);
        a.lambda_sig[j] = rng.uniform01();
        a.lambda[j] = a.lambda_cap[j] * a.lambda_sig[j];
      }

      const env::UavState uav_before = e.uav();
      std::vector<env::IdState> ids_before;
      for (int j = 0; j < cfg.n_max; ++j) ids_before.push_back(e.id(j));
      Rng step_rng(seed * 1000003 + done);
      Rng oracle_rng = step_rng;
      const auto got = e.step(a, step_rng);
      const auto want = oracle::recompute_step(cfg, uav_before, ids_before, mask, a, oracle_rng);

      auto upd = [&](double x, double y) {
        rep.max_rel_dev = std::max(rep.max_rel_dev, oracle::rel_dev(x, y, 1e-15));
      };
      upd(got.reward, want.reward);
      for (int j = 0; j < cfg.n_max; ++j) {
        upd(got.e_local[j], want.e_local[j]);
        upd(got.e_offload[j], want.e_offload[j]);
        upd(got.latency[j], want.latency[j]);
        upd(got.rate_up[j], want.rate_up[j]);
        upd(got.rate_down[j], want.rate_down[j]);
        upd(e.id(j).pos.x, want.id_after[j].x);
        upd(e.id(j).pos.y, want.id_after[j].y);
      }
      upd(e.uav().pos.x, want.uav_after.x);
      upd(e.uav().pos.y, want.uav_after.y);
      upd(e.uav().pos.z, want.uav_after.z);
    }
  }
  rep.steps = done;
  return rep;
}

}  // namespace mecsim::harness
