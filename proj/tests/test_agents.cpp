#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "mecsim/agents/checkpoint.hpp"
#include "mecsim/agents/cmaddpg.hpp"
#include "mecsim/agents/critic.hpp"
#include "mecsim/agents/ratechain.hpp"
#include "mecsim/errors.hpp"

using namespace mecsim;
using namespace mecsim::agents;
using numkit::Rng;
using numkit::Tensor2;
using testkit::desk_sim;
using testkit::full_mask;

namespace {

constexpr double kPi = std::numbers::pi;

ActorArch tiny_arch() {
  ActorArch a;
  a.msg_dim = 3;
  a.feat_dim = 4;
  a.mu_id_hidden = {6};
  a.eps_uav_hidden = {5};
  a.eps_id_hidden = {5};
  a.gamma_v_hidden = {6};
  a.gamma_f_hidden = {5};
  a.pi_id_hidden = {5};
  a.critic_hidden = {8};
  return a;
}

}  // namespace

TEST_SUITE_BEGIN("agents");

TEST_CASE("id_message: parameter sharing and shape") {
  Rng rng(1);
  CmaddpgActors actors(desk_sim(), tiny_arch(), Aggregator::gat, rng);

  std::vector<double> obs(7, 0.4);
  auto m1 = actors.id_message(obs);
  auto m2 = actors.id_message(obs);
  CHECK(m1 == m2);
  CHECK(static_cast<int>(m1.size()) == 3);

  std::vector<double> zeros(7, 0.0);
  auto mz1 = actors.id_message(zeros);
  auto mz2 = actors.id_message(zeros);
  CHECK(mz1 == mz2);  // deterministic constant for the masked observation

  std::vector<double> bad(6, 0.0);
  CHECK_THROWS_AS(actors.id_message(bad), ContractError);
}

TEST_CASE("extract_features: shared net, widths, scalar oracle") {
  Rng rng(2);
  CmaddpgActors actors(desk_sim(), tiny_arch(), Aggregator::gat, rng);

  std::vector<double> o0{0.1, 0.2, 0.3};
  std::vector<std::vector<double>> msgs{{0.5, 0.1, -0.2}, {0.5, 0.1, -0.2}, {1.0, 0.0, 0.7}};
  auto feats = actors.extract_features(o0, msgs);
  REQUIRE(feats.size() == 4);
  for (const auto& f : feats) CHECK(static_cast<int>(f.size()) == 4);
  CHECK(feats[1] == feats[2]);  // identical messages, identical features

  std::vector<std::vector<double>> badmsg{{0.5, 0.1}};
  CHECK_THROWS_AS(actors.extract_features(o0, badmsg), ContractError);
}

TEST_CASE("attention: uniform for identical features, rows sum to one, 2x2 oracle") {
  Rng rng(3);
  CmaddpgActors actors(desk_sim(), tiny_arch(), Aggregator::gat, rng);

  std::vector<std::vector<double>> same(5, std::vector<double>{0.3, -0.4, 0.9, 0.05});
  auto z = actors.attention_scores(same);
  for (const auto& row : z) {
    for (double v : row) CHECK(v == doctest::Approx(1.0 / 5.0).epsilon(1e-12));
  }

  std::vector<std::vector<double>> feats{{0.2, 0.4, -0.3, 1.0}, {-0.6, 0.1, 0.8, 0.2}};
  auto z2 = actors.attention_scores(feats);
  for (const auto& row : z2) {
    double sum = 0.0;
    for (double v : row) {
      sum += v;
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
  // Hand-evaluated softmax of the scalar scorer outputs for the 2x2 case.
  for (int j = 0; j < 2; ++j) {
    const double c0 = actors.attention_logit(feats[j], feats[0]);
    const double c1 = actors.attention_logit(feats[j], feats[1]);
    const double mx = std::max(c0, c1);
    const double e0 = std::exp(c0 - mx), e1 = std::exp(c1 - mx);
    CHECK(z2[j][0] == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));
    CHECK(z2[j][1] == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-12));
  }
}

TEST_CASE("gat_aggregate: single node, convex combination, permutation") {
  std::vector<std::vector<double>> one{{0.5, -1.0, 2.0, 0.0}};
  auto w = CmaddpgActors::gat_aggregate(one, {{1.0}});
  CHECK(w[0] == one[0]);

  std::vector<std::vector<double>> same(4, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  std::vector<std::vector<double>> z(4, std::vector<double>(4, 0.25));
  auto w2 = CmaddpgActors::gat_aggregate(same, z);
  for (const auto& row : w2) {
    for (int c = 0; c < 4; ++c) CHECK(row[c] == doctest::Approx(same[0][c]).epsilon(1e-12));
  }
}

TEST_CASE("uav_message: composition matches the individual phases bitwise") {
  Rng rng(4);
  CmaddpgActors actors(desk_sim(), tiny_arch(), Aggregator::gat, rng);

  std::vector<double> o0{0.9, 0.1, 0.5};
  std::vector<std::vector<double>> msgs{{0.2, 0.8, 0.1}, {0.0, 0.3, 0.9}};
  auto direct = actors.uav_message(o0, msgs);
  auto feats = actors.extract_features(o0, msgs);
  auto z = actors.attention_scores(feats);
  auto composed = CmaddpgActors::gat_aggregate(feats, z);
  REQUIRE(direct.size() == composed.size());
  for (std::size_t i = 0; i < direct.size(); ++i) CHECK(direct[i] == composed[i]);
  CHECK(direct.size() == msgs.size() + 1);            // server + one per device
  CHECK(direct[1].size() == 4);                       // E floats per device
}

TEST_CASE("uav_solution: symmetry, budget, boundary map") {
  Rng rng(5);
  auto sim = desk_sim();
  CmaddpgActors actors(sim, tiny_arch(), Aggregator::gat, rng);

  std::vector<double> w0{0.1, 0.2, 0.3, 0.4};
  std::vector<std::vector<double>> ws(4, std::vector<double>{0.5, 0.5, 0.5, 0.5});
  auto d = actors.uav_solution(w0, ws);
  for (double fv : d.f) CHECK(fv == doctest::Approx(sim.f_max / 4.0).epsilon(1e-12));
  double sum = 0.0;
  for (double fv : d.f) sum += fv;
  CHECK(std::fabs(sum - sim.f_max) <= 1e-6 * sim.f_max);
  CHECK(d.v >= 0.0);
  CHECK(d.v <= sim.v_max);
  CHECK(d.eta >= 0.0);
  CHECK(d.eta <= 2.0 * kPi);
  CHECK(d.beta >= 0.0);
  CHECK(d.beta <= kPi);

  // Affine range maps at the tanh output boundaries.
  auto t = project_traj({-1.0, 0.0, 1.0}, sim);
  CHECK(t.v == 0.0);
  CHECK(t.eta == doctest::Approx(kPi).epsilon(1e-15));
  CHECK(t.beta == doctest::Approx(kPi).epsilon(1e-15));
}

TEST_CASE("normalize_f: zero raw shares fall back to the equal split") {
  std::vector<double> ft{0.0, 0.0, 0.0};
  std::vector<double> f;
  CHECK(normalize_f(ft, 30.0, f));
  for (double v : f) CHECK(v == doctest::Approx(10.0));

  ft = {1.0, 3.0};
  CHECK_FALSE(normalize_f(ft, 8.0, f));
  CHECK(f[0] == doctest::Approx(2.0));
  CHECK(f[1] == doctest::Approx(6.0));
}

TEST_CASE("id_solution: zero bound, sigmoid midpoint, feasibility sweep") {
  Rng rng(6);
  auto sim = desk_sim();
  CmaddpgActors actors(sim, tiny_arch(), Aggregator::gat, rng);

  std::vector<double> w(4, 0.2);
  CHECK(actors.id_solution(w, 0.0, 1e7, 1e7, 1e6) == 0.0);

  // Zeroed solution net: raw output 0, sigmoid 0.5, so lambda = cap / 2.
  CmaddpgActors zeroed = actors;
  auto ps = zeroed.params();
  for (auto& e : ps.entries) {
    if (e.name.rfind("pi_id.", 0) == 0) e.value.fill(0.0);
  }
  zeroed.set_params(ps);
  const double cap = env::lambda_max(1e6, 3e7, 4e7, 8e9, sim);
  CHECK(zeroed.id_solution(w, 8e9, 3e7, 4e7, 1e6) == doctest::Approx(0.5 * cap).epsilon(1e-12));

  // Monte-Carlo feasibility: random nets and states keep latency in budget.
  Rng sweep(7);
  for (int trial = 0; trial < 20; ++trial) {
    Rng net_rng(100 + trial);
    CmaddpgActors rnd(sim, tiny_arch(), Aggregator::gat, net_rng);
    env::Env e(sim);
    Rng er(200 + trial);
    e.reset(er, testkit::random_mask(sim.n_max, sweep.uniform_int(1, sim.n_max), sweep));
    auto bundle = rnd.act(e);
    for (int j = 0; j < sim.n_max; ++j) {
      if (!bundle.active[j]) continue;
      CHECK(bundle.lambda[j] >= 0.0);
      CHECK(bundle.lambda[j] <= bundle.lambda_cap[j]);
    }
    auto out = e.step(bundle, er);
    for (int j = 0; j < sim.n_max; ++j) {
      if (bundle.active[j]) CHECK(out.latency[j] <= sim.tau + 1e-9);
    }
  }
}

TEST_CASE("critic: determinism, default widths, oracle forward") {
  Rng rng(8);
  ActorArch defaults;  // paper-profile stacks
  CHECK(defaults.critic_hidden == std::vector<int>{512, 256, 128, 64});

  ActorArch small = tiny_arch();
  Critic critic(10, 6, small, rng);
  std::vector<double> s(10, 0.1), a(6, -0.2);
  CHECK(critic.value(s, a) == critic.value(s, a));

  std::vector<double> in;
  in.insert(in.end(), s.begin(), s.end());
  in.insert(in.end(), a.begin(), a.end());
  auto want = testkit::scalar_forward(critic.net(), in);
  CHECK(critic.value(s, a) == doctest::Approx(want[0]).epsilon(1e-12));

  std::vector<double> wrong(9, 0.0);
  CHECK_THROWS_AS(critic.value(wrong, a), ContractError);
}

TEST_CASE("cooperative inference: locality audit reproduces the bundle exactly") {
  auto sim = desk_sim();
  Rng rng(9);
  CmaddpgActors actors(sim, tiny_arch(), Aggregator::gat, rng);

  env::Env e(sim);
  Rng er(10);
  e.reset(er, full_mask(sim.n_max));
  auto bundle = actors.act(e);

  // Phase 1: each device from its own observation only.
  std::vector<std::vector<double>> msgs;
  for (int j = 0; j < sim.n_max; ++j) {
    auto m = actors.id_message(e.id_observation(j));
    msgs.push_back(m);
    for (int q = 0; q < 3; ++q) CHECK(bundle.uplink[j * 3 + q] == m[q]);
  }
  // Phase 2: server from its observation and the received messages.
  auto w = actors.uav_message(e.uav_observation(), msgs);
  for (int j = 0; j < sim.n_max; ++j) {
    for (int q = 0; q < 4; ++q) CHECK(bundle.downlink[j * 4 + q] == w[j + 1][q]);
  }
  // Phase 3: server solution.
  std::vector<std::vector<double>> w_ids(w.begin() + 1, w.end());
  auto dec = actors.uav_solution(w[0], w_ids);
  CHECK(dec.v == bundle.v);
  CHECK(dec.eta == bundle.eta);
  CHECK(dec.beta == bundle.beta);
  for (int j = 0; j < sim.n_max; ++j) CHECK(dec.f[j] == bundle.f[j]);
  // Phase 4: each device from its own downlink row, locally measured rates
  // and the shared CPU-head replica.
  auto preview = e.rates_after_uav_move(dec.v, dec.eta, dec.beta);
  for (int j = 0; j < sim.n_max; ++j) {
    const double lam = actors.id_solution(w[j + 1], dec.f[j], preview.rate_up[j],
                                          preview.rate_down[j], e.id(j).task_bits);
    CHECK(lam == bundle.lambda[j]);
  }
}

TEST_CASE("actor parameter count is independent of the device population") {
  ActorArch arch = tiny_arch();
  Rng r1(11), r2(11);
  CmaddpgActors small(desk_sim(3, 4), arch, Aggregator::gat, r1);
  CmaddpgActors large(desk_sim(3, 10), arch, Aggregator::gat, r2);
  CHECK(small.param_count() == large.param_count());
}

TEST_CASE("batched forward equals per-sample inference bitwise") {
  auto sim = desk_sim();
  Rng rng(12);
  CmaddpgActors actors(sim, tiny_arch(), Aggregator::gat, rng);

  const int batch = 5;
  Tensor2 states(batch, actors.state_width());
  MaskMat masks;
  Geometry geom;
  std::vector<ActionBundle> bundles;
  for (int i = 0; i < batch; ++i) {
    env::Env e(sim);
    Rng er(300 + i);
    Rng mr(400 + i);
    e.reset(er, testkit::random_mask(sim.n_max, mr.uniform_int(1, sim.n_max), mr));
    auto s = e.state_vector();
    std::copy(s.begin(), s.end(), states.row(i));
    masks.push_back(e.active());
    auto g = geometry_from_env(e);
    geom.u_prev.push_back(g.u_prev[0]);
    geom.id_pos.push_back(g.id_pos[0]);
    geom.task_bits.push_back(g.task_bits[0]);
    bundles.push_back(actors.act(e));
  }
  auto cache = actors.make_cache();
  Tensor2 actions;
  actors.forward_batch(states, masks, geom, *cache, actions);
  for (int i = 0; i < batch; ++i) {
    const auto packed = bundles[i].pack(sim.f_max, sim.v_max);
    REQUIRE(static_cast<int>(packed.size()) == actions.cols());
    for (int cidx = 0; cidx < actions.cols(); ++cidx) {
      CHECK(actions(i, cidx) == packed[cidx]);
    }
  }
}

TEST_CASE("rate chain gradients match finite differences") {
  auto sim = desk_sim();
  env::Vec3 u_prev{40.0, 55.0, 30.0};
  env::Vec3 q{60.0, 45.0, 0.0};
  const double task = 5e6;
  const int n = 3;
  double v = 12.0, eta = 1.1, beta = 1.9, fshare = 9e9;

  auto chain = rate_chain_forward(sim, u_prev, q, task, n, v, eta, beta, fshare);
  // Random upstream mix over (rate_up, rate_down, cap).
  const double cu = 0.7e-7, cd = -0.4e-7, cc = 1.3;
  auto g = rate_chain_backward(sim, chain, cu, cd, cc);

  auto eval = [&](double vv, double ee, double bb, double ff) {
    auto c = rate_chain_forward(sim, u_prev, q, task, n, vv, ee, bb, ff);
    return cu * c.rate_up + cd * c.rate_down + cc * c.cap;
  };
  const double h = 1e-6;
  auto fd = [&](auto up, auto dn) { return (up - dn) / (2 * h); };
  double fdv = fd(eval(v + h, eta, beta, fshare), eval(v - h, eta, beta, fshare));
  double fde = fd(eval(v, eta + h, beta, fshare), eval(v, eta - h, beta, fshare));
  double fdb = fd(eval(v, eta, beta + h, fshare), eval(v, eta, beta - h, fshare));
  const double hf = 1.0;  // f is huge; scale the step
  double fdf = (eval(v, eta, beta, fshare + hf) - eval(v, eta, beta, fshare - hf)) / (2 * hf);

  CHECK(g.dv == doctest::Approx(fdv).epsilon(1e-5));
  CHECK(g.deta == doctest::Approx(fde).epsilon(1e-5));
  CHECK(g.dbeta == doctest::Approx(fdb).epsilon(1e-5));
  CHECK(g.df == doctest::Approx(fdf).epsilon(1e-4));
}

TEST_CASE("actor backward matches finite differences end to end") {
  auto sim = desk_sim(2, 3);
  ActorArch arch = tiny_arch();
  arch.hidden_act = numkit::Act::tanh;  // keep the check away from relu kinks

  for (Aggregator agg : {Aggregator::gat, Aggregator::graphsage}) {
    Rng rng(13);
    CmaddpgActors actors(sim, arch, agg, rng);
    {
      auto ps = actors.params();
      testkit::jitter_biases(ps, rng);
      actors.set_params(ps);
    }

    const int batch = 2;
    Tensor2 states(batch, actors.state_width());
    MaskMat masks;
    for (int i = 0; i < batch; ++i) {
      env::Env e(sim);
      Rng er(500 + i);
      Rng mr(600 + i);
      e.reset(er, testkit::random_mask(sim.n_max, mr.uniform_int(1, sim.n_max), mr));
      auto s = e.state_vector();
      std::copy(s.begin(), s.end(), states.row(i));
      masks.push_back(e.active());
    }
    const Geometry geom = geometry_from_states(states, sim.n_max, sim);

    Rng mix_rng(14);
    Tensor2 mix(batch, actors.action_width());
    for (int i = 0; i < batch; ++i) {
      for (int c = 0; c < mix.cols(); ++c) mix(i, c) = mix_rng.uniform(-1.0, 1.0);
    }
    // Scale the lambda-slot upstream so the rate-chain path is exercised at
    // a comparable magnitude.
    auto params = actors.params();
    auto eval = [&]() {
      actors.set_params(params);
      auto cache = actors.make_cache();
      Tensor2 actions;
      actors.forward_batch(states, masks, geom, *cache, actions);
      double s = 0.0;
      for (int i = 0; i < batch; ++i) {
        for (int c = 0; c < actions.cols(); ++c) s += mix(i, c) * actions(i, c);
      }
      return s;
    };

    auto cache = actors.make_cache();
    Tensor2 actions;
    actors.forward_batch(states, masks, geom, *cache, actions);
    auto grads = numkit::zeros_like(params);
    actors.backward_batch(*cache, mix, grads);

    auto rep = testkit::fd_compare(params, grads, eval, 1e-6);
    actors.set_params(params);
    INFO("aggregator ", agg == Aggregator::gat ? "gat" : "gs",
         " max rel err = ", rep.max_rel_err);
    CHECK(rep.max_rel_err < 1e-3);
  }
}

TEST_CASE("checkpoint round trip and mismatch rejection") {
  auto sim = desk_sim();
  Rng rng(15);
  CmaddpgActors actors(sim, tiny_arch(), Aggregator::gat, rng);

  CheckpointMeta meta;
  meta.scheme = actors.kind();
  meta.arch = actors.arch();
  meta.n_max = sim.n_max;
  meta.n_min = sim.n_min;
  meta.seed = 15;
  meta.episodes_trained = 123;

  const std::string path = "/tmp/mecsim_test_ckpt.bin";
  save_checkpoint(path, meta, actors.params());
  auto ck = load_checkpoint(path);
  CHECK(ck.meta.scheme == "cmaddpg");
  CHECK(ck.meta.episodes_trained == 123);
  CHECK(ck.actor_params.same_architecture(actors.params()));
  CHECK(numkit::flatten(ck.actor_params) == numkit::flatten(actors.params()));

  // Loading into a mismatched architecture must fail loudly.
  ActorArch other = tiny_arch();
  other.feat_dim = 8;
  Rng rng2(16);
  CmaddpgActors wrong(sim, other, Aggregator::gat, rng2);
  CHECK_THROWS_AS(wrong.set_params(ck.actor_params), ContractError);
}

TEST_SUITE_END();
