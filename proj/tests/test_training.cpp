#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mecsim/agents/cmaddpg.hpp"
#include "mecsim/errors.hpp"
#include "mecsim/train/trainer.hpp"

using namespace mecsim;
using namespace mecsim::train;
using agents::ActorArch;
using agents::Aggregator;
using agents::CmaddpgActors;
using numkit::Rng;
using testkit::desk_sim;

namespace {

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
  a.critic_hidden = {10};
  return a;
}

/// Rolls the policy in a fresh environment and collects transitions exactly
/// the way the training loop stores them.
std::vector<TransitionSample> collect_transitions(CmaddpgActors& policy,
                                                  const env::SimConfig& sim, int count,
                                                  std::uint64_t seed) {
  std::vector<TransitionSample> out;
  Rng rng(seed);
  env::Env e(sim);
  while (static_cast<int>(out.size()) < count) {
    const int n = rng.uniform_int(sim.n_min, sim.n_max);
    auto mask = testkit::random_mask(sim.n_max, n, rng);
    e.reset(rng, mask);
    auto s = e.state_vector();
    for (int t = 0; t < sim.slots && static_cast<int>(out.size()) < count; ++t) {
      auto bundle = policy.act(e);
      bundle = inject_exploration(bundle, 0.1, rng, e);
      auto a = bundle.pack(sim.f_max, sim.v_max);
      auto outc = e.step(bundle, rng);
      auto s_next = e.state_vector();
      out.push_back({s, a, outc.reward, s_next, mask});
      s = std::move(s_next);
    }
  }
  return out;
}

std::vector<const TransitionSample*> ptrs(const std::vector<TransitionSample>& v) {
  std::vector<const TransitionSample*> p;
  for (const auto& t : v) p.push_back(&t);
  return p;
}

}  // namespace

TEST_SUITE_BEGIN("training");

TEST_CASE("replay buffer: capacity one, FIFO eviction, empty sampling") {
  ReplayBuffer buf(1);
  TransitionSample t;
  t.r = 42.0;
  buf.push(t);
  Rng rng(1);
  CHECK(buf.sample(rng).r == 42.0);

  ReplayBuffer fifo(3);
  for (int i = 0; i < 4; ++i) {
    TransitionSample ti;
    ti.r = i;
    fifo.push(ti);
  }
  CHECK(fifo.size() == 3);
  bool saw_zero = false;
  for (std::size_t i = 0; i < fifo.size(); ++i) saw_zero |= fifo.at(i).r == 0.0;
  CHECK_FALSE(saw_zero);  // oldest evicted

  ReplayBuffer empty(5);
  CHECK_THROWS_AS(empty.sample(rng), StateError);
}

TEST_CASE("replay sampling is uniform (chi-square at 99%)") {
  ReplayBuffer buf(10);
  for (int i = 0; i < 10; ++i) {
    TransitionSample t;
    t.r = i;
    buf.push(t);
  }
  Rng rng(7);
  const int draws = 100000;
  std::vector<int> counts(10, 0);
  for (int i = 0; i < draws; ++i) ++counts[static_cast<int>(buf.sample(rng).r)];
  const double expected = draws / 10.0;
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 21.666);  // chi-square(9 dof) at the 0.99 quantile
}

TEST_CASE("inject_exploration: zero variance is the identity, projections hold") {
  auto sim = desk_sim();
  Rng rng(2);
  CmaddpgActors actors(sim, tiny_arch(), Aggregator::gat, rng);
  env::Env e(sim);
  Rng er(3);
  e.reset(er, testkit::full_mask(sim.n_max));
  auto bundle = actors.act(e);

  Rng nr(4);
  auto same = inject_exploration(bundle, 0.0, nr, e);
  CHECK(same.v == bundle.v);
  CHECK(same.eta == bundle.eta);
  CHECK(same.beta == bundle.beta);
  CHECK(same.f == bundle.f);
  CHECK(same.lambda == bundle.lambda);

  for (int trial = 0; trial < 50; ++trial) {
    auto noised = inject_exploration(bundle, 0.45, nr, e);
    CHECK(noised.v >= 0.0);
    CHECK(noised.v <= sim.v_max);
    CHECK(noised.beta >= 0.0);
    CHECK(noised.beta <= 3.14159266);
    double fs = 0.0;
    for (int j = 0; j < sim.n_max; ++j) {
      if (!noised.active[j]) continue;
      fs += noised.f[j];
      CHECK(noised.lambda[j] >= 0.0);
      CHECK(noised.lambda[j] <= noised.lambda_cap[j]);
    }
    CHECK(std::fabs(fs - sim.f_max) <= 1e-6 * sim.f_max);
    // The noised bundle must execute without constraint errors.
    env::Env copy = e;
    Rng sr(100 + trial);
    auto out = copy.step(noised, sr);
    for (int j = 0; j < sim.n_max; ++j) {
      if (noised.active[j]) CHECK(out.latency[j] <= sim.tau + 1e-9);
    }
  }
}

TEST_CASE("inject_exploration: pre-clamp noise variance matches sigma2") {
  auto sim = desk_sim();
  Rng rng(5);
  CmaddpgActors actors(sim, tiny_arch(), Aggregator::gat, rng);
  env::Env e(sim);
  Rng er(6);
  e.reset(er, testkit::full_mask(sim.n_max));
  auto bundle = actors.act(e);

  // Small variance keeps the raws away from the clamps, so the observed
  // deltas are the raw gaussian noise.
  const double sigma2 = 1e-4;
  Rng nr(7);
  double acc = 0.0, acc2 = 0.0;
  const int trials = 20000;
  for (int i = 0; i < trials; ++i) {
    auto noised = inject_exploration(bundle, sigma2, nr, e);
    const double d = noised.traj_raw[0] - bundle.traj_raw[0];
    acc += d;
    acc2 += d * d;
  }
  const double mean = acc / trials;
  const double var = acc2 / trials - mean * mean;
  CHECK(var == doctest::Approx(sigma2).epsilon(0.05));
}

TEST_CASE("critic_update: myopic target, stationary point, loss decrease") {
  auto sim = desk_sim(2, 3);
  Rng rng(8);
  CmaddpgActors actors(sim, tiny_arch(), Aggregator::gat, rng);
  auto transitions = collect_transitions(actors, sim, 16, 9);
  auto batch = ptrs(transitions);

  TrainConfig cfg;
  cfg.discount = 0.0;
  cfg.batch = 16;
  cfg.lr_critic = 0.0;  // evaluate the loss without moving
  cfg.episodes = 1;
  Trainer tr(actors, sim, tiny_arch(), cfg, Rng(10));

  SUBCASE("gamma = 0 regresses on the reward alone") {
    const double loss = tr.critic_update(batch);
    double want = 0.0;
    for (const auto* t : batch) {
      const double q = tr.critic().value(t->s, t->a);
      want += (q - t->r) * (q - t->r);
    }
    want /= batch.size();
    CHECK(loss == doctest::Approx(want).epsilon(1e-12));
  }

  SUBCASE("a critic that already equals the target sees zero loss and stays put") {
    // Zero weights and a bias equal to the shared reward value make Q == y.
    auto params = tr.critic().params();
    params.fill(0.0);
    const double c = -0.25;
    params.entries.back().value(0, 0) = c;
    tr.critic().set_params(params);
    auto fixed = transitions;
    for (auto& t : fixed) t.r = c;
    auto fb = ptrs(fixed);
    const double loss = tr.critic_update(fb);
    CHECK(loss == 0.0);
    CHECK(numkit::flatten(tr.critic().params()) == numkit::flatten(params));
  }

  SUBCASE("descent on a frozen batch reduces the loss") {
    TrainConfig cfg2;
    cfg2.discount = 0.0;
    cfg2.batch = 16;
    cfg2.lr_critic = 1e-3;
    cfg2.optimizer = "adam";
    Rng rng2(11);
    CmaddpgActors actors2(sim, tiny_arch(), Aggregator::gat, rng2);
    Trainer tr2(actors2, sim, tiny_arch(), cfg2, Rng(12));
    const double first = tr2.critic_update(batch);
    double last = first;
    for (int i = 0; i < 100; ++i) last = tr2.critic_update(batch);
    CHECK(last < first);
  }
}

TEST_CASE("actor_update: zero learning rate keeps parameters") {
  auto sim = desk_sim(2, 3);
  Rng rng(13);
  CmaddpgActors actors(sim, tiny_arch(), Aggregator::gat, rng);
  auto transitions = collect_transitions(actors, sim, 8, 14);
  auto batch = ptrs(transitions);

  TrainConfig cfg;
  cfg.batch = 8;
  cfg.lr_actor = 0.0;
  Trainer tr(actors, sim, tiny_arch(), cfg, Rng(15));
  auto before = numkit::flatten(actors.params());
  tr.actor_update(batch);
  CHECK(numkit::flatten(actors.params()) == before);
}

TEST_CASE("actor gradient matches finite differences through the critic") {
  auto sim = desk_sim(2, 3);
  ActorArch arch = tiny_arch();
  arch.hidden_act = numkit::Act::tanh;
  Rng rng(16);
  CmaddpgActors actors(sim, arch, Aggregator::gat, rng);
  {
    auto ps = actors.params();
    testkit::jitter_biases(ps, rng);
    actors.set_params(ps);
  }
  auto transitions = collect_transitions(actors, sim, 3, 17);
  auto batch = ptrs(transitions);

  TrainConfig cfg;
  cfg.batch = 3;
  Trainer tr(actors, sim, arch, cfg, Rng(18));
  auto [analytic, objective] = tr.actor_gradient(batch);

  auto params = actors.params();
  auto eval = [&]() {
    actors.set_params(params);
    auto [g, j] = tr.actor_gradient(batch);
    return j;
  };
  auto rep = testkit::fd_compare(params, analytic, eval, 1e-6);
  actors.set_params(params);
  INFO("max rel err = ", rep.max_rel_err);
  CHECK(rep.max_rel_err < 1e-3);
  CHECK(std::isfinite(objective));
}

TEST_CASE("masked action slots contribute no actor gradient") {
  auto sim = desk_sim(1, 4);
  Rng rng(19);
  CmaddpgActors actors(sim, tiny_arch(), Aggregator::gat, rng);

  env::Env e(sim);
  Rng er(20);
  std::vector<std::uint8_t> mask{1, 0, 1, 0};
  e.reset(er, mask);
  numkit::Tensor2 states(1, actors.state_width());
  auto s = e.state_vector();
  std::copy(s.begin(), s.end(), states.row(0));
  agents::MaskMat masks{mask};
  auto geom = agents::geometry_from_states(states, sim.n_max, sim);
  auto cache = actors.make_cache();
  numkit::Tensor2 actions;
  actors.forward_batch(states, masks, geom, *cache, actions);

  // Upstream only on the masked devices' slots: every parameter gradient
  // stays exactly zero.
  numkit::Tensor2 d_a(1, actors.action_width());
  d_a.fill(0.0);
  const int nm = sim.n_max;
  d_a(0, 3 + 1) = 1.0;       // f slot of inactive device 1
  d_a(0, 3 + nm + 3) = 1.0;  // lambda slot of inactive device 3
  auto grads = numkit::zeros_like(actors.params());
  actors.backward_batch(*cache, d_a, grads);
  for (const auto& entry : grads.entries) {
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      CHECK(entry.value.data()[i] == 0.0);
    }
  }
}

TEST_CASE("soft updates: exact copies at start, exact blend afterwards") {
  auto sim = desk_sim(2, 3);
  Rng rng(21);
  CmaddpgActors actors(sim, tiny_arch(), Aggregator::gat, rng);
  TrainConfig cfg;
  cfg.batch = 4;
  cfg.target_rate_actor = 0.25;
  cfg.target_rate_critic = 0.5;
  Trainer tr(actors, sim, tiny_arch(), cfg, Rng(22));

  CHECK(numkit::flatten(tr.target_policy().params()) == numkit::flatten(actors.params()));
  CHECK(numkit::flatten(tr.target_critic().params()) == numkit::flatten(tr.critic().params()));

  auto transitions = collect_transitions(actors, sim, 4, 23);
  auto batch = ptrs(transitions);
  auto old_target = tr.target_policy().params();
  auto old_ct = tr.target_critic().params();
  tr.critic_update(batch);
  tr.actor_update(batch);
  auto want_actor = numkit::soft_blend(old_target, actors.params(), 0.25);
  auto want_critic = numkit::soft_blend(old_ct, tr.critic().params(), 0.5);
  tr.soft_update_targets();
  CHECK(numkit::flatten(tr.target_policy().params()) == numkit::flatten(want_actor));
  CHECK(numkit::flatten(tr.target_critic().params()) == numkit::flatten(want_critic));
}

TEST_CASE("train loop: accounting, noise schedule, determinism") {
  auto sim = desk_sim(1, 2);
  sim.slots = 1;

  auto run_records = [&](std::uint64_t seed, long episodes) {
    Rng rng(seed);
    CmaddpgActors actors(sim, tiny_arch(), Aggregator::gat, rng);
    TrainConfig cfg;
    cfg.episodes = episodes;
    cfg.batch = 4;
    cfg.sigma2_init = 0.45;
    cfg.sigma2_decay = 0.9;
    cfg.seed = seed;
    Trainer tr(actors, sim, tiny_arch(), cfg, rng);
    std::vector<EpisodeRecord> recs;
    tr.run([&](const EpisodeRecord& r) { recs.push_back(r); });
    return std::make_tuple(recs, tr.critic_updates(), tr.actor_updates(), tr.buffer().size());
  };

  auto [recs, cu, au, bs] = run_records(31, 1);
  CHECK(recs.size() == 1);
  CHECK(cu == 1);  // exactly one update of each net for E = 1, T = 1
  CHECK(au == 1);
  CHECK(bs == 1);
  CHECK(recs[0].sigma2 == doctest::Approx(0.45 * 0.9).epsilon(1e-15));

  auto [recs3, cu3, au3, bs3] = run_records(32, 3);
  CHECK(recs3[2].sigma2 == doctest::Approx(0.45 * 0.9 * 0.9 * 0.9).epsilon(1e-15));

  auto [ra, cua, aua, bsa] = run_records(42, 3);
  auto [rb, cub, aub, bsb] = run_records(42, 3);
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    CHECK(ra[i].sum_energy == rb[i].sum_energy);
    CHECK(ra[i].reward == rb[i].reward);
    CHECK(ra[i].critic_loss == rb[i].critic_loss);
    CHECK(ra[i].actor_objective == rb[i].actor_objective);
    CHECK(ra[i].n_active == rb[i].n_active);
  }
}

TEST_CASE("stored transitions are validated on push") {
  auto sim = desk_sim(1, 2);
  Rng rng(33);
  CmaddpgActors actors(sim, tiny_arch(), Aggregator::gat, rng);
  TrainConfig cfg;
  Trainer tr(actors, sim, tiny_arch(), cfg, Rng(34));

  TransitionSample bad;
  bad.s.assign(actors.state_width(), 0.1);
  bad.a.assign(actors.action_width(), 0.0);
  bad.s_next.assign(actors.state_width(), 0.0);
  bad.mask = {1, 0};
  bad.r = 0.0;
  // Active fields but the masked slot of the state is nonzero.
  CHECK_THROWS_AS(tr.store_transition(bad), TrainingError);

  bad.s.assign(actors.state_width(), 0.0);
  bad.r = std::nan("");
  CHECK_THROWS_AS(tr.store_transition(bad), TrainingError);
}

TEST_SUITE_END();
