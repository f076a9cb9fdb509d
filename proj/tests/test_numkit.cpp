#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mecsim/errors.hpp"
#include "mecsim/numkit/net.hpp"
#include "mecsim/numkit/params.hpp"
#include "mecsim/numkit/rng.hpp"
#include "mecsim/numkit/tensor.hpp"

using namespace mecsim;
using namespace mecsim::numkit;

TEST_SUITE_BEGIN("numkit");

TEST_CASE("gemm variants against hand results") {
  Tensor2 a(2, 3), b(3, 2);
  double av[] = {1, 2, 3, 4, 5, 6};
  double bv[] = {7, 8, 9, 10, 11, 12};
  std::copy(av, av + 6, a.data());
  std::copy(bv, bv + 6, b.data());

  Tensor2 c(2, 2);
  gemm_nn(a, b, c);
  CHECK(c(0, 0) == 58.0);
  CHECK(c(0, 1) == 64.0);
  CHECK(c(1, 0) == 139.0);
  CHECK(c(1, 1) == 154.0);

  // A^T * A and A * A^T consistency with gemm_nn on explicit transposes.
  Tensor2 at(3, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) at(j, i) = a(i, j);
  Tensor2 c1(3, 3), c2(3, 3);
  gemm_tn(a, a, c1);
  gemm_nn(at, a, c2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(c1(i, j) == c2(i, j));

  Tensor2 d1(2, 2), d2(2, 2);
  gemm_nt(a, a, d1);
  gemm_nn(a, at, d2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(d1(i, j) == d2(i, j));

  Tensor2 bad(4, 4);
  CHECK_THROWS_AS(gemm_nn(a, bad, c), ContractError);
}

TEST_CASE("rng determinism and degenerate variance") {
  Rng r1(1234), r2(1234);
  auto v1 = r1.gaussian_vec(0.0, 1.0, 64);
  auto v2 = r2.gaussian_vec(0.0, 1.0, 64);
  CHECK(v1 == v2);

  Rng r3(99);
  auto c = r3.gaussian_vec(0.3, 0.0, 4);
  for (double x : c) CHECK(x == 0.3);

  CHECK_THROWS_AS(Rng(1).gaussian(0.0, -1.0), ContractError);
}

TEST_CASE("rng sample mean matches law of large numbers") {
  Rng rng(2024);
  const int n = 1'000'000;
  const double mean = 0.7, var = 2.25;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += rng.gaussian(mean, var);
  const double sample_mean = acc / n;
  const double bound = 4.0 * std::sqrt(var) / std::sqrt(static_cast<double>(n));
  CHECK(std::fabs(sample_mean - mean) < bound);
}

TEST_CASE("rng uniform_int covers range") {
  Rng rng(7);
  int lo = 10, hi = 10;
  CHECK(rng.uniform_int(lo, hi) == 10);
  bool seen0 = false, seen4 = false;
  for (int i = 0; i < 200; ++i) {
    int v = rng.uniform_int(0, 4);
    CHECK(v >= 0);
    CHECK(v <= 4);
    seen0 |= v == 0;
    seen4 |= v == 4;
  }
  CHECK(seen0);
  CHECK(seen4);
}

TEST_CASE("forward: identity and relu single layers") {
  Rng rng(1);
  DenseNet net("t", 2, {}, 2, Act::identity, Act::identity, rng);
  net.weight(0).fill(0.0);
  net.weight(0)(0, 0) = 1.0;
  net.weight(0)(1, 1) = 1.0;
  net.bias(0).fill(0.0);
  auto y = net.forward1(std::vector<double>{-1.0, 2.0});
  CHECK(y[0] == -1.0);
  CHECK(y[1] == 2.0);

  DenseNet relu_net("t2", 2, {}, 2, Act::identity, Act::relu, rng);
  relu_net.weight(0).fill(0.0);
  relu_net.weight(0)(0, 0) = 1.0;
  relu_net.weight(0)(1, 1) = 1.0;
  relu_net.bias(0).fill(0.0);
  auto y2 = relu_net.forward1(std::vector<double>{-1.0, 2.0});
  CHECK(y2[0] == 0.0);
  CHECK(y2[1] == 2.0);
}

TEST_CASE("forward matches scalar reimplementation on a random 3-layer net") {
  Rng rng(42);
  DenseNet net("f", 5, {7, 6}, 4, Act::tanh, Act::identity, rng);
  std::vector<double> x(5);
  for (auto& v : x) v = rng.uniform(-2.0, 2.0);
  auto got = net.forward1(x);
  auto want = testkit::scalar_forward(net, x);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(std::fabs(got[i] - want[i]) <=
          1e-12 * std::max({std::fabs(got[i]), std::fabs(want[i]), 1.0}));
  }
}

TEST_CASE("forward determinism is bitwise") {
  Rng rng(3);
  DenseNet net("d", 4, {8, 8}, 3, Act::relu, Act::tanh, rng);
  std::vector<double> x{0.1, -0.4, 2.0, 0.7};
  auto a = net.forward1(x);
  auto b = net.forward1(x);
  CHECK(a == b);
}

TEST_CASE("forward rejects wrong input width, backward needs a cache") {
  Rng rng(4);
  DenseNet net("e", 3, {4}, 2, Act::relu, Act::identity, rng);
  Tensor2 bad(1, 5);
  CHECK_THROWS_AS(net.forward(bad), ContractError);

  DenseNet::Cache cache;
  Tensor2 up(1, 2);
  ParamSet grads = zeros_like(net.param_set());
  CHECK_THROWS_AS(net.backward(cache, up, grads, 0), StateError);
}

TEST_CASE("backward: linear layer gradients are g x^T and g") {
  Rng rng(5);
  DenseNet net("lin", 3, {}, 2, Act::identity, Act::identity, rng);
  Tensor2 x(1, 3);
  x(0, 0) = 0.5;
  x(0, 1) = -1.5;
  x(0, 2) = 2.0;
  DenseNet::Cache cache;
  net.forward(x, &cache);
  Tensor2 g(1, 2);
  g(0, 0) = 2.0;
  g(0, 1) = -3.0;
  ParamSet grads = zeros_like(net.param_set());
  Tensor2 dx = net.backward(cache, g, grads, 0);

  const Tensor2& dw = grads.entries[0].value;  // in x out
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) CHECK(dw(i, j) == x(0, i) * g(0, j));
  const Tensor2& db = grads.entries[1].value;
  CHECK(db(0, 0) == 2.0);
  CHECK(db(0, 1) == -3.0);
  // dx = g W^T
  for (int i = 0; i < 3; ++i) {
    double want = g(0, 0) * net.weight(0)(i, 0) + g(0, 1) * net.weight(0)(i, 1);
    CHECK(dx(0, i) == doctest::Approx(want).epsilon(1e-15));
  }
}

TEST_CASE("backward: zero upstream gives zero gradients") {
  Rng rng(6);
  DenseNet net("z", 4, {5}, 3, Act::tanh, Act::sigmoid, rng);
  Tensor2 x(2, 4);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) x(r, c) = rng.uniform(-1, 1);
  DenseNet::Cache cache;
  net.forward(x, &cache);
  Tensor2 up(2, 3);
  ParamSet grads = zeros_like(net.param_set());
  net.backward(cache, up, grads, 0);
  for (const auto& e : grads.entries) {
    for (std::size_t i = 0; i < e.value.size(); ++i) CHECK(e.value.data()[i] == 0.0);
  }
}

TEST_CASE("gradient check: analytic vs central differences on random nets") {
  // Fixed master seed; activations drawn per net. Architectures stay under
  // 1000 parameters.
  Rng master(20240001);
  const Act acts[] = {Act::tanh, Act::sigmoid, Act::relu, Act::leaky_relu};
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int in = master.uniform_int(2, 8);
    const int out = master.uniform_int(1, 5);
    std::vector<int> hidden;
    const int depth = master.uniform_int(0, 2);
    for (int d = 0; d < depth; ++d) hidden.push_back(master.uniform_int(2, 12));
    const Act hact = acts[master.uniform_int(0, 3)];
    DenseNet net("g" + std::to_string(trial), in, hidden, out, hact, Act::identity, master);
    REQUIRE(net.param_count() <= 1000);

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
    ParamSet analytic = zeros_like(params);
    net.backward(cache, up, analytic, 0);

    auto rep = testkit::fd_compare(params, analytic, eval);
    worst = std::max(worst, rep.max_rel_err);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("sgd_step arithmetic and linearity") {
  ParamSet p;
  p.entries.push_back({"w", Tensor2(1, 1)});
  p.entries[0].value(0, 0) = 1.0;
  ParamSet g = zeros_like(p);
  g.entries[0].value(0, 0) = 0.5;

  ParamSet stepped = sgd_step(p, g, 0.1);
  CHECK(stepped.entries[0].value(0, 0) == doctest::Approx(0.95).epsilon(1e-15));

  ParamSet frozen = sgd_step(p, g, 0.0);
  CHECK(frozen.entries[0].value(0, 0) == 1.0);

  ParamSet twice = sgd_step(sgd_step(p, g, 0.1), g, 0.1);
  ParamSet once = sgd_step(p, g, 0.2);
  CHECK(twice.entries[0].value(0, 0) == doctest::Approx(once.entries[0].value(0, 0)));

  ParamSet wrong;
  wrong.entries.push_back({"w", Tensor2(2, 1)});
  CHECK_THROWS_AS(sgd_step(p, wrong, 0.1), ContractError);
}

TEST_CASE("soft_blend boundaries and midpoint") {
  ParamSet target;
  target.entries.push_back({"w", Tensor2(2, 2)});
  ParamSet online = target;
  online.entries[0].value.fill(2.0);

  ParamSet full = soft_blend(target, online, 1.0);
  CHECK(full.entries[0].value(1, 1) == 2.0);

  ParamSet none = soft_blend(target, online, 0.0);
  CHECK(none.entries[0].value(1, 1) == 0.0);

  ParamSet mid = soft_blend(target, online, 0.5);
  CHECK(mid.entries[0].value(0, 0) == 1.0);

  CHECK_THROWS_AS(soft_blend(target, online, 1.5), ContractError);
  CHECK_THROWS_AS(soft_blend(target, online, -0.1), ContractError);
}

TEST_CASE("adam step moves against the gradient") {
  ParamSet p;
  p.entries.push_back({"w", Tensor2(1, 2)});
  p.entries[0].value(0, 0) = 1.0;
  p.entries[0].value(0, 1) = -1.0;
  ParamSet g = zeros_like(p);
  g.entries[0].value(0, 0) = 0.3;
  g.entries[0].value(0, 1) = -0.2;
  AdamState st;
  adam_step_inplace(p, g, 1e-2, st);
  CHECK(p.entries[0].value(0, 0) < 1.0);
  CHECK(p.entries[0].value(0, 1) > -1.0);
  CHECK(st.t == 1);
}

TEST_CASE("flatten/unflatten round trip") {
  Rng rng(8);
  DenseNet net("r", 3, {4}, 2, Act::tanh, Act::identity, rng);
  ParamSet p = net.param_set();
  auto flat = flatten(p);
  ParamSet q = zeros_like(p);
  unflatten(flat, q);
  CHECK(p.same_architecture(q));
  CHECK(flatten(q) == flat);
}

TEST_SUITE_END();
