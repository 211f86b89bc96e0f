#include <cmath>
#include <numbers>

#include "doctest.h"
#include "nams/autodiff/adam.hpp"
#include "nams/autodiff/graph.hpp"
#include "nams/autodiff/mlp.hpp"
#include "nams/autodiff/ops.hpp"
#include "nams/common/error.hpp"
#include "support/gradcheck.hpp"

using namespace nams;
using namespace nams::ad;

namespace {

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::matrix(r, c);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

/// Contracts an arbitrary node with a fixed random tensor to get a scalar.
NodeId project(Graph& g, NodeId x, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w(g.value(x).shape());
  for (auto& v : w.values()) v = rng.uniform(-1.0, 1.0);
  return sum(g, mul(g, x, g.input(w)));
}

}  // namespace

TEST_CASE("affine with zero weights gives zero output") {
  Graph g;
  Rng rng(1);
  NodeId x = g.input(random_matrix(rng, 3, 4));
  NodeId w = g.input(Tensor::matrix(4, 2));
  NodeId b = g.input(Tensor({2}, 0.0));
  NodeId y = affine(g, x, w, b);
  for (double v : g.value(y).values()) CHECK(v == 0.0);
}

TEST_CASE("leaky relu and sigmoid reference values") {
  Graph g;
  NodeId x = g.input(Tensor::row({-1.0, 2.0}));
  NodeId y = leaky_relu(g, x, 0.2);
  CHECK(g.value(y)[0] == doctest::Approx(-0.2));
  CHECK(g.value(y)[1] == doctest::Approx(2.0));
  NodeId s = sigmoid(g, g.input(Tensor::row({0.0})));
  CHECK(g.value(s)[0] == 0.5);
}

TEST_CASE("shape mismatch names the node") {
  Graph g;
  NodeId x = g.input(Tensor::matrix(2, 3), false, "features");
  NodeId w = g.input(Tensor::matrix(4, 2), false, "w");
  NodeId b = g.input(Tensor({2}, 0.0));
  try {
    affine(g, x, w, b, "encoder.l0");
    FAIL("expected InvalidArgument");
  } catch (const InvalidArgument& e) {
    std::string msg = e.what();
    CHECK(msg.find("encoder.l0") != std::string::npos);
    CHECK(msg.find("features") != std::string::npos);
  }
}

TEST_CASE("backward of x^2 at 3 is 6") {
  Graph g;
  NodeId x = g.input(Tensor::scalar(3.0), true);
  NodeId loss = sum(g, mul(g, x, x));
  g.backward(loss);
  CHECK(g.grad(x).item() == doctest::Approx(6.0));
}

TEST_CASE("constant loss has zero gradients and unreached parameters get zeros") {
  ModelParameters params;
  params.add("w", Tensor::matrix(2, 2, 1.0));
  params.add("unused", Tensor({3}, 1.0));
  Graph g;
  NodeId w = g.parameter(params, "w");
  NodeId c = g.input(Tensor::scalar(5.0));
  NodeId loss = add(g, c, scale(g, sum(g, w), 0.0));
  g.backward(loss);
  auto grads = g.parameter_grads(params);
  for (double v : grads.at("w").values()) CHECK(v == 0.0);
  for (double v : grads.at("unused").values()) CHECK(v == 0.0);
}

TEST_CASE("backward on a non-scalar node is an error") {
  Graph g;
  NodeId x = g.input(Tensor::matrix(2, 2), true);
  CHECK_THROWS_AS(g.backward(x), InvalidArgument);
}

TEST_CASE("two-layer MLP gradients match central differences") {
  Rng rng(7);
  std::vector<Tensor> leaves = {random_matrix(rng, 5, 4), random_matrix(rng, 4, 6), random_matrix(rng, 1, 6),
                                random_matrix(rng, 6, 3), random_matrix(rng, 1, 3), random_matrix(rng, 5, 3)};
  auto build = [](Graph& g, const std::vector<NodeId>& ids) {
    NodeId h = leaky_relu(g, affine(g, ids[0], ids[1], ids[2]), 0.2);
    NodeId y = affine(g, h, ids[3], ids[4]);
    return mse(g, y, ids[5]);
  };
  auto r = testing::check_gradients(build, leaves);
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("every layer kind passes the finite-difference check") {
  Rng rng(11);
  auto check = [](const testing::LossBuilder& b, std::vector<Tensor> leaves) {
    return testing::check_gradients(b, std::move(leaves)).max_relative_error;
  };
  Tensor x = random_matrix(rng, 6, 5);
  CHECK(check([](Graph& g, auto& ids) { return project(g, sigmoid(g, ids[0]), 1); }, {x}) < 1e-4);
  CHECK(check([](Graph& g, auto& ids) { return project(g, exp(g, ids[0]), 2); }, {x}) < 1e-4);
  CHECK(check([](Graph& g, auto& ids) { return project(g, relu(g, ids[0]), 3); }, {x}) < 1e-4);
  CHECK(check([](Graph& g, auto& ids) { return project(g, concat(g, {ids[0], ids[1]}), 4); },
              {x, random_matrix(rng, 6, 2)}) < 1e-4);
  CHECK(check([](Graph& g, auto& ids) { return project(g, split(g, ids[0], 2).second, 5); }, {x}) < 1e-4);
  CHECK(check(
            [](Graph& g, auto& ids) {
              BatchNormOptions opts;
              return project(g, batchnorm(g, ids[0], ids[1], ids[2], opts, nullptr, nullptr), 6);
            },
            {x, random_matrix(rng, 1, 5, 0.5, 1.5), random_matrix(rng, 1, 5)}) < 1e-4);
  CHECK(check(
            [](Graph& g, auto& ids) {
              Rng drop(99);
              return project(g, dropout(g, ids[0], 0.5, Mode::Train, drop), 7);
            },
            {x}) < 1e-4);
  Tensor probs = random_matrix(rng, 6, 5, 0.05, 0.95);
  Tensor targets = random_matrix(rng, 6, 5, 0.0, 1.0);
  CHECK(check([](Graph& g, auto& ids) { return bce(g, ids[0], ids[1]); }, {probs, targets}) < 1e-4);
  CHECK(check([](Graph& g, auto& ids) { return kl_gaussian(g, ids[0], ids[1]); },
              {x, random_matrix(rng, 6, 5, 0.3, 2.0)}) < 1e-4);
}

TEST_CASE("eval-mode batchnorm uses running statistics") {
  Tensor mean({2}, std::vector<double>{1.0, -1.0});
  Tensor var({2}, std::vector<double>{4.0, 1.0});
  Graph g;
  NodeId x = g.input(Tensor({1, 2}, std::vector<double>{3.0, 0.0}));
  NodeId gamma = g.input(Tensor({2}, 1.0));
  NodeId beta = g.input(Tensor({2}, 0.0));
  BatchNormOptions opts;
  opts.mode = Mode::Eval;
  NodeId y = batchnorm(g, x, gamma, beta, opts, &mean, &var);
  CHECK(g.value(y)[0] == doctest::Approx(1.0));
  CHECK(g.value(y)[1] == doctest::Approx(1.0));
}

TEST_CASE("train-mode batchnorm normalizes each feature") {
  Rng rng(3);
  Graph g;
  NodeId x = g.input(random_matrix(rng, 64, 4, -3.0, 5.0));
  NodeId gamma = g.input(Tensor({4}, 1.0));
  NodeId beta = g.input(Tensor({4}, 0.0));
  NodeId y = batchnorm(g, x, gamma, beta, BatchNormOptions{}, nullptr, nullptr);
  const Tensor& out = g.value(y);
  for (std::size_t c = 0; c < 4; ++c) {
    double m = 0.0, v = 0.0;
    for (std::size_t r = 0; r < 64; ++r) m += out(r, c);
    m /= 64.0;
    for (std::size_t r = 0; r < 64; ++r) v += (out(r, c) - m) * (out(r, c) - m);
    v /= 64.0;
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(v - 1.0) < 1e-6);
  }
}

TEST_CASE("train-mode batchnorm rejects a batch of one") {
  Graph g;
  NodeId x = g.input(Tensor::matrix(1, 3, 1.0));
  NodeId gamma = g.input(Tensor({3}, 1.0));
  NodeId beta = g.input(Tensor({3}, 0.0));
  CHECK_THROWS_AS(batchnorm(g, x, gamma, beta, BatchNormOptions{}, nullptr, nullptr), InvalidArgument);
}

TEST_CASE("dropout is identity in eval mode and keeps half the units in train mode") {
  Rng rng(5);
  Graph g;
  NodeId x = g.input(Tensor::matrix(1, 100000, 1.0));
  CHECK(dropout(g, x, 0.5, Mode::Eval, rng) == x);
  NodeId y = dropout(g, x, 0.5, Mode::Train, rng);
  std::size_t kept = 0;
  std::size_t wrong_scale = 0;
  for (double v : g.value(y).values()) {
    if (v != 0.0) {
      ++kept;
      if (v != 2.0) ++wrong_scale;
    }
  }
  CHECK(wrong_scale == 0);
  double frac = static_cast<double>(kept) / 1e5;
  CHECK(frac == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(frac - 0.5) < 0.01);
}

TEST_CASE("kl_gaussian closed form") {
  Graph g;
  NodeId zero = kl_gaussian(g, g.input(Tensor::row({0.0, 0.0})), g.input(Tensor::row({1.0, 1.0})));
  CHECK(g.value(zero).item() == 0.0);
  NodeId one = kl_gaussian(g, g.input(Tensor::row({1.0})), g.input(Tensor::row({1.0})));
  CHECK(g.value(one).item() == doctest::Approx(0.5));
}

TEST_CASE("kl_gaussian is non-negative and zero only at the standard normal") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    Graph g;
    Tensor mu = random_matrix(rng, 2, 3, -2.0, 2.0);
    Tensor sigma = random_matrix(rng, 2, 3, 0.1, 3.0);
    double kl = g.value(kl_gaussian(g, g.input(mu), g.input(sigma))).item();
    CHECK(kl > 0.0);
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged and counts the step") {
  ModelParameters params;
  params.add("w", Tensor::row({1.5, -2.0}));
  adam_step(params, params.zero_grads(), AdamConfig{0.01});
  CHECK(params.get("w")[0] == 1.5);
  CHECK(params.get("w")[1] == -2.0);
  CHECK(params.entry("w").step == 1);
}

TEST_CASE("adam: first step on f(w)=w moves by the learning rate") {
  ModelParameters params;
  params.add("w", Tensor::scalar(0.0));
  ParameterGrads grads{{"w", Tensor::scalar(1.0)}};
  adam_step(params, grads, AdamConfig{0.01});
  CHECK(params.get("w").item() == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("adam: converges on (w-2)^2 within 500 steps") {
  ModelParameters params;
  params.add("w", Tensor::scalar(0.0));
  AdamConfig cfg{0.1};
  for (int i = 0; i < 500; ++i) {
    double w = params.get("w").item();
    adam_step(params, {{"w", Tensor::scalar(2.0 * (w - 2.0))}}, cfg);
  }
  CHECK(std::abs(params.get("w").item() - 2.0) < 1e-3);
}

TEST_CASE("adam: non-finite gradient names the parameter") {
  ModelParameters params;
  params.add("encoder.l0.weight", Tensor::scalar(0.0));
  ParameterGrads grads{{"encoder.l0.weight", Tensor::scalar(std::nan(""))}};
  try {
    adam_step(params, grads, AdamConfig{});
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("encoder.l0.weight") != std::string::npos);
  }
  CHECK_THROWS_AS((AdamConfig{0.01, 1.0}).validate(), InvalidArgument);
}

TEST_CASE("mlp parameter gradients match finite differences and are deterministic") {
  MlpSpec spec;
  spec.name = "net";
  spec.input_dim = 3;
  spec.hidden = {5, 4};
  spec.output_dim = 2;
  spec.dropout = 0.5;
  Mlp mlp(spec);
  ModelParameters params;
  Rng init(2);
  mlp.init(params, init);
  Rng data(4);
  Tensor x = random_matrix(data, 6, 3);
  Tensor y = random_matrix(data, 6, 2);

  auto loss_of = [&](ModelParameters& p, ParameterGrads* grads) {
    ModelParameters scratch = p;  // running stats must not drift between evaluations
    Graph g;
    Rng drop(8);
    NodeId out = mlp.forward(g, g.input(x), scratch, Mode::Train, &drop);
    NodeId loss = mse(g, out, g.input(y));
    if (grads) {
      g.backward(loss);
      *grads = g.parameter_grads(scratch);
    }
    return g.value(loss).item();
  };

  ParameterGrads grads;
  double l0 = loss_of(params, &grads);
  ParameterGrads again;
  CHECK(loss_of(params, &again) == l0);
  for (const auto& [name, t] : grads) CHECK(t.values() == again.at(name).values());

  double worst = 0.0;
  for (auto& e : params.entries()) {
    if (!e.trainable) continue;
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      double saved = e.value[i];
      e.value[i] = saved + 1e-5;
      double up = loss_of(params, nullptr);
      e.value[i] = saved - 1e-5;
      double down = loss_of(params, nullptr);
      e.value[i] = saved;
      worst = std::max(worst, testing::relative_error(grads.at(e.name)[i], (up - down) / 2e-5));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("parameters survive a JSON round trip") {
  ModelParameters params;
  Rng rng(9);
  Mlp mlp(MlpSpec{"m", 4, {3}, 2});
  mlp.init(params, rng);
  auto restored = ModelParameters::from_json(nlohmann::json::parse(params.to_json().dump()));
  REQUIRE(restored.size() == params.size());
  for (const auto& e : params.entries()) {
    CHECK(restored.get(e.name).values() == e.value.values());
    CHECK(restored.get(e.name).shape() == e.value.shape());
    CHECK(restored.entry(e.name).trainable == e.trainable);
  }
  CHECK_THROWS_AS(params.add("m.l0.weight", Tensor::scalar(0)), InvalidArgument);
}
