#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "nams/autodiff/ops.hpp"
#include "nams/common/error.hpp"
#include "nams/core/population.hpp"
#include "nams/core/training.hpp"
#include "nams/sim/simulator.hpp"
#include "support/gradcheck.hpp"

using namespace nams;
using namespace nams::core;

namespace {

const sim::DesignSpace kSmall{4, 4};

NamsConfig small_config(std::size_t feature_dim = 6) {
  NamsConfig c;
  c.feature_dim = feature_dim;
  c.hidden = {32, 32};
  return c;
}

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::matrix(r, c);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

std::vector<sim::DiscreteDesign> all_designs(const sim::DesignSpace& s) {
  std::vector<sim::DiscreteDesign> out;
  for (int f = 0; f < s.flat_count; ++f)
    for (int k = 0; k < s.sloped_count; ++k) out.push_back({f, k});
  return out;
}

/// Random orthonormal 10x10 matrix by Gram-Schmidt.
Tensor orthonormal(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> cols;
  while (cols.size() < n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    for (const auto& c : cols) {
      double d = std::inner_product(v.begin(), v.end(), c.begin(), 0.0);
      for (std::size_t i = 0; i < n; ++i) v[i] -= d * c[i];
    }
    double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (auto& x : v) x /= norm;
    cols.push_back(v);
  }
  Tensor a = Tensor::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = cols[j][i];
  return a;
}

SearchCandidate cand(int restart, double loss, sim::DiscreteDesign d) {
  SearchCandidate c;
  c.restart = restart;
  c.loss = loss;
  c.design = d;
  c.z = {static_cast<double>(restart)};
  return c;
}

}  // namespace

TEST_CASE("encode: reparameterization identities") {
  NamsModel model(small_config(), kSmall, 1);
  Rng rng(2);
  auto designs = all_designs(kSmall);
  Tensor d = design_matrix(designs, kSmall);

  LatentCode zero_noise = model.encode(d, Tensor::matrix(designs.size(), 10));
  CHECK(zero_noise.z.values() == zero_noise.mu.values());

  Tensor e = random_matrix(rng, designs.size(), 10);
  LatentCode code = model.encode(d, e);
  for (std::size_t i = 0; i < code.z.size(); ++i) {
    CHECK(code.sigma[i] > 0.0);
    CHECK(std::isfinite(code.sigma[i]));
    CHECK(code.z[i] == doctest::Approx(code.mu[i] + e[i] * code.sigma[i]).epsilon(1e-12));
  }

  // Zero encoder weights: mu = 0, log sigma^2 = 0, so z = e.
  for (auto& entry : model.params().entries()) {
    if (entry.name.rfind("encoder.", 0) == 0 && entry.name.find("running_var") == std::string::npos) {
      entry.value.fill(0.0);
    }
  }
  LatentCode zeroed = model.encode(d, e);
  for (std::size_t i = 0; i < e.size(); ++i) {
    CHECK(zeroed.mu[i] == 0.0);
    CHECK(zeroed.sigma[i] == 1.0);
    CHECK(zeroed.z[i] == e[i]);
  }
}

TEST_CASE("encode: sigma stays positive for random weights") {
  NamsModel model(small_config(), kSmall, 3);
  Rng rng(4);
  for (auto& entry : model.params().entries())
    if (entry.trainable) for (auto& v : entry.value.values()) v = rng.uniform(-1.0, 1.0);
  Tensor d = design_matrix(all_designs(kSmall), kSmall);
  LatentCode code = model.encode(d, Tensor::matrix(16, 10));
  for (double s : code.sigma.values()) CHECK((s > 0.0 && std::isfinite(s)));
}

TEST_CASE("reparameterization gradients match finite differences") {
  Rng rng(5);
  Tensor e = random_matrix(rng, 3, 10);
  Tensor mu = random_matrix(rng, 3, 10);
  Tensor sigma = random_matrix(rng, 3, 10, 0.1, 2.0);
  for (std::size_t i = 0; i < 30; ++i) {
    // z_i alone as the loss: dz_i/dmu = unit vector, dz_i/dsigma = e_i unit vector.
    ad::Graph g;
    NodeId m = g.input(mu, true);
    NodeId s = g.input(sigma, true);
    NodeId z = ad::add(g, m, ad::mul(g, g.input(e), s));
    Tensor pick = Tensor::matrix(3, 10);
    pick[i] = 1.0;
    g.backward(ad::sum(g, ad::mul(g, z, g.input(pick))));
    for (std::size_t j = 0; j < 30; ++j) {
      CHECK(g.grad(m)[j] == (i == j ? 1.0 : 0.0));
      CHECK(g.grad(s)[j] == doctest::Approx(i == j ? e[i] : 0.0));
    }
  }
  auto result = testing::check_gradients(
      [&](ad::Graph& g, const std::vector<NodeId>& in) {
        NodeId z = ad::add(g, in[0], ad::mul(g, g.input(e), in[1]));
        return ad::sum_squares(g, z);
      },
      {mu, sigma});
  CHECK(result.max_relative_error < 1e-6);
}

TEST_CASE("autoencoder-only training recovers every design") {
  NamsConfig c = small_config();
  c.hidden = {64, 64};
  c.lambda_p = 0.0;
  c.lambda_kld = 0.0;
  NamsModel model(c, kSmall, 11);
  std::vector<TrainingExample> data;
  for (int rep = 0; rep < 8; ++rep)
    for (auto d : all_designs(kSmall)) data.push_back({d, std::vector<double>(6, 0.0)});
  NamsTrainConfig tc;
  tc.epochs = 200;
  tc.validation_fraction = 0.0;
  tc.seed = 12;
  auto report = train_nams(model, data, tc);
  CHECK(report.train.size() == 200);
  CHECK(report.train.back().decode < report.train.front().decode);

  auto designs = all_designs(kSmall);
  LatentCode code = model.encode(design_matrix(designs, kSmall), Tensor::matrix(designs.size(), 10));
  Tensor decoded = model.decode(code.z);
  int recovered = 0;
  for (std::size_t i = 0; i < designs.size(); ++i) recovered += discretize(decoded.row_span(i), kSmall) == designs[i];
  CHECK(recovered == 16);
}

TEST_CASE("surrogate-only training beats the mean predictor on held-out designs") {
  NamsConfig c = small_config(6);
  c.lambda_d = 0.0;
  c.lambda_kld = 0.0;
  c.dropout = 0.0;
  NamsModel model(c, kSmall, 21);
  // Features additive in the two texture choices plus noise.
  Rng rng(22);
  Tensor flat_effect = random_matrix(rng, 4, 6);
  Tensor sloped_effect = random_matrix(rng, 4, 6);
  auto feature = [&](sim::DiscreteDesign d, double noise) {
    std::vector<double> f(6);
    for (std::size_t j = 0; j < 6; ++j)
      f[j] = flat_effect(d.flat, j) + sloped_effect(d.sloped, j) + noise * rng.normal();
    return f;
  };
  std::vector<TrainingExample> train, held;
  for (auto d : all_designs(kSmall)) {
    bool hold = (d.flat + d.sloped) % 4 == 0;
    for (int rep = 0; rep < 8; ++rep) (hold ? held : train).push_back({d, feature(d, 0.05)});
  }
  NamsTrainConfig tc;
  tc.epochs = 150;
  tc.validation_fraction = 0.0;
  tc.seed = 23;
  train_nams(model, train, tc);

  std::vector<features::FeatureVector> train_feats;
  for (const auto& ex : train) train_feats.push_back(ex.target);
  auto mean = features::mean_of(train_feats);
  double mean_mse = 0.0;
  for (const auto& ex : held)
    for (std::size_t j = 0; j < 6; ++j) mean_mse += std::pow(ex.target[j] - mean[j], 2);
  mean_mse /= static_cast<double>(held.size() * 6);
  double model_mse = evaluate_losses(model, held).predict;
  MESSAGE("held-out predictor mse " << model_mse << " vs mean predictor " << mean_mse);
  CHECK(model_mse < mean_mse);
}

TEST_CASE("zero loss weights leave trainable parameters fixed") {
  NamsConfig c = small_config();
  c.lambda_p = c.lambda_d = c.lambda_kld = 0.0;
  NamsModel model(c, kSmall, 31);
  ad::ModelParameters before = model.params();
  std::vector<TrainingExample> data;
  for (auto d : all_designs(kSmall)) data.push_back({d, std::vector<double>(6, 1.0)});
  NamsTrainConfig tc;
  tc.epochs = 1;
  tc.validation_fraction = 0.0;
  train_nams(model, data, tc);
  for (const auto& entry : before.entries())
    if (entry.trainable) CHECK(model.params().get(entry.name).values() == entry.value.values());
}

TEST_CASE("training rejects bad inputs") {
  NamsModel model(small_config(), kSmall, 1);
  std::vector<TrainingExample> data{{{0, 0}, std::vector<double>(5, 0.0)}, {{1, 1}, std::vector<double>(5, 0.0)}};
  NamsTrainConfig tc;
  tc.epochs = 1;
  tc.validation_fraction = 0.0;
  CHECK_THROWS_AS(train_nams(model, data, tc), InvalidArgument);
  tc.batch = 1;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
}

TEST_CASE("search on an orthonormal toy predictor converges") {
  const std::size_t k = 10;
  Tensor a = orthonormal(k, 41);
  Rng rng(42);
  Tensor z0 = random_matrix(rng, 1, k);
  std::vector<double> target(k, 0.0);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < k; ++i) target[j] += z0[i] * a(i, j);

  PredictFn predict = [&](Graph& g, NodeId z) { return ad::affine(g, z, g.input(a), g.input(Tensor({k}, 0.0))); };
  sim::DesignSpace space{2, 2};
  DecodeFn decode = [&](const Tensor& z) {
    Tensor out = Tensor::matrix(z.rows(), 4);
    for (std::size_t r = 0; r < z.rows(); ++r) {
      out(r, z(r, 0) > 0 ? 0 : 1) = 1.0;
      out(r, z(r, 1) > 0 ? 2 : 3) = 1.0;
    }
    return out;
  };
  SearchConfig cfg;
  cfg.restarts = 20;
  cfg.pool = 20;
  cfg.iterations = 2000;
  cfg.init_range = 1.0;
  std::vector<double> sigma(k, 1.0);
  SearchResult res = latent_search(predict, decode, space, target, sigma, cfg, 43);
  REQUIRE(res.pool.size() == 20);
  double worst = 0.0;
  for (const auto& c : res.pool) {
    double dist = 0.0;
    for (std::size_t j = 0; j < k; ++j) dist += std::pow(c.z[j] - z0[j], 2);
    worst = std::max(worst, std::sqrt(dist));
    CHECK(c.loss <= c.initial_loss);
  }
  CHECK(worst < 1e-3);
  CHECK(res.failed_restarts == 0);
  CHECK(res.design == sim::DiscreteDesign{z0[0] > 0 ? 0 : 1, z0[1] > 0 ? 0 : 1});

  SUBCASE("single restart degenerates to one descent") {
    cfg.restarts = 1;
    cfg.pool = 1;
    cfg.iterations = 50;
    SearchResult one = latent_search(predict, decode, space, target, sigma, cfg, 44);
    REQUIRE(one.pool.size() == 1);
    Tensor zt = Tensor::matrix(1, k);
    for (std::size_t j = 0; j < k; ++j) zt[j] = one.pool[0].z[j];
    CHECK(one.design == discretize(decode(zt).row_span(0), space));
    CHECK(one.z_star == one.pool[0].z);
    CHECK_FALSE(one.mismatch);
  }
  SUBCASE("deterministic under a fixed seed") {
    cfg.iterations = 30;
    SearchResult x = latent_search(predict, decode, space, target, sigma, cfg, 45);
    SearchResult y = latent_search(predict, decode, space, target, sigma, cfg, 45);
    CHECK(x.z_star == y.z_star);
    CHECK(x.design == y.design);
  }
  SUBCASE("pool larger than restarts is a config error") {
    cfg.pool = 21;
    CHECK_THROWS_AS(latent_search(predict, decode, space, target, sigma, cfg, 1), ConfigError);
  }
}

TEST_CASE("vote") {
  SUBCASE("unanimous pool returns the loss minimizer") {
    std::vector<SearchCandidate> c{cand(0, 0.3, {1, 2}), cand(1, 0.1, {1, 2}), cand(2, 0.2, {1, 2})};
    VoteOutcome v = vote(c);
    CHECK(v.design == sim::DiscreteDesign{1, 2});
    CHECK(v.chosen == 1);
    CHECK_FALSE(v.mismatch);
  }
  SUBCASE("per-group majority") {
    std::vector<SearchCandidate> c{cand(0, 0.1, {3, 0}), cand(1, 0.2, {3, 1}), cand(2, 0.3, {5, 1})};
    VoteOutcome v = vote(c);
    CHECK(v.design == sim::DiscreteDesign{3, 1});
    CHECK(v.chosen == 1);
  }
  SUBCASE("ties go to the lower mean loss, then the lower index") {
    std::vector<SearchCandidate> c{cand(0, 0.5, {7, 2}), cand(1, 0.1, {4, 2}), cand(2, 0.3, {7, 9}),
                                   cand(3, 0.2, {4, 9})};
    CHECK(vote(c).design == sim::DiscreteDesign{4, 9});
    std::vector<SearchCandidate> even{cand(0, 0.2, {6, 1}), cand(1, 0.2, {2, 1})};
    CHECK(vote(even).design.flat == 2);
  }
  SUBCASE("mismatch falls back to the lowest loss") {
    std::vector<SearchCandidate> c{cand(0, 0.1, {1, 5}), cand(1, 0.2, {2, 6}), cand(2, 0.3, {1, 6}),
                                   cand(3, 0.4, {2, 5})};
    VoteOutcome v = vote(c);
    // Flat tie 1 vs 2: means 0.2 vs 0.3; sloped tie 5 vs 6: means 0.25 vs 0.25 -> lower index.
    CHECK(v.design == sim::DiscreteDesign{1, 5});
    CHECK(v.chosen == 0);
  }
  CHECK_THROWS_AS(vote(std::vector<SearchCandidate>{}), InvalidArgument);
}

TEST_CASE("discretization is invariant to the sigmoid") {
  Rng rng(51);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> logits(8), probs(8);
    for (std::size_t i = 0; i < 8; ++i) {
      logits[i] = rng.uniform(-6.0, 6.0);
      probs[i] = 1.0 / (1.0 + std::exp(-logits[i]));
    }
    CHECK(discretize(logits, kSmall) == discretize(probs, kSmall));
  }
}

TEST_CASE("rejection sampling frequencies") {
  sim::DesignSpace space;
  sim::DiscreteDesign star{5, 7};
  Rng rng(61);
  for (int i = 0; i < 1000; ++i) CHECK_FALSE(rejection_sample(star, 0.0, space, rng).replaced);
  int replaced = 0;
  for (int i = 0; i < 10000; ++i) {
    auto o = rejection_sample(star, 0.25, space, rng);
    replaced += o.replaced;
    if (!o.replaced) CHECK(o.design == star);
  }
  CHECK(std::abs(replaced / 10000.0 - 0.25) <= 0.02);
  int all = 0;
  for (int i = 0; i < 1000; ++i) all += rejection_sample(star, 1.0, space, rng).replaced;
  CHECK(all == 1000);
  CHECK_THROWS_AS(rejection_sample(star, 1.5, space, rng), InvalidArgument);
  CHECK_THROWS_AS(rejection_sample(star, -0.1, space, rng), InvalidArgument);
}

TEST_CASE("infer_population") {
  NamsModel model(small_config(), kSmall, 71);
  SearchConfig cfg;
  cfg.restarts = 8;
  cfg.pool = 4;
  cfg.iterations = 5;
  std::atomic<std::uint64_t> calls{0};
  sim::Simulator simulator(sim::make_bank(sim::BankId::InDomain, kSmall), {}, &calls);
  CHECK(infer_population(model, {}, cfg, 0.0, 1).empty());
  std::vector<features::FeatureVector> targets(3, std::vector<double>(6, 0.5));
  std::vector<SearchResult> details;
  DesignPopulation pop = infer_population(model, targets, cfg, 0.0, 2, &details);
  CHECK(pop.size() == 3);
  CHECK(details.size() == 3);
  CHECK(calls.load() == 0);
  for (const auto& e : pop.entries) CHECK(e.source == PopulationSource::Searched);
  DesignPopulation again = infer_population(model, targets, cfg, 0.0, 2);
  for (std::size_t i = 0; i < 3; ++i) CHECK(again.entries[i].design == pop.entries[i].design);
  std::vector<features::FeatureVector> wrong(1, std::vector<double>(3, 0.0));
  CHECK_THROWS_AS(infer_population(model, wrong, cfg, 0.0, 2), InvalidArgument);
}

TEST_CASE("model and population persistence") {
  auto dir = std::filesystem::temp_directory_path() / "nams_core_test";
  std::filesystem::remove_all(dir);
  NamsModel model(small_config(), kSmall, 81);
  model.set_latent_sigma(std::vector<double>(10, 0.5));
  model.save(dir / "model");
  NamsModel back = NamsModel::load(dir / "model");
  CHECK(back.latent_sigma() == model.latent_sigma());
  CHECK(back.space().flat_count == 4);
  Rng rng(82);
  Tensor z = random_matrix(rng, 5, 10);
  CHECK(back.predict(z).values() == model.predict(z).values());
  CHECK(back.decode(z).values() == model.decode(z).values());

  DesignPopulation pop;
  pop.entries = {{{1, 2}, PopulationSource::Searched, 0.125}, {{3, 0}, PopulationSource::RejectedUniform, 0.0}};
  write_population_jsonl(dir / "pop.jsonl", pop);
  DesignPopulation pback = read_population_jsonl(dir / "pop.jsonl");
  REQUIRE(pback.size() == 2);
  CHECK(pback.entries[0].design == sim::DiscreteDesign{1, 2});
  CHECK(pback.entries[1].source == PopulationSource::RejectedUniform);
  CHECK(pback.entries[0].loss == 0.125);
  std::filesystem::remove_all(dir);
}
