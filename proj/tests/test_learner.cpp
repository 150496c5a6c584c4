#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "flamma/errors.hpp"
#include "flamma/learner.hpp"
#include "flamma/rng.hpp"

using namespace flamma;
using namespace flamma::learner;

namespace {

Batch random_batch(Rng& rng, std::size_t n, std::size_t dim, int classes) {
  Batch b;
  b.dim = dim;
  for (std::size_t i = 0; i < n * dim; ++i) b.features.push_back(rng.normal());
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(rng.below(classes)));
  return b;
}

ParameterVector random_vector(Rng& rng, std::size_t n, double scale) {
  ParameterVector w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = scale * rng.normal();
  return w;
}

// Straightforward MLP forward pass and mean cross-entropy, written without the
// library's helpers.
double mlp_loss_oracle(const ParameterVector& w, const Batch& b, std::size_t d, std::size_t h, std::size_t c) {
  const double* W1 = w.values().data();
  const double* b1 = W1 + h * d;
  const double* W2 = b1 + h;
  const double* b2 = W2 + c * h;
  double total = 0.0;
  for (std::size_t n = 0; n < b.size(); ++n) {
    std::vector<double> hidden(h);
    for (std::size_t j = 0; j < h; ++j) {
      double z = b1[j];
      for (std::size_t i = 0; i < d; ++i) z += W1[j * d + i] * b.features[n * d + i];
      hidden[j] = z > 0.0 ? z : 0.0;
    }
    std::vector<double> logits(c);
    for (std::size_t k = 0; k < c; ++k) {
      double z = b2[k];
      for (std::size_t j = 0; j < h; ++j) z += W2[k * h + j] * hidden[j];
      logits[k] = z;
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double z : logits) s += std::exp(z - m);
    total += -(logits[b.labels[n]] - m - std::log(s));
  }
  return total / static_cast<double>(b.size());
}

double max_relative_error(const ParameterVector& a, const ParameterVector& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max({den, std::abs(a[i]), std::abs(b[i])});
  }
  return den == 0.0 ? num : num / den;
}

}  // namespace

TEST_CASE("loss examples") {
  auto q = ModelSpec::quadratic({1.0, -2.0, 0.5});
  CHECK(loss(q, ParameterVector{1.0, -2.0, 0.5}, Batch{}) == 0.0);

  auto lg = ModelSpec::logistic(3, 2);
  Batch b{3, {0.1, 0.2, 0.3, -1.0, 2.0, 0.5}, {0, 1}};
  CHECK(loss(lg, ParameterVector(lg.parameter_count()), b) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.below(6), h = 1 + rng.below(8), c = 2 + rng.below(4);
    auto spec = ModelSpec::mlp(d, c, h);
    auto w = random_vector(rng, spec.parameter_count(), 0.8);
    auto batch = random_batch(rng, 1 + rng.below(12), d, static_cast<int>(c));
    REQUIRE(std::abs(loss(spec, w, batch) - mlp_loss_oracle(w, batch, d, h, c)) < 1e-10);
  }
}

TEST_CASE("loss and gradient reject mismatched dimensions") {
  auto lg = ModelSpec::logistic(3, 2);
  Batch b{3, {0.1, 0.2, 0.3}, {0}};
  CHECK_THROWS_AS(loss(lg, ParameterVector(5), b), InvalidArgument);
  CHECK_THROWS_AS(gradient(lg, ParameterVector(5), b), InvalidArgument);
  Batch wrong_dim{2, {0.1, 0.2}, {0}};
  CHECK_THROWS_AS(loss(lg, ParameterVector(lg.parameter_count()), wrong_dim), InvalidArgument);
  auto q = ModelSpec::quadratic({0.0, 0.0});
  CHECK_THROWS_AS(gradient(q, ParameterVector(3), Batch{}), InvalidArgument);
}

TEST_CASE("gradient examples") {
  auto q = ModelSpec::quadratic({1.0, -1.0, 2.0});
  ParameterVector w{0.5, 0.5, 0.5};
  auto g = gradient(q, w, Batch{});
  CHECK(g[0] == 0.5 - 1.0);
  CHECK(g[1] == 0.5 + 1.0);
  CHECK(g[2] == 0.5 - 2.0);

  // Separable pair: the loss keeps shrinking and the gradient goes to zero.
  auto lg = ModelSpec::logistic(1, 2);
  Batch sep{1, {-1.0, 1.0}, {0, 1}};
  TrainOptions opt;
  opt.epochs = 200000;
  opt.lr = 20.0;
  opt.batch_size = 2;
  auto trained = local_train(lg, ParameterVector(lg.parameter_count()), sep, opt);
  CHECK(gradient(lg, trained, sep).norm() < 1e-6);
}

TEST_CASE("finite difference examples") {
  auto q = ModelSpec::quadratic({0.0, 0.0});
  auto fd = finite_diff_gradient(q, ParameterVector{1.0, 0.0}, Batch{}, 1e-5);
  CHECK(std::abs(fd[0] - 1.0) < 1e-8);
  CHECK(std::abs(fd[1]) < 1e-8);
  CHECK_THROWS_AS(finite_diff_gradient(q, ParameterVector{1.0, 0.0}, Batch{}, 0.0), InvalidArgument);

  auto lg = ModelSpec::logistic(2, 3);
  Rng rng(8);
  auto w = random_vector(rng, lg.parameter_count(), 0.5);
  auto b = random_batch(rng, 6, 2, 3);
  CHECK(max_relative_error(gradient(lg, w, b), finite_diff_gradient(lg, w, b, 1e-5)) < 1e-5);
}

TEST_CASE("property: analytic gradients match finite differences") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.below(5), c = 2 + rng.below(4);
    std::vector<ModelSpec> specs{ModelSpec::logistic(d, c), ModelSpec::mlp(d, c, 1 + rng.below(6)),
                                 ModelSpec::quadratic(random_vector(rng, 1 + rng.below(8), 2.0))};
    for (const auto& spec : specs) {
      auto w = random_vector(rng, spec.parameter_count(), 0.7);
      auto batch = spec.is_classifier() ? random_batch(rng, 1 + rng.below(10), d, static_cast<int>(c)) : Batch{};
      REQUIRE(max_relative_error(gradient(spec, w, batch), finite_diff_gradient(spec, w, batch, 1e-5)) < 1e-5);
    }
  }
}

TEST_CASE("local training examples") {
  auto q = ModelSpec::quadratic({0.0});
  TrainOptions opt;
  opt.lr = 0.1;
  opt.epochs = 0;
  ParameterVector w0{1.0};
  CHECK(local_train(q, w0, Batch{}, opt) == w0);

  opt.epochs = 1;
  CHECK(local_train(q, w0, Batch{}, opt)[0] == doctest::Approx(0.9).epsilon(1e-15));
  opt.gamma = 0.5;
  CHECK(local_train(q, w0, Batch{}, opt)[0] == doctest::Approx(0.95).epsilon(1e-15));

  opt.prox_mu = 0.1;
  CHECK_THROWS_AS(local_train(q, w0, Batch{}, opt), InvalidArgument);
  opt.prox_mu = 0.0;
  opt.epochs = -1;
  CHECK_THROWS_AS(local_train(q, w0, Batch{}, opt), InvalidArgument);
  opt.epochs = 1;
  opt.gamma = 1.5;
  CHECK_THROWS_AS(local_train(q, w0, Batch{}, opt), InvalidArgument);
}

TEST_CASE("proximal term pulls towards the anchor") {
  auto q = ModelSpec::quadratic({2.0});
  TrainOptions opt;
  opt.lr = 0.1;
  opt.epochs = 1;
  opt.prox_mu = 0.5;
  opt.prox_anchor = ParameterVector{0.0};
  // w <- w - 0.1 * ((w - 2) + 0.5 (w - 0)) at w = 1
  CHECK(local_train(q, ParameterVector{1.0}, Batch{}, opt)[0] == doctest::Approx(1.0 - 0.1 * (-1.0 + 0.5)));
}

TEST_CASE("property: gamma scaling identity is exact") {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + rng.below(4), c = 2 + rng.below(3);
    auto spec = trial % 2 ? ModelSpec::logistic(d, c) : ModelSpec::mlp(d, c, 4);
    auto w0 = init_parameters(spec, trial);
    auto data = random_batch(rng, 20, d, static_cast<int>(c));
    const double eta = rng.uniform(0.01, 0.5), g = rng.uniform();
    TrainOptions a;
    a.lr = eta;
    a.gamma = g;
    a.batch_size = 7;
    a.seed = 99;
    TrainOptions b = a;
    b.lr = eta * g;
    b.gamma = 1.0;
    REQUIRE(local_train(spec, w0, data, a) == local_train(spec, w0, data, b));
  }
}

TEST_CASE("property: full-batch quadratic descent is monotone") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    auto spec = ModelSpec::quadratic(random_vector(rng, 1 + rng.below(6), 3.0));
    auto w = random_vector(rng, spec.parameter_count(), 5.0);
    TrainOptions opt;
    opt.lr = rng.uniform(0.01, 1.99);
    opt.gamma = rng.uniform(0.0, std::min(1.0, 1.99 / opt.lr));
    double prev = loss(spec, w, Batch{});
    for (int step = 0; step < 20; ++step) {
      w = local_train(spec, w, Batch{}, opt);
      const double cur = loss(spec, w, Batch{});
      REQUIRE(cur <= prev);
      prev = cur;
    }
  }
}

TEST_CASE("property: training is deterministic per seed") {
  Rng rng(13);
  auto spec = ModelSpec::mlp(4, 3, 8);
  auto data = random_batch(rng, 50, 4, 3);
  TrainOptions opt;
  opt.epochs = 3;
  opt.batch_size = 8;
  opt.seed = 1234;
  auto w0 = init_parameters(spec, 7);
  CHECK(local_train(spec, w0, data, opt) == local_train(spec, w0, data, opt));
  CHECK(init_parameters(spec, 7) == w0);
  opt.seed = 1235;
  CHECK_FALSE(local_train(spec, w0, data, opt) == local_train(spec, w0, data, TrainOptions{3, 0.05, 1.0, 8, 0.0, {}, 1234}));
}

TEST_CASE("initialisation") {
  auto lg = ModelSpec::logistic(5, 3);
  auto w = init_parameters(lg, 1);
  CHECK(w.size() == 5 * 3 + 3);
  CHECK(w.norm() == 0.0);

  auto mlp = ModelSpec::mlp(6, 4, 10);
  auto v = init_parameters(mlp, 1);
  REQUIRE(v.size() == 10 * 6 + 10 + 4 * 10 + 4);
  const double lim1 = std::sqrt(6.0 / (6 + 10)), lim2 = std::sqrt(6.0 / (10 + 4));
  for (std::size_t i = 0; i < 60; ++i) CHECK(std::abs(v[i]) <= lim1);
  for (std::size_t i = 70; i < 110; ++i) CHECK(std::abs(v[i]) <= lim2);
}

TEST_CASE("prediction ties go to the lower class") {
  auto lg = ModelSpec::logistic(2, 4);
  std::vector<double> x{0.3, -0.2};
  CHECK(predict(lg, ParameterVector(lg.parameter_count()), x) == 0);
}
