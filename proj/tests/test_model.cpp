// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <memory>

#include "doctest.h"
#include "oracles.hpp"
#include "saddle/error.hpp"
#include "saddle/model.hpp"
#include "saddle/rng.hpp"

using namespace saddle;

namespace {

Batch random_batch(const Dataset& ds, std::size_t size, Rng& rng) {
  Batch b{&ds, {}};
  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  for (std::size_t i = 0; i < size; ++i) b.indices.push_back(pick(rng));
  return b;
}

Vec random_vec(std::size_t d, double scale, Rng& rng) {
  Vec v(d);
  for (auto& x : v) x = scale * standard_normal(rng);
  return v;
}

std::shared_ptr<QuadraticOracle> random_quadratic(std::size_t d, Rng& rng) {
  // A = B^T B + I is symmetric positive definite.
  std::vector<double> b(d * d), a(d * d, 0.0);
  for (auto& x : b) x = standard_normal(rng);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < d; ++k) a[i * d + j] += b[k * d + i] * b[k * d + j];
      if (i == j) a[i * d + j] += 1.0;
    }
  return QuadraticOracle::dense(a, random_vec(d, 1.0, rng));
}

void gradient_checks(const GradOracle& oracle, const Dataset* ds, double scale, Rng& rng) {
  for (int trial = 0; trial < 50; ++trial) {
    const Vec x = random_vec(oracle.dim(), scale, rng);
    const Batch batch = ds ? random_batch(*ds, 8, rng) : Batch{};
    const Vec g = oracle.grad(x, batch);
    const auto fd = oracle::fd_gradient([&](const Vec& p) { return oracle.loss(p, batch); }, x);
    CHECK(oracle::rel_error(g, fd) < 1e-4);
  }
}

}  // namespace

TEST_CASE("loss values") {
  Dataset ds{2, 2, Split::train, {0.5, -1.0, 2.0, 0.25}, {0, 1}};
  LogisticRegressionOracle lr(2, 2);
  CHECK(lr.loss(Vec(lr.dim(), 0.0), Batch{&ds, {0, 1}}) == doctest::Approx(std::log(2.0)));

  const auto q = QuadraticOracle::diagonal({2.0, 3.0}, {1.0, -1.0});
  CHECK(q->loss(Vec{1.0, -1.0}, Batch{}) == 0.0);
  CHECK(q->loss(Vec{2.0, 0.0}, Batch{}) == doctest::Approx(0.5 * (2.0 + 3.0)));

  const auto blobs = make_blobs(3, 20, 4, 0.5, 3).train;
  MlpOracle mlp(4, 6, 3);
  Rng rng = make_stream(1, Stream::init);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec p = random_vec(mlp.dim(), 0.7, rng);
    const Batch b = random_batch(blobs, 16, rng);
    CHECK(std::abs(mlp.loss(p, b) - oracle::mlp_loss(p, 4, 6, 3, blobs, b.indices)) < 1e-12);
  }
}

TEST_CASE("quadratic gradient and hvp are exact") {
  Rng rng = make_stream(2, Stream::init);
  const auto q = random_quadratic(5, rng);
  const Vec x = random_vec(5, 1.0, rng);
  const Vec v = random_vec(5, 1.0, rng);
  const Vec g = q->grad(x, Batch{});
  const Vec hv = q->hvp(x, Batch{}, v);
  // Oracle: A(x - c) and A v from the loss's second differences are exact for
  // a quadratic, so use the polarization identity on loss values.
  Vec diff(5);
  for (std::size_t k = 0; k < 5; ++k) diff[k] = x[k] - q->center()[k];
  auto quad_form = [&](const Vec& a, const Vec& b) {
    // a^T A b = f(c + a + b) - f(c + a) - f(c + b) + f(c)
    Vec ab(5), pa(5), pb(5);
    for (std::size_t k = 0; k < 5; ++k) {
      ab[k] = q->center()[k] + a[k] + b[k];
      pa[k] = q->center()[k] + a[k];
      pb[k] = q->center()[k] + b[k];
    }
    return q->loss(ab, Batch{}) - q->loss(pa, Batch{}) - q->loss(pb, Batch{});
  };
  for (std::size_t k = 0; k < 5; ++k) {
    Vec e(5, 0.0);
    e[k] = 1.0;
    CHECK(g[k] == doctest::Approx(quad_form(diff, e)).epsilon(1e-9));
    CHECK(hv[k] == doctest::Approx(quad_form(v, e)).epsilon(1e-9));
  }
  const auto diag = QuadraticOracle::diagonal({3.0, 1.0}, {0.0, 0.0});
  CHECK(diag->hvp(Vec{0.4, 0.2}, Batch{}, Vec{1.0, 2.0}) == Vec{3.0, 2.0});
  CHECK(diag->grad(Vec{0.4, 0.2}, Batch{}) == Vec{3.0 * 0.4, 0.2});
}

TEST_CASE("finite-difference gradient checks") {
  Rng rng = make_stream(3, Stream::init);
  const auto ds = make_blobs(4, 25, 5, 0.6, 3).train;
  gradient_checks(*random_quadratic(6, rng), nullptr, 1.0, rng);
  gradient_checks(LogisticRegressionOracle(5, 4), &ds, 0.5, rng);
  gradient_checks(MlpOracle(5, 7, 4), &ds, 0.5, rng);
}

TEST_CASE("symmetric batch has zero bias gradient") {
  Dataset ds{2, 2, Split::train, {1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0}, {0, 1, 0, 1}};
  LogisticRegressionOracle lr(2, 2);
  const Vec g = lr.grad(Vec(lr.dim(), 0.0), Batch{&ds, {0, 1, 2, 3}});
  CHECK(g[4] == 0.0);
  CHECK(g[5] == 0.0);
}

TEST_CASE("mlp hvp matches a dense finite-difference Hessian") {
  const auto ds = make_blobs(3, 20, 3, 0.5, 4).train;
  MlpOracle mlp(3, 5, 3);
  REQUIRE(mlp.dim() <= 60);
  Rng rng = make_stream(4, Stream::init);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec p = random_vec(mlp.dim(), 0.8, rng);
    const Batch b = random_batch(ds, 20, rng);
    const auto hess = oracle::fd_hessian([&](const Vec& x) { return mlp.grad(x, b); }, p);
    const Vec v = random_vec(mlp.dim(), 1.0, rng);
    CHECK(oracle::rel_error(mlp.hvp(p, b, v), oracle::matvec(hess, v)) < 1e-2);

    const Vec w = random_vec(mlp.dim(), 1.0, rng);
    const double vhw = dot(v, mlp.hvp(p, b, w));
    const double whv = dot(w, mlp.hvp(p, b, v));
    CHECK(std::abs(vhw - whv) <= 1e-3 * std::max(std::abs(vhw), 1e-12));
  }
  CHECK(mlp.hvp(Vec(mlp.dim(), 0.1), Batch{&ds, {0, 1}}, Vec(mlp.dim(), 0.0)) ==
        Vec(mlp.dim(), 0.0));
}

TEST_CASE("determinism, shapes and numeric errors") {
  const auto ds = make_blobs(3, 10, 4, 0.5, 5).train;
  MlpOracle mlp(4, 3, 3);
  const Vec p = mlp.init_params(9, 1.0).values;
  CHECK(mlp.init_params(9, 1.0).values == p);
  const Batch b{&ds, {0, 3, 7}};
  CHECK(mlp.grad(p, b) == mlp.grad(p, b));
  CHECK(mlp.loss(p, b) == mlp.loss(p, b));

  CHECK_THROWS_AS(mlp.loss(Vec(mlp.dim() + 1, 0.0), b), ShapeError);
  CHECK_THROWS_AS(mlp.loss(p, Batch{&ds, {}}), ShapeError);
  CHECK_THROWS_AS(mlp.loss(p, Batch{&ds, {1000}}), ShapeError);
  Vec bad = p;
  bad[0] = std::nan("");
  CHECK_THROWS_AS(mlp.loss(bad, b), NumericError);

  // Logit gap of 2e308 overflows the loss for a sample of class 1.
  const Dataset one{4, 3, Split::train, {1.0, 0.0, 0.0, 0.0}, {1}};
  LogisticRegressionOracle lr(4, 3);
  Vec huge(lr.dim(), 0.0);
  huge[0] = 1e308;
  huge[4] = -1e308;
  CHECK_THROWS_AS(lr.grad(huge, Batch{&one, {0}}), NumericError);
}

TEST_CASE("layout blocks") {
  MlpOracle mlp(4, 3, 2);
  const auto blocks = mlp.layout().blocks();
  REQUIRE(blocks.size() == 4);
  CHECK(blocks[0].name == "w1");
  CHECK(blocks[0].length == 12);
  CHECK(blocks[1].offset == 12);
  CHECK(blocks[3].offset + blocks[3].length == mlp.dim());
  CHECK(mlp.layout().max_block_length() == 12);

  ParamVector pv{mlp.layout(), Vec(mlp.dim(), 0.0)};
  pv.validate();
  pv.values.pop_back();
  CHECK_THROWS_AS(pv.validate(), ShapeError);
}

TEST_CASE("accuracy") {
  Dataset ds{1, 2, Split::test, {-1.0, 2.0, 3.0}, {0, 1, 0}};
  LogisticRegressionOracle lr(1, 2);
  // Class 1 logit = x, class 0 logit = 0: predicts 0, 1, 1.
  const Vec p{0.0, 1.0, 0.0, 0.0};
  CHECK(lr.accuracy(p, ds) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS(QuadraticOracle::diagonal({1.0}, {0.0})->accuracy(Vec{0.0}, ds));
}
