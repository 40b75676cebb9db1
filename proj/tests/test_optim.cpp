// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "saddle/error.hpp"
#include "saddle/optim.hpp"

using namespace saddle;

TEST_CASE("sam perturbation") {
  // A = I, c = 0: the gradient is x itself.
  const auto q = QuadraticOracle::diagonal({1.0, 1.0}, {0.0, 0.0});
  const auto r = sam_gradient(*q, Vec{3.0, 4.0}, Batch{}, 0.1);
  CHECK(r.perturbation[0] == doctest::Approx(0.06).epsilon(1e-15));
  CHECK(r.perturbation[1] == doctest::Approx(0.08).epsilon(1e-15));
  CHECK(r.ascent_grad == Vec{3.0, 4.0});
  // g~ = x (1 + rho / ||x||)
  CHECK(r.perturbed_grad[0] == doctest::Approx(3.0 * (1.0 + 0.1 / 5.0)).epsilon(1e-15));
  CHECK(r.perturbed_grad[1] == doctest::Approx(4.0 * (1.0 + 0.1 / 5.0)).epsilon(1e-15));

  const auto plain = sam_gradient(*q, Vec{3.0, 4.0}, Batch{}, 0.0);
  CHECK(plain.perturbed_grad == q->grad(Vec{3.0, 4.0}, Batch{}));

  const auto flat = sam_gradient(*q, Vec{0.0, 0.0}, Batch{}, 0.5);
  CHECK(flat.perturbed_grad == Vec{0.0, 0.0});
  CHECK(flat.perturbation == Vec{0.0, 0.0});

  CHECK_THROWS_AS(sam_gradient(*q, Vec{1.0, 1.0}, Batch{}, -0.1), NumericError);
}

TEST_CASE("sam uses one batch and a global norm") {
  const auto ds = make_blobs(3, 20, 4, 0.5, 1).train;
  MlpOracle mlp(4, 5, 3);
  const Vec p = mlp.init_params(2, 1.0).values;
  const Batch b{&ds, {1, 5, 9, 22, 40}};
  const double rho = 0.05;
  const auto r = sam_gradient(mlp, p, b, rho);
  CHECK(norm2(r.perturbation) == doctest::Approx(rho).epsilon(1e-12));
  Vec shifted = p;
  const double gn = norm2(r.ascent_grad);
  for (std::size_t i = 0; i < p.size(); ++i) shifted[i] += rho * (r.ascent_grad[i] / gn);
  CHECK(r.perturbed_grad == mlp.grad(shifted, b));
}

TEST_CASE("quasi-global momentum") {
  auto s = MomentumState::zeros(2, 0.0, 0.0);
  qgm_in_step_momentum(s, Vec{1.0, -2.0});
  CHECK(s.m == Vec{1.0, -2.0});
  qgm_momentum_update(s, Vec{1.0, 1.0}, Vec{0.5, 2.0}, 0.5);
  CHECK(s.m_hat == Vec{1.0, -2.0});

  // Hand-worked: beta = mu = 0.9, m_hat = 0.4, g = 1, eta = 0.1, x 2 -> 1.88.
  auto h = MomentumState::zeros(1, 0.9, 0.9);
  h.m_hat[0] = 0.4;
  qgm_in_step_momentum(h, Vec{1.0});
  CHECK(h.m[0] == doctest::Approx(1.36).epsilon(1e-14));
  qgm_momentum_update(h, Vec{2.0}, Vec{1.88}, 0.1);
  // d = 1.2, m_hat = 0.36 + 0.12
  CHECK(h.m_hat[0] == doctest::Approx(0.48).epsilon(1e-12));

  // No gossip: d equals the applied step direction.
  auto solo = MomentumState::zeros(1, 0.5, 0.5);
  double x = 1.0;
  double ema = 0.0;
  for (double g : {1.0, -0.5, 2.0}) {
    qgm_in_step_momentum(solo, Vec{g});
    const double applied = solo.m[0];
    const double next = x - 0.25 * applied;
    qgm_momentum_update(solo, Vec{x}, Vec{next}, 0.25);
    ema = 0.5 * ema + 0.5 * applied;
    CHECK(solo.m_hat[0] == doctest::Approx(ema).epsilon(1e-12));
    x = next;
  }

  CHECK_THROWS_AS(MomentumState::zeros(1, 1.0, 0.5), ConfigError);
  CHECK_THROWS_AS(MomentumState::zeros(1, 0.5, -0.1), ConfigError);
  CHECK_THROWS_AS(qgm_momentum_update(h, Vec{1.0}, Vec{1.0}, 0.0), NumericError);
}

TEST_CASE("local momentum") {
  auto s = MomentumState::zeros(1, 0.9, 0.9);
  Vec dir(1);
  local_momentum_step(s, Vec{1.0}, false, dir);
  CHECK(dir[0] == 1.0);
  local_momentum_step(s, Vec{1.0}, false, dir);
  CHECK(dir[0] == doctest::Approx(1.9));
  local_momentum_step(s, Vec{1.0}, true, dir);
  // m = 0.9 * 1.9 + 1 = 2.71, Nesterov direction = 1 + 0.9 * 2.71
  CHECK(s.m[0] == doctest::Approx(2.71));
  CHECK(dir[0] == doctest::Approx(1.0 + 0.9 * 2.71));
}

TEST_CASE("learning-rate schedule") {
  const auto sched = LrSchedule::parse("step:0.5,0.75:10", 0.1);
  CHECK(sched.at(1, 100) == 0.1);
  CHECK(sched.at(50, 100) == 0.1);
  CHECK(sched.at(51, 100) == doctest::Approx(0.01));
  CHECK(sched.at(76, 100) == doctest::Approx(0.001));
  CHECK(LrSchedule::parse(sched.to_string(), 0.1).at(76, 100) == sched.at(76, 100));
  CHECK(LrSchedule::parse("constant", 0.3).at(99, 100) == 0.3);
  CHECK_THROWS_AS(LrSchedule::parse("cosine", 0.1), ConfigError);
  CHECK_THROWS_AS(LrSchedule::parse("step:0.5", 0.1), ConfigError);
  CHECK_THROWS_AS(LrSchedule::parse("step:1.5:10", 0.1), ConfigError);
  CHECK_THROWS_AS(LrSchedule::parse("step:0.5:0.5", 0.1), ConfigError);
}
