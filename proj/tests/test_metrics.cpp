// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "saddle/metrics.hpp"

using namespace saddle;

TEST_CASE("consensus error") {
  CHECK(consensus_error(std::vector<Vec>{{1.0, 2.0}, {1.0, 2.0}}) == 0.0);
  CHECK(consensus_error(std::vector<Vec>{{0.0}, {2.0}}) == 1.0);
  CHECK(consensus_error(std::vector<Vec>{{5.0, -3.0}}) == 0.0);
  Rng rng = make_stream(1, Stream::init);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec> xs(7, Vec(5));
    for (auto& x : xs)
      for (auto& v : x) v = standard_normal(rng);
    CHECK(std::abs(consensus_error(xs) - oracle::consensus_error(xs)) < 1e-12);
  }
}

TEST_CASE("compression error norms") {
  const Layout layout = Layout::contiguous({{"a", 3}, {"b", 2}});
  const Vec theta{3.0, -4.0, 0.0, 1.0, 1.0};
  Rng rng = make_stream(2, Stream::compress);
  CHECK(compression_error_norms(layout, theta, theta).error_sum == 0.0);
  const auto full = top_k(theta, layout, 1.0).decode(layout);
  CHECK(compression_error_norms(layout, theta, full).error_sum == 0.0);
  CHECK(compression_error_norms(layout, theta, full).payload_norm_sum ==
        doctest::Approx(5.0 + std::sqrt(2.0)));

  for (int trial = 0; trial < 50; ++trial) {
    Vec v(5);
    for (auto& x : v) x = standard_normal(rng);
    const auto q = top_k(v, layout, 0.3).decode(layout);
    double expected = 0.0;
    for (const auto& blk : layout.blocks()) {
      Vec part(v.begin() + blk.offset, v.begin() + blk.offset + blk.length);
      expected += std::sqrt(oracle::topk_tail_mass(part, top_k_count(0.3, blk.length)));
    }
    CHECK(compression_error_norms(layout, v, q).error_sum == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("lambda max on known spectra") {
  const auto q = QuadraticOracle::diagonal({3.0, 1.0}, {0.0, 0.0});
  Rng rng = make_stream(3, Stream::lambda);
  LambdaOptions opts;
  opts.iters = 500;
  opts.tol = 1e-12;
  CHECK(std::abs(lambda_max(*q, Vec{0.3, 0.1}, Batch{}, opts, rng) - 3.0) < 1e-6);

  // A start orthogonal to the top eigenvector is rescued by the restart.
  opts.start = Vec{0.0, 1.0};
  CHECK(std::abs(lambda_max(*q, Vec{0.0, 0.0}, Batch{}, opts, rng) - 3.0) < 1e-6);
  opts.restarts = 1;
  CHECK(std::abs(lambda_max(*q, Vec{0.0, 0.0}, Batch{}, opts, rng) - 1.0) < 1e-6);

  // Invariance to the random start.
  LambdaOptions loose;
  loose.iters = 1000;
  loose.tol = 1e-8;
  const auto q3 = QuadraticOracle::diagonal({4.0, 2.5, 1.0, 0.5}, Vec(4, 0.0));
  std::vector<double> values;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    Rng r = make_stream(s, Stream::lambda);
    values.push_back(lambda_max(*q3, Vec(4, 0.0), Batch{}, loose, r));
  }
  for (double v : values) CHECK(std::abs(v - values[0]) <= 2 * loose.tol * 4.0 + 1e-12);
}

TEST_CASE("lambda max of a tiny mlp matches the dense Hessian") {
  const auto ds = make_blobs(3, 20, 3, 0.4, 5).train;
  MlpOracle mlp(3, 4, 3);
  Vec p = mlp.init_params(5, 1.0).values;
  const Batch b{&ds, [&] {
                  std::vector<std::size_t> all(ds.size());
                  std::iota(all.begin(), all.end(), 0);
                  return all;
                }()};
  // Train a little so the dominant eigenvalue is positive and separated.
  for (int t = 0; t < 200; ++t) {
    const Vec g = mlp.grad(p, b);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= 0.5 * g[k];
  }
  const auto hess = oracle::fd_hessian([&](const Vec& x) { return mlp.grad(x, b); }, p);
  auto eig = oracle::jacobi_eigenvalues(hess);
  double top = 0.0;
  for (double e : eig)
    if (std::abs(e) > std::abs(top)) top = e;
  Rng rng = make_stream(6, Stream::lambda);
  LambdaOptions opts;
  opts.iters = 1000;
  opts.tol = 1e-9;
  CHECK(std::abs(lambda_max(mlp, p, b, opts, rng) - top) <= 1e-2 * std::abs(top));
}

TEST_CASE("loss surface") {
  const auto q = QuadraticOracle::diagonal(Vec(6, 1.0), Vec(6, 0.0));
  Rng rng = make_stream(7, Stream::surface);
  const auto s = loss_surface(*q, Vec(6, 0.0), Batch{}, 2.0, 9, rng);
  CHECK(std::abs(dot(s.u, s.v)) < 1e-14);
  CHECK(norm2(s.u) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(norm2(s.v) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.axis[4] == 0.0);
  CHECK(s.axis.front() == -2.0);
  CHECK(s.axis.back() == 2.0);
  CHECK(s.at(4, 4) == q->loss(Vec(6, 0.0), Batch{}));
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 9; ++j) {
      const double a = s.axis[i], b = s.axis[j];
      CHECK(s.at(i, j) == doctest::Approx((a * a + b * b) / 2.0).epsilon(1e-12));
    }

  const Vec center{0.3, -0.1, 0.2, 0.0, 1.0, -2.0};
  Rng r1 = make_stream(8, Stream::surface), r2 = make_stream(8, Stream::surface);
  const auto s1 = loss_surface(*q, center, Batch{}, 1.0, 5, r1);
  CHECK(s1.at(2, 2) == q->loss(center, Batch{}));
  CHECK(s1.losses == loss_surface(*q, center, Batch{}, 1.0, 5, r2).losses);
  CHECK_THROWS(loss_surface(*q, center, Batch{}, 1.0, 4, r1));

  std::ostringstream csv;
  write_surface_csv(s1, csv);
  CHECK(csv.str().rfind("a,b,loss\n", 0) == 0);
}

TEST_CASE("variance diagnostics") {
  auto cfg = fixture::tiny_mlp(Algorithm::dpsgd, 3);
  auto sim = fixture::make_sim(cfg);
  const Vec point = sim.agents[0].params;
  const auto full = variance_diagnostics(sim.agents, point, 100000, 4, 1);
  CHECK(full.sigma2_hat == 0.0);
  CHECK(full.delta2_hat > 0.0);
  const auto noisy = variance_diagnostics(sim.agents, point, 2, 8, 1);
  CHECK(noisy.sigma2_hat > 0.0);

  for (auto& a : sim.agents) a.shard = sim.agents[0].shard;
  CHECK(variance_diagnostics(sim.agents, point, 4, 4, 1).delta2_hat == 0.0);
}

TEST_CASE("heterogeneity estimate grows as alpha shrinks") {
  std::vector<double> diffs;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto cfg = fixture::tiny_mlp(Algorithm::dpsgd, seed);
    cfg.agents = 10;
    cfg.classes = 10;
    cfg.per_class = 20;
    cfg.d_in = 10;
    cfg.alpha = 0.001;
    auto skewed = fixture::make_sim(cfg);
    cfg.alpha = 100.0;
    auto mixed = fixture::make_sim(cfg);
    const Vec point = skewed.agents[0].params;
    REQUIRE(point == mixed.agents[0].params);
    diffs.push_back(variance_diagnostics(skewed.agents, point, 8, 0, seed).delta2_hat -
                    variance_diagnostics(mixed.agents, point, 8, 0, seed).delta2_hat);
  }
  std::sort(diffs.begin(), diffs.end());
  CHECK(diffs[5] > 0.0);
}

TEST_CASE("metrics csv") {
  MetricsLog log;
  log.rows.push_back({0, 1.5, 0.25, 0.0, 2.0, 0.0, 0.0, 0});
  log.rows.push_back({1, 1.25, 0.5, 0.125, 1.0, 0.5, 2.0, 640});
  const auto text = metrics_csv(log);
  CHECK(text ==
        "round,train_loss_mean,test_acc_consensus,consensus_error,grad_norm_mean,"
        "compression_error_sum,update_norm_sum,bits_transmitted_cumulative\n"
        "0,1.5,0.25,0,2,0,0,0\n"
        "1,1.25,0.5,0.125,1,0.5,2,640\n");
  CHECK(metrics_columns().size() == 8);
}

TEST_CASE("communication cost ratios") {
  const auto ring = build_ring(8);
  const Layout big = Layout::single(10000);
  const auto ratio = [&](Algorithm a, CompressionOp op) {
    return static_cast<double>(uncompressed_bits_per_round(a, ring, big.size())) /
           static_cast<double>(bits_per_round(a, op, ring, big));
  };
  CHECK(std::abs(ratio(Algorithm::comp_q_saddle, CompressionOp::quant(8)) - 4.0) <= 0.04);
  CHECK(std::abs(ratio(Algorithm::comp_n_saddle, CompressionOp::sign()) - 1.94) <= 0.01);
  CHECK(std::abs(ratio(Algorithm::comp_q_saddle, CompressionOp::top_k(0.3)) - 2.22) <= 0.01);
  CHECK(ratio(Algorithm::comp_q_saddle, CompressionOp::identity()) == 1.0);

  MetricsLog log;
  log.rows.push_back({0, 0, 0, 0, 0, 0, 0, 0});
  log.rows.push_back({10, 0, 0, 0, 0, 0, 0, 10 * bits_per_round(Algorithm::comp_qgm,
                                                                  CompressionOp::quant(8), ring, big)});
  const auto report = comm_cost_report(log, Algorithm::comp_qgm, ring, big.size());
  CHECK(report.ratio == doctest::Approx(ratio(Algorithm::comp_qgm, CompressionOp::quant(8))));
  CHECK(report.bits_per_agent == doctest::Approx(static_cast<double>(report.bits_total) / 8.0));
  CHECK(report.gb_per_agent == doctest::Approx(report.bits_per_agent / 8e9));
}
