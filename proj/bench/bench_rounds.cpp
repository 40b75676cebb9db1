// SPDX-License-Identifier: Apache-2.0
// Serial vs OpenMP timings for gossip and full training rounds.

#include <benchmark/benchmark.h>

#include "saddle/experiment.hpp"

namespace {

using namespace saddle;

std::vector<Vec> random_models(std::size_t n, std::size_t d) {
  Rng rng = make_stream(7, Stream::init);
  std::vector<Vec> z(n, Vec(d));
  for (auto& row : z)
    for (auto& x : row) x = standard_normal(rng);
  return z;
}

void BM_GossipReference(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto w = build_ring(n);
  const auto z = random_models(n, 4096);
  for (auto _ : state) benchmark::DoNotOptimize(gossip_mix_reference(w, z));
}

void BM_Gossip(benchmark::State& state, ExecPolicy policy) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto w = build_ring(n);
  const auto z = random_models(n, 4096);
  std::vector<Vec> out;
  for (auto _ : state) {
    gossip_mix(w, z, out, policy);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_Round(benchmark::State& state, Algorithm algorithm, ExecPolicy policy) {
  RunConfig cfg;
  cfg.algorithm = algorithm;
  cfg.agents = static_cast<std::size_t>(state.range(0));
  cfg.classes = 10;
  cfg.per_class = 100;
  cfg.d_in = 16;
  cfg.hidden = 32;
  cfg.alpha = 0.1;
  cfg.hyper.rho = 0.05;
  cfg.hyper.beta = cfg.hyper.mu = 0.9;
  cfg.compression = CompressionOp::quant(8);
  const auto w = build_topology(cfg);
  const auto problem = build_problem(cfg);
  auto agents = make_agents(w, algorithm, problem.objectives, problem.shards, problem.init,
                            cfg.hyper);
  RoundContext ctx;
  ctx.topology = &w;
  ctx.hyper = cfg.hyper;
  ctx.op = cfg.compression;
  ctx.policy = policy;
  for (auto _ : state) {
    benchmark::DoNotOptimize(step(algorithm, agents, ctx));
    ++ctx.round;
  }
}

}  // namespace

BENCHMARK(BM_GossipReference)->Arg(16)->Arg(64);
BENCHMARK_CAPTURE(BM_Gossip, serial, ExecPolicy::serial)->Arg(16)->Arg(64);
BENCHMARK_CAPTURE(BM_Gossip, parallel, ExecPolicy::parallel)->Arg(16)->Arg(64);
BENCHMARK_CAPTURE(BM_Round, q_saddle_serial, Algorithm::q_saddle, ExecPolicy::serial)->Arg(10);
BENCHMARK_CAPTURE(BM_Round, q_saddle_parallel, Algorithm::q_saddle, ExecPolicy::parallel)->Arg(10);
BENCHMARK_CAPTURE(BM_Round, comp_n_saddle_serial, Algorithm::comp_n_saddle, ExecPolicy::serial)
    ->Arg(10);
BENCHMARK_CAPTURE(BM_Round, comp_n_saddle_parallel, Algorithm::comp_n_saddle,
                  ExecPolicy::parallel)
    ->Arg(10);

BENCHMARK_MAIN();
