// SPDX-License-Identifier: Apache-2.0
// Small simulation setups shared by the engine tests.
#pragma once

#include "saddle/experiment.hpp"

namespace fixture {

using namespace saddle;

struct Sim {
  MixingMatrix w;
  Problem problem;
  std::vector<AgentState> agents;
  RoundContext ctx;
  Algorithm algorithm;

  RoundStats advance() {
    const auto stats = step(algorithm, agents, ctx);
    ++ctx.round;
    return stats;
  }

  std::vector<Vec> params() const {
    std::vector<Vec> out;
    for (const auto& a : agents) out.push_back(a.params);
    return out;
  }
};

inline Sim make_sim(const RunConfig& cfg) {
  Sim s{build_topology(cfg), build_problem(cfg), {}, {}, cfg.algorithm};
  s.agents = make_agents(s.w, cfg.algorithm, s.problem.objectives, s.problem.shards,
                         s.problem.init, cfg.hyper);
  s.ctx.topology = &s.w;
  s.ctx.hyper = cfg.hyper;
  s.ctx.op = cfg.compression;
  s.ctx.seed = cfg.seed;
  s.ctx.policy = cfg.policy;
  return s;
}

// Tiny MLP on non-IID blobs over a 5-agent ring.
inline RunConfig tiny_mlp(Algorithm a, std::uint64_t seed) {
  RunConfig c;
  c.algorithm = a;
  c.agents = 5;
  c.classes = 4;
  c.per_class = 20;
  c.d_in = 4;
  c.hidden = 6;
  c.alpha = 0.5;
  c.seed = seed;
  c.rounds = 200;
  c.hyper.eta = 0.1;
  c.hyper.rho = 0.05;
  c.hyper.beta = 0.9;
  c.hyper.mu = 0.9;
  c.hyper.batch_size = 8;
  return c;
}

// Heterogeneous scalar quadratics on a ring.
inline RunConfig scalar_quadratics(Algorithm a, std::vector<double> centers) {
  RunConfig c;
  c.algorithm = a;
  c.model = ModelKind::quadratic;
  c.agents = centers.size();
  c.quad_centers = std::move(centers);
  c.init_scale = 0.0;
  c.rounds = 100;
  return c;
}

}  // namespace fixture
