// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "saddle/algorithms.hpp"
#include "saddle/metrics.hpp"

namespace saddle {

/// One fully specified training run.
struct RunConfig {
  std::string name = "run";
  Algorithm algorithm = Algorithm::dpsgd;

  TopologyKind topology = TopologyKind::ring;
  std::size_t agents = 5;
  std::size_t torus_rows = 0;
  std::size_t torus_cols = 0;

  // "blobs", "spirals" or "file:<path>"
  std::string dataset = "blobs";
  std::size_t classes = 10;
  std::size_t per_class = 50;
  std::size_t d_in = 10;
  double spread = 0.5;
  double noise = 0.1;
  double test_fraction = 0.2;
  bool iid = false;
  double alpha = 1.0;

  ModelKind model = ModelKind::mlp;
  std::size_t hidden = 16;
  double init_scale = 1.0;
  // Quadratic agents: f_i(x) = 1/2 sum_k a_k (x_k - c_ik)^2 with a log-spaced in
  // [1, quad_cond]. Centers come from quad_centers (agents * quad_dim values,
  // agent-major) or are drawn N(0, quad_spread^2).
  std::size_t quad_dim = 1;
  double quad_cond = 1.0;
  double quad_spread = 1.0;
  std::vector<double> quad_centers;

  Hyper hyper;
  std::size_t rounds = 100;
  CompressionOp compression;
  std::string lr_schedule = "constant";
  std::uint64_t seed = 1;

  std::size_t log_every = 1;
  std::vector<double> lambda_checkpoints;  // fractions of training in (0, 1]
  std::size_t lambda_iters = 50;
  double lambda_tol = 1e-4;
  std::size_t lambda_samples = 256;
  std::size_t variance_samples = 0;  // 0 skips the variance diagnostics
  std::size_t surface_points = 0;    // 0 skips the loss surface
  double surface_extent = 1.0;

  ExecPolicy policy = ExecPolicy::parallel;
};

/// Everything a run needs before the first round.
struct Problem {
  std::shared_ptr<const DatasetPair> data;  // null for quadratic runs
  std::vector<std::shared_ptr<const GradOracle>> objectives;
  std::vector<Shard> shards;
  Vec init;
  Layout layout;
};

MixingMatrix build_topology(const RunConfig& cfg);
Problem build_problem(const RunConfig& cfg);

struct RunResult {
  MetricsLog log;
  Vec consensus;                       // mean model after the last completed round
  std::vector<Vec> final_params;       // per agent
  std::optional<LossSurface> surface;  // when surface_points > 0
  CostReport cost;
  std::size_t dim = 0;
};

/// Executes cfg.rounds synchronous rounds and records metrics. Divergence ends
/// the run early with the log flagged; it is not reported as an exception.
RunResult run(const RunConfig& cfg);

}  // namespace saddle
