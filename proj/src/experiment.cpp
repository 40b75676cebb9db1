// SPDX-License-Identifier: Apache-2.0
#include "saddle/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "saddle/error.hpp"

namespace saddle {

namespace {

// Mean of the agents' objectives, for global diagnostics of data-free runs.
class AveragedObjective final : public GradOracle {
 public:
  explicit AveragedObjective(std::vector<std::shared_ptr<const GradOracle>> parts)
      : GradOracle(parts.front()->layout()), parts_(std::move(parts)) {}

  ModelKind kind() const override { return parts_.front()->kind(); }
  bool uses_data() const override { return false; }

  Vec hvp(std::span<const double> params, const Batch& batch,
          std::span<const double> v) const override {
    Vec out(dim(), 0.0);
    for (const auto& p : parts_) {
      const Vec h = p->hvp(params, batch, v);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] += h[k];
    }
    for (auto& x : out) x /= static_cast<double>(parts_.size());
    return out;
  }

 private:
  double loss_impl(std::span<const double> params, const Batch& batch) const override {
    double total = 0.0;
    for (const auto& p : parts_) total += p->loss(params, batch);
    return total / static_cast<double>(parts_.size());
  }

  double loss_and_grad_impl(std::span<const double> params, const Batch& batch,
                            std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    Vec g(dim());
    double total = 0.0;
    for (const auto& p : parts_) {
      total += p->loss_and_grad(params, batch, g);
      for (std::size_t k = 0; k < g.size(); ++k) out[k] += g[k];
    }
    const double n = static_cast<double>(parts_.size());
    for (auto& x : out) x /= n;
    return total / n;
  }

  std::vector<std::shared_ptr<const GradOracle>> parts_;
};

std::shared_ptr<const DatasetPair> build_data(const RunConfig& cfg) {
  DatasetPair pair;
  if (cfg.dataset == "blobs") {
    pair = make_blobs(cfg.classes, cfg.per_class, cfg.d_in, cfg.spread, cfg.seed);
  } else if (cfg.dataset == "spirals") {
    pair = make_spirals(cfg.per_class, cfg.noise, cfg.seed);
  } else if (cfg.dataset.starts_with("file:")) {
    pair = load_dataset_file(cfg.dataset.substr(5), cfg.test_fraction, cfg.seed);
  } else {
    throw ConfigError(fmt::format("unknown dataset '{}'", cfg.dataset));
  }
  return std::make_shared<const DatasetPair>(std::move(pair));
}

void build_quadratic(const RunConfig& cfg, Problem& p) {
  const std::size_t n = cfg.agents;
  const std::size_t d = cfg.quad_dim;
  if (d == 0) throw ConfigError("quad_dim must be >= 1");
  if (!(cfg.quad_cond >= 1.0)) throw ConfigError("quad_cond must be >= 1");
  Vec curvature(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double t = d == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(d - 1);
    curvature[k] = std::pow(cfg.quad_cond, t);
  }
  Vec centers = cfg.quad_centers;
  if (centers.empty()) {
    Rng rng = make_stream(cfg.seed, Stream::objective);
    centers.resize(n * d);
    for (auto& c : centers) c = cfg.quad_spread * standard_normal(rng);
  } else if (centers.size() != n * d) {
    throw ConfigError(fmt::format("quad_centers needs agents * quad_dim = {} values, got {}",
                                  n * d, centers.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    Vec c(centers.begin() + static_cast<std::ptrdiff_t>(i * d),
          centers.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
    p.objectives.push_back(QuadraticOracle::diagonal(curvature, std::move(c)));
    p.shards.push_back(Shard{});
  }
  p.layout = p.objectives.front()->layout();
  p.init = p.objectives.front()->init_params(cfg.seed, cfg.init_scale).values;
}

// Evenly strided subset of the training set used for global diagnostics.
Batch diagnostic_batch(const Problem& p, std::size_t samples) {
  Batch b;
  if (!p.data) return b;
  b.data = &p.data->train;
  const std::size_t total = p.data->train.size();
  const std::size_t count = std::min(std::max<std::size_t>(samples, 1), total);
  for (std::size_t k = 0; k < count; ++k) b.indices.push_back(k * total / count);
  return b;
}

std::shared_ptr<const GradOracle> global_objective(const Problem& p) {
  if (p.data) return p.objectives.front();
  return std::make_shared<AveragedObjective>(p.objectives);
}

MetricsRow evaluate(const std::vector<AgentState>& agents, const Problem& p, std::size_t round,
                    ExecPolicy policy) {
  const std::size_t n = agents.size();
  std::vector<double> losses(n);
  std::vector<double> norms(n);
  for_each_index(policy, n, [&](std::size_t i) {
    const auto& a = agents[i];
    Vec g(a.params.size());
    losses[i] = a.objective->loss_and_grad(a.params, full_batch(a.shard), g);
    norms[i] = norm2(g);
  });
  MetricsRow row;
  row.round = round;
  for (std::size_t i = 0; i < n; ++i) {
    row.train_loss_mean += losses[i];
    row.grad_norm_mean += norms[i];
  }
  row.train_loss_mean /= static_cast<double>(n);
  row.grad_norm_mean /= static_cast<double>(n);
  row.consensus_error = consensus_error(agents);
  if (p.data) {
    const Vec mean = consensus_model(agents);
    row.test_acc_consensus = p.objectives.front()->accuracy(mean, p.data->test);
  }
  return row;
}

bool all_finite(const std::vector<AgentState>& agents) {
  for (const auto& a : agents)
    for (double v : a.params)
      if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

MixingMatrix build_topology(const RunConfig& cfg) {
  switch (cfg.topology) {
    case TopologyKind::ring: return build_ring(cfg.agents);
    case TopologyKind::torus: {
      if (cfg.torus_rows * cfg.torus_cols != cfg.agents) {
        throw ConfigError(fmt::format("torus {}x{} does not hold {} agents", cfg.torus_rows,
                                      cfg.torus_cols, cfg.agents));
      }
      return build_torus(cfg.torus_rows, cfg.torus_cols);
    }
    case TopologyKind::complete: return build_complete(cfg.agents);
    case TopologyKind::custom: break;
  }
  throw ConfigError("custom topologies cannot be built from a run config");
}

Problem build_problem(const RunConfig& cfg) {
  Problem p;
  if (cfg.model == ModelKind::quadratic) {
    build_quadratic(cfg, p);
    return p;
  }
  p.data = build_data(cfg);
  const Dataset& train = p.data->train;
  const PartitionPlan plan = cfg.iid ? iid_partition(train, cfg.agents, cfg.seed)
                                     : partition_dirichlet(train, cfg.agents, cfg.alpha, cfg.seed);
  std::shared_ptr<const GradOracle> model;
  if (cfg.model == ModelKind::logistic_regression) {
    model = std::make_shared<LogisticRegressionOracle>(train.d_in, train.classes);
  } else {
    model = std::make_shared<MlpOracle>(train.d_in, cfg.hidden, train.classes);
  }
  for (auto& idx : plan.shards()) {
    p.objectives.push_back(model);
    p.shards.push_back(Shard{&train, std::move(idx)});
  }
  p.layout = model->layout();
  p.init = model->init_params(cfg.seed, cfg.init_scale).values;
  return p;
}

RunResult run(const RunConfig& cfg) {
  const MixingMatrix w = build_topology(cfg);
  const Problem problem = build_problem(cfg);
  const LrSchedule schedule = LrSchedule::parse(cfg.lr_schedule, cfg.hyper.eta);
  std::vector<AgentState> agents =
      make_agents(w, cfg.algorithm, problem.objectives, problem.shards, problem.init, cfg.hyper);
  const auto global = global_objective(problem);
  const Batch diag = diagnostic_batch(problem, cfg.lambda_samples);
  const std::size_t log_every = std::max<std::size_t>(cfg.log_every, 1);

  std::vector<std::size_t> checkpoints;
  for (double f : cfg.lambda_checkpoints) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("lambda checkpoints must lie in (0, 1]");
    const auto r = static_cast<std::size_t>(std::llround(f * static_cast<double>(cfg.rounds)));
    checkpoints.push_back(std::max<std::size_t>(r, 1));
  }

  RunResult result;
  result.dim = problem.layout.size();
  MetricsLog& log = result.log;
  log.rows.push_back(evaluate(agents, problem, 0, cfg.policy));

  RoundContext ctx;
  ctx.topology = &w;
  ctx.hyper = cfg.hyper;
  ctx.op = cfg.compression;
  ctx.seed = cfg.seed;
  ctx.policy = cfg.policy;

  std::uint64_t bits = 0;
  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    ctx.round = t;
    ctx.hyper.eta = schedule.at(t, cfg.rounds);
    try {
      const RoundStats stats = step(cfg.algorithm, agents, ctx);
      bits += stats.bits;
      if (t % log_every == 0 || t == cfg.rounds) {
        MetricsRow row = evaluate(agents, problem, t, cfg.policy);
        row.compression_error_sum = stats.compression_error_sum;
        row.update_norm_sum = stats.update_norm_sum;
        row.bits_transmitted_cumulative = bits;
        log.rows.push_back(row);
      }
      if (std::find(checkpoints.begin(), checkpoints.end(), t) != checkpoints.end()) {
        Rng rng = make_stream(cfg.seed, Stream::lambda, 0, t);
        LambdaOptions opts;
        opts.iters = cfg.lambda_iters;
        opts.tol = cfg.lambda_tol;
        log.lambda_max_samples.push_back(
            {t, lambda_max(*global, consensus_model(agents), diag, opts, rng)});
      }
    } catch (const NumericError& e) {
      log.diverged = true;
      log.divergence_message = fmt::format("round {}: {}", t, e.what());
      break;
    }
  }

  if (!log.diverged && !all_finite(agents)) {
    log.diverged = true;
    log.divergence_message = "non-finite parameters";
  }
  result.final_params.reserve(agents.size());
  for (const auto& a : agents) result.final_params.push_back(a.params);
  result.consensus = consensus_model(agents);

  if (!log.diverged) {
    try {
      if (cfg.variance_samples > 0) {
        log.variance = variance_diagnostics(agents, result.consensus, cfg.hyper.batch_size,
                                            cfg.variance_samples, cfg.seed);
      }
      if (cfg.surface_points > 0) {
        Rng rng = make_stream(cfg.seed, Stream::surface);
        result.surface = loss_surface(*global, result.consensus, diag, cfg.surface_extent,
                                      cfg.surface_points, rng);
      }
    } catch (const NumericError& e) {
      log.diverged = true;
      log.divergence_message = fmt::format("end of run: {}", e.what());
    }
  }
  result.cost = comm_cost_report(log, cfg.algorithm, w, result.dim);
  return result;
}

}  // namespace saddle
