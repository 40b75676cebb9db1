// SPDX-License-Identifier: Apache-2.0
#include "saddle/algorithms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <utility>

#include "saddle/error.hpp"
#include "saddle/metrics.hpp"

namespace saddle {

namespace {

constexpr std::array<std::pair<Algorithm, std::string_view>, 10> kAlgorithmNames{{
    {Algorithm::dpsgd, "dpsgd"},
    {Algorithm::d_saddle, "d_saddle"},
    {Algorithm::qgm, "qgm"},
    {Algorithm::q_saddle, "q_saddle"},
    {Algorithm::comp_qgm, "comp_qgm"},
    {Algorithm::comp_q_saddle, "comp_q_saddle"},
    {Algorithm::ngm, "ngm"},
    {Algorithm::n_saddle, "n_saddle"},
    {Algorithm::comp_ngm, "comp_ngm"},
    {Algorithm::comp_n_saddle, "comp_n_saddle"},
}};

void check_finite(const AgentState& agent, std::size_t round) {
  for (double v : agent.params) {
    if (!std::isfinite(v)) {
      throw NumericError(fmt::format("agent {} diverged in round {}", agent.id, round));
    }
  }
}

std::size_t dim_of(const std::vector<AgentState>& agents) {
  return agents.empty() ? 0 : agents.front().params.size();
}

std::uint64_t directed_edges(const MixingMatrix& w) {
  std::uint64_t edges = 0;
  for (std::size_t i = 0; i < w.size(); ++i) edges += w.degree(i);
  return edges;
}

// Position of agent `target` inside neighbors(owner).
std::size_t neighbor_slot(const MixingMatrix& w, std::size_t owner, std::size_t target) {
  const auto nbrs = w.neighbors(owner);
  for (std::size_t k = 0; k < nbrs.size(); ++k)
    if (nbrs[k].id == target) return k;
  throw TopologyError(fmt::format("agent {} is not a neighbor of {}", target, owner));
}

RoundStats reduce_stats(const std::vector<RoundStats>& per_agent) {
  RoundStats total;
  for (const auto& s : per_agent) {
    total.bits += s.bits;
    total.compression_error_sum += s.compression_error_sum;
    total.update_norm_sum += s.update_norm_sum;
  }
  return total;
}

Batch agent_batch(const AgentState& agent, const RoundContext& ctx) {
  Rng rng = make_stream(ctx.seed, Stream::batch, agent.id, ctx.round);
  return sample_batch(agent.shard, ctx.hyper.batch_size, rng);
}

void check_context(const std::vector<AgentState>& agents, const RoundContext& ctx) {
  if (ctx.topology == nullptr) throw Error("round context has no topology");
  if (agents.size() != ctx.topology->size()) {
    throw ShapeError(fmt::format("{} agents for a {}-agent topology", agents.size(),
                                 ctx.topology->size()));
  }
  if (!(ctx.hyper.eta > 0.0)) throw NumericError("eta must be > 0");
}

}  // namespace

Algorithm parse_algorithm(std::string_view name) {
  for (const auto& [a, n] : kAlgorithmNames)
    if (n == name) return a;
  throw ConfigError(fmt::format("unknown algorithm '{}'", name));
}

std::string to_string(Algorithm a) {
  for (const auto& [alg, n] : kAlgorithmNames)
    if (alg == a) return std::string(n);
  return "unknown";
}

Family family_of(Algorithm a) {
  switch (a) {
    case Algorithm::dpsgd:
    case Algorithm::d_saddle: return Family::dpsgd;
    case Algorithm::qgm:
    case Algorithm::q_saddle: return Family::qgm;
    case Algorithm::comp_qgm:
    case Algorithm::comp_q_saddle: return Family::comp_qgm;
    case Algorithm::ngm:
    case Algorithm::n_saddle: return Family::ngm;
    case Algorithm::comp_ngm:
    case Algorithm::comp_n_saddle: return Family::comp_ngm;
  }
  return Family::dpsgd;
}

bool uses_sam(Algorithm a) {
  return a == Algorithm::d_saddle || a == Algorithm::q_saddle ||
         a == Algorithm::comp_q_saddle || a == Algorithm::n_saddle ||
         a == Algorithm::comp_n_saddle;
}

bool is_compressed(Algorithm a) {
  const Family f = family_of(a);
  return f == Family::comp_qgm || f == Family::comp_ngm;
}

bool is_ngm_family(Algorithm a) {
  const Family f = family_of(a);
  return f == Family::ngm || f == Family::comp_ngm;
}

Batch sample_batch(const Shard& shard, std::size_t batch_size, Rng& rng) {
  Batch batch;
  batch.data = shard.data;
  if (shard.data == nullptr) return batch;
  if (batch_size >= shard.indices.size()) {
    batch.indices = shard.indices;
  } else {
    // Partial Fisher-Yates over a copy of the shard.
    std::vector<std::size_t> pool = shard.indices;
    for (std::size_t k = 0; k < batch_size; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    batch.indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(batch_size));
  }
  std::sort(batch.indices.begin(), batch.indices.end());
  return batch;
}

Batch full_batch(const Shard& shard) { return Batch{shard.data, shard.indices}; }

std::vector<AgentState> make_agents(
    const MixingMatrix& w, Algorithm algorithm,
    const std::vector<std::shared_ptr<const GradOracle>>& objectives,
    const std::vector<Shard>& shards, const Vec& init, const Hyper& hyper) {
  const std::size_t n = w.size();
  if (objectives.size() != n || shards.size() != n) {
    throw ShapeError("one objective and one shard per agent required");
  }
  std::vector<AgentState> agents(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = agents[i];
    a.id = i;
    a.objective = objectives[i];
    if (a.objective == nullptr || a.objective->dim() != init.size()) {
      throw ShapeError(fmt::format("agent {} objective does not match the parameter size", i));
    }
    a.shard = shards[i];
    a.params = init;
    a.momentum = MomentumState::zeros(init.size(), hyper.beta, hyper.mu);
    const Family f = family_of(algorithm);
    for (const Neighbor& nb : w.neighbors(i)) {
      if (f == Family::comp_qgm) a.xhat[nb.id] = Vec(init.size(), 0.0);
      if (f == Family::comp_ngm) a.error_feedback[nb.id].residual.assign(init.size(), 0.0);
    }
  }
  return agents;
}

// ---------------------------------------------------------------------------

RoundStats step_dpsgd(std::vector<AgentState>& agents, const RoundContext& ctx) {
  check_context(agents, ctx);
  const MixingMatrix& w = *ctx.topology;
  const std::size_t n = agents.size();
  const std::size_t d = dim_of(agents);
  std::vector<Vec> half(n);

  for_each_index(ctx.policy, n, [&](std::size_t i) {
    auto& a = agents[i];
    const Batch batch = agent_batch(a, ctx);
    const SamResult sam = sam_gradient(*a.objective, a.params, batch, ctx.hyper.rho);
    half[i].resize(d);
    for (std::size_t k = 0; k < d; ++k) half[i][k] = a.params[k] - ctx.hyper.eta * sam.perturbed_grad[k];
  });

  std::vector<Vec> mixed;
  gossip_mix(w, half, mixed, ctx.policy);
  for_each_index(ctx.policy, n, [&](std::size_t i) {
    agents[i].params = std::move(mixed[i]);
    check_finite(agents[i], ctx.round);
  });
  return {uncompressed_bits_per_round(Algorithm::dpsgd, w, d), 0.0, 0.0};
}

RoundStats step_q_saddle(std::vector<AgentState>& agents, const RoundContext& ctx) {
  check_context(agents, ctx);
  const MixingMatrix& w = *ctx.topology;
  const std::size_t n = agents.size();
  const std::size_t d = dim_of(agents);
  std::vector<Vec> half(n);

  for_each_index(ctx.policy, n, [&](std::size_t i) {
    auto& a = agents[i];
    const Batch batch = agent_batch(a, ctx);
    const SamResult sam = sam_gradient(*a.objective, a.params, batch, ctx.hyper.rho);
    qgm_in_step_momentum(a.momentum, sam.perturbed_grad);
    half[i].resize(d);
    for (std::size_t k = 0; k < d; ++k) half[i][k] = a.params[k] - ctx.hyper.eta * a.momentum.m[k];
  });

  std::vector<Vec> mixed;
  gossip_mix(w, half, mixed, ctx.policy);
  for_each_index(ctx.policy, n, [&](std::size_t i) {
    auto& a = agents[i];
    qgm_momentum_update(a.momentum, a.params, mixed[i], ctx.hyper.eta);
    a.params = std::move(mixed[i]);
    check_finite(a, ctx.round);
  });
  return {uncompressed_bits_per_round(Algorithm::qgm, w, d), 0.0, 0.0};
}

RoundStats step_comp_q_saddle(std::vector<AgentState>& agents, const RoundContext& ctx) {
  check_context(agents, ctx);
  const MixingMatrix& w = *ctx.topology;
  const std::size_t n = agents.size();
  const std::size_t d = dim_of(agents);
  std::vector<Vec> sent(n);  // decoded q_i, what every neighbor of i receives
  std::vector<RoundStats> stats(n);

  for_each_index(ctx.policy, n, [&](std::size_t i) {
    auto& a = agents[i];
    const Layout& layout = a.objective->layout();
    const Batch batch = agent_batch(a, ctx);
    const SamResult sam = sam_gradient(*a.objective, a.params, batch, ctx.hyper.rho);
    qgm_in_step_momentum(a.momentum, sam.perturbed_grad);

    // x^{t+1} = x^{t+1/2} + gamma * sum_j w_ij (x_hat_j - x_hat_i), round-t copies.
    const Vec& own_copy = a.xhat.at(i);
    Vec next(d);
    for (std::size_t k = 0; k < d; ++k) {
      double pull = 0.0;
      for (const Neighbor& nb : w.neighbors(i))
        pull += nb.weight * (a.xhat.at(nb.id)[k] - own_copy[k]);
      next[k] = (a.params[k] - ctx.hyper.eta * a.momentum.m[k]) + ctx.hyper.gamma * pull;
    }
    qgm_momentum_update(a.momentum, a.params, next, ctx.hyper.eta);

    Vec theta(d);
    for (std::size_t k = 0; k < d; ++k) theta[k] = next[k] - own_copy[k];
    Rng rng = make_stream(ctx.seed, Stream::compress, i, ctx.round);
    const CompressedMessage msg = compress(ctx.op, theta, layout, rng);
    sent[i] = msg.decode(layout);
    stats[i].bits = msg.bit_cost * w.degree(i);
    const CompressionNorms norms = compression_error_norms(layout, theta, sent[i]);
    stats[i].compression_error_sum = norms.error_sum;
    stats[i].update_norm_sum = norms.payload_norm_sum;
    a.params = std::move(next);
  });

  for_each_index(ctx.policy, n, [&](std::size_t i) {
    auto& a = agents[i];
    for (const Neighbor& nb : w.neighbors(i)) {
      Vec& copy = a.xhat.at(nb.id);
      const Vec& q = sent[nb.id];
      for (std::size_t k = 0; k < d; ++k) copy[k] = q[k] + copy[k];
    }
    check_finite(a, ctx.round);
  });
  return reduce_stats(stats);
}

namespace {

// Shared body of the NGM family. `compressed` selects the error-feedback
// variant of the cross-gradient round.
RoundStats ngm_round(std::vector<AgentState>& agents, const RoundContext& ctx,
                     bool compressed) {
  check_context(agents, ctx);
  const MixingMatrix& w = *ctx.topology;
  const std::size_t n = agents.size();
  const std::size_t d = dim_of(agents);

  // outbox[j][k]: gradient agent j computed for the model of its k-th neighbor.
  std::vector<std::vector<Vec>> outbox(n);
  std::vector<RoundStats> stats(n);

  for_each_index(ctx.policy, n, [&](std::size_t j) {
    auto& a = agents[j];
    const Layout& layout = a.objective->layout();
    const Batch batch = agent_batch(a, ctx);
    Rng rng = make_stream(ctx.seed, Stream::compress, j, ctx.round);
    const auto nbrs = w.neighbors(j);
    outbox[j].resize(nbrs.size());
    std::uint64_t payload_bits = 0;
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const std::size_t owner = nbrs[k].id;
      // Round one delivered x_owner^t; evaluate it on this agent's batch.
      SamResult sam = sam_gradient(*a.objective, agents[owner].params, batch, ctx.hyper.rho);
      if (!compressed) {
        outbox[j][k] = std::move(sam.perturbed_grad);
        if (owner != j) payload_bits += CompressionOp::identity().bit_cost(layout);
        continue;
      }
      FeedbackResult fb = apply_error_feedback(sam.perturbed_grad, a.error_feedback.at(owner),
                                               ctx.op, layout, rng);
      const CompressionNorms norms = compression_error_norms(layout, fb.corrected, fb.decoded);
      stats[j].compression_error_sum += norms.error_sum;
      stats[j].update_norm_sum += norms.payload_norm_sum;
      if (owner != j) payload_bits += fb.message.bit_cost;
      outbox[j][k] = std::move(fb.decoded);
    }
    stats[j].bits = CompressionOp::identity().bit_cost(layout) * w.degree(j) + payload_bits;
  });

  std::vector<Vec> next(n);
  for_each_index(ctx.policy, n, [&](std::size_t i) {
    auto& a = agents[i];
    Vec g(d, 0.0);
    for (const Neighbor& nb : w.neighbors(i)) {
      const Vec& from = outbox[nb.id][neighbor_slot(w, nb.id, i)];
      for (std::size_t k = 0; k < d; ++k) g[k] += nb.weight * from[k];
    }
    Vec direction(d);
    local_momentum_step(a.momentum, g, ctx.hyper.nesterov, direction);
    next[i].resize(d);
    for (std::size_t k = 0; k < d; ++k) {
      double pull = 0.0;
      for (const Neighbor& nb : w.neighbors(i)) {
        const double coeff = nb.weight - (nb.id == i ? 1.0 : 0.0);
        pull += coeff * agents[nb.id].params[k];
      }
      next[i][k] = (a.params[k] - ctx.hyper.eta * direction[k]) + ctx.hyper.gamma * pull;
    }
  });

  for_each_index(ctx.policy, n, [&](std::size_t i) {
    agents[i].params = std::move(next[i]);
    check_finite(agents[i], ctx.round);
  });
  return reduce_stats(stats);
}

}  // namespace

RoundStats step_n_saddle(std::vector<AgentState>& agents, const RoundContext& ctx) {
  return ngm_round(agents, ctx, false);
}

RoundStats step_comp_n_saddle(std::vector<AgentState>& agents, const RoundContext& ctx) {
  return ngm_round(agents, ctx, true);
}

RoundStats step(Algorithm algorithm, std::vector<AgentState>& agents, RoundContext ctx) {
  if (!uses_sam(algorithm)) ctx.hyper.rho = 0.0;
  switch (family_of(algorithm)) {
    case Family::dpsgd: return step_dpsgd(agents, ctx);
    case Family::qgm: return step_q_saddle(agents, ctx);
    case Family::comp_qgm: return step_comp_q_saddle(agents, ctx);
    case Family::ngm: return step_n_saddle(agents, ctx);
    case Family::comp_ngm: return step_comp_n_saddle(agents, ctx);
  }
  throw Error("unknown algorithm family");
}

std::uint64_t uncompressed_bits_per_round(Algorithm algorithm, const MixingMatrix& w,
                                          std::size_t dim) {
  const std::uint64_t per_message = kFloatBits * dim;
  const std::uint64_t messages = is_ngm_family(algorithm) ? 2 : 1;
  return messages * per_message * directed_edges(w);
}

}  // namespace saddle
