// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "saddle/compression.hpp"
#include "saddle/model.hpp"
#include "saddle/optim.hpp"
#include "saddle/parallel.hpp"
#include "saddle/topology.hpp"

namespace saddle {

enum class Algorithm {
  dpsgd,
  d_saddle,
  qgm,
  q_saddle,
  comp_qgm,
  comp_q_saddle,
  ngm,
  n_saddle,
  comp_ngm,
  comp_n_saddle,
};

/// Round engine shared by an algorithm and its sharpness-aware twin.
enum class Family { dpsgd, qgm, comp_qgm, ngm, comp_ngm };

Algorithm parse_algorithm(std::string_view name);
std::string to_string(Algorithm a);
Family family_of(Algorithm a);
bool uses_sam(Algorithm a);
bool is_compressed(Algorithm a);
/// Two communication rounds per step (model exchange plus cross-gradients).
bool is_ngm_family(Algorithm a);

struct Hyper {
  double eta = 0.1;
  double rho = 0.0;
  double beta = 0.0;
  double mu = 0.0;
  double gamma = 1.0;
  bool nesterov = false;
  std::size_t batch_size = 32;
};

/// Training samples owned by one agent. Data-free objectives leave `data` null.
struct Shard {
  const Dataset* data = nullptr;
  std::vector<std::size_t> indices;
};

struct AgentState {
  std::size_t id = 0;
  Vec params;
  MomentumState momentum;
  /// Compressed copies x_hat_j of every neighbor j, self included (Comp Q-family).
  std::map<std::size_t, Vec> xhat;
  /// Error-feedback residual per model owner, self included (Comp N-family).
  std::map<std::size_t, ErrorFeedbackState> error_feedback;
  std::shared_ptr<const GradOracle> objective;
  Shard shard;
};

/// Builds agents with identical starting parameters and zeroed buffers.
std::vector<AgentState> make_agents(const MixingMatrix& w, Algorithm algorithm,
                                    const std::vector<std::shared_ptr<const GradOracle>>& objectives,
                                    const std::vector<Shard>& shards, const Vec& init,
                                    const Hyper& hyper);

/// Sorted sample of `batch_size` indices without replacement (the full shard
/// when it is not larger than the batch).
Batch sample_batch(const Shard& shard, std::size_t batch_size, Rng& rng);
Batch full_batch(const Shard& shard);

struct RoundContext {
  const MixingMatrix* topology = nullptr;
  Hyper hyper;
  CompressionOp op;
  std::uint64_t seed = 0;
  std::size_t round = 1;  // 1-based
  ExecPolicy policy = ExecPolicy::parallel;
};

struct RoundStats {
  std::uint64_t bits = 0;             // all messages sent this round
  double compression_error_sum = 0;   // sum of per-block ||Q(theta) - theta||
  double update_norm_sum = 0;         // sum of per-block ||theta||
};

/// DPSGD / D-SADDLe: local (SAM) step, then gossip of the half-step models.
RoundStats step_dpsgd(std::vector<AgentState>& agents, const RoundContext& ctx);
/// QGM / Q-SADDLe: quasi-global momentum around a gossip step.
RoundStats step_q_saddle(std::vector<AgentState>& agents, const RoundContext& ctx);
/// Comp QGM / Comp Q-SADDLe: gossip over compressed copies x_hat, exchanging
/// Q(x^{t+1} - x_hat_i).
RoundStats step_comp_q_saddle(std::vector<AgentState>& agents, const RoundContext& ctx);
/// NGM / N-SADDLe: self and cross (SAM) gradients, local momentum, gamma mixing.
RoundStats step_n_saddle(std::vector<AgentState>& agents, const RoundContext& ctx);
/// Comp NGM / Comp N-SADDLe: cross-gradient round compressed with error feedback.
RoundStats step_comp_n_saddle(std::vector<AgentState>& agents, const RoundContext& ctx);

/// Runs one round of the engine for `algorithm`. Non-SAM algorithms run with
/// rho = 0 whatever the context says.
RoundStats step(Algorithm algorithm, std::vector<AgentState>& agents, RoundContext ctx);

/// Bits one round sends when every message is an uncompressed model or gradient.
std::uint64_t uncompressed_bits_per_round(Algorithm algorithm, const MixingMatrix& w,
                                          std::size_t dim);

}  // namespace saddle
