// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saddle/algorithms.hpp"

namespace saddle {

struct MetricsRow {
  std::size_t round = 0;
  double train_loss_mean = 0.0;
  double test_acc_consensus = 0.0;
  double consensus_error = 0.0;
  double grad_norm_mean = 0.0;
  double compression_error_sum = 0.0;  // summed over agents and blocks
  double update_norm_sum = 0.0;        // summed over agents and blocks
  std::uint64_t bits_transmitted_cumulative = 0;
};

struct LambdaSample {
  std::size_t round = 0;
  double value = 0.0;
};

struct VarianceDiagnostics {
  double sigma2_hat = 0.0;
  double delta2_hat = 0.0;
};

struct MetricsLog {
  std::vector<MetricsRow> rows;
  std::vector<LambdaSample> lambda_max_samples;
  std::optional<VarianceDiagnostics> variance;
  bool diverged = false;
  std::string divergence_message;
};

/// Column names of the per-round CSV, in output order.
std::span<const std::string_view> metrics_columns();
void write_metrics_csv(const MetricsLog& log, std::ostream& out);
std::string metrics_csv(const MetricsLog& log);

/// Arithmetic mean of the replicas.
Vec consensus_model(std::span<const Vec> params);
Vec consensus_model(const std::vector<AgentState>& agents);

/// (1/n) sum_i ||x_i - mean||^2.
double consensus_error(std::span<const Vec> params);
double consensus_error(const std::vector<AgentState>& agents);

struct CompressionNorms {
  double error_sum = 0.0;
  double payload_norm_sum = 0.0;
};

/// Sum over blocks of ||Q(theta) - theta|| and ||theta||.
CompressionNorms compression_error_norms(const Layout& layout, std::span<const double> theta,
                                         std::span<const double> compressed);

struct LambdaOptions {
  std::size_t iters = 100;
  double tol = 1e-6;
  std::size_t restarts = 2;
  /// First restart begins here when set; later restarts are random.
  std::optional<Vec> start;
};

/// Dominant eigenvalue of a symmetric linear operator by power iteration.
/// Returns the Rayleigh quotient of largest magnitude over the restarts.
double lambda_max(const std::function<Vec(std::span<const double>)>& apply, std::size_t dim,
                  const LambdaOptions& opts, Rng& rng);

/// Largest Hessian eigenvalue of the oracle loss at `params` over `batch`.
double lambda_max(const GradOracle& oracle, std::span<const double> params, const Batch& batch,
                  const LambdaOptions& opts, Rng& rng);

struct LossSurface {
  std::vector<double> axis;    // grid coordinates, shared by both directions
  std::vector<double> losses;  // axis.size()^2, row = a index, column = b index
  Vec u;
  Vec v;

  double at(std::size_t ia, std::size_t ib) const { return losses[ia * axis.size() + ib]; }
};

/// Loss over params + a u + b v for two orthonormal Gaussian directions and a
/// uniform grid of `grid_points` (odd) values in [-extent, extent].
LossSurface loss_surface(const GradOracle& oracle, std::span<const double> params,
                         const Batch& batch, double extent, std::size_t grid_points, Rng& rng);
void write_surface_csv(const LossSurface& surface, std::ostream& out);

/// Minibatch gradient variance around each agent's full-shard gradient, and the
/// spread of full-shard gradients across agents, both at `point`.
VarianceDiagnostics variance_diagnostics(const std::vector<AgentState>& agents,
                                         std::span<const double> point,
                                         std::size_t batch_size, std::size_t samples,
                                         std::uint64_t seed);

struct CostReport {
  std::uint64_t bits_total = 0;
  double bits_per_agent = 0.0;
  double gb_per_agent = 0.0;
  std::uint64_t baseline_bits_total = 0;  // same rounds, every message uncompressed
  double ratio = 1.0;                     // baseline / actual
};

/// Exact per-round traffic of `algorithm` with operator `op` (identity for the
/// uncompressed engines).
std::uint64_t bits_per_round(Algorithm algorithm, const CompressionOp& op,
                             const MixingMatrix& w, const Layout& layout);

CostReport comm_cost_report(const MetricsLog& log, Algorithm algorithm, const MixingMatrix& w,
                            std::size_t dim);

}  // namespace saddle
