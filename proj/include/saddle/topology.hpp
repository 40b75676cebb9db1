// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "saddle/parallel.hpp"

namespace saddle {

enum class TopologyKind { ring, torus, complete, custom };

std::string to_string(TopologyKind kind);

struct Neighbor {
  std::size_t id;
  double weight;
};

/// Symmetric doubly stochastic gossip matrix. Immutable after construction, so
/// it can be shared read-only between concurrently running agents.
class MixingMatrix {
 public:
  /// Validates the doubly-stochastic, symmetry and self-loop invariants and
  /// computes the spectral gap. Throws TopologyError on violation.
  static MixingMatrix from_weights(std::size_t n, std::vector<double> weights,
                                   TopologyKind kind = TopologyKind::custom,
                                   std::size_t rows = 0, std::size_t cols = 0);

  std::size_t size() const { return n_; }
  TopologyKind kind() const { return kind_; }
  std::size_t torus_rows() const { return rows_; }
  std::size_t torus_cols() const { return cols_; }

  double weight(std::size_t i, std::size_t j) const { return weights_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const {
    return {weights_.data() + i * n_, n_};
  }

  /// Nonzero entries of row i (self included), ascending by id.
  std::span<const Neighbor> neighbors(std::size_t i) const { return neighbors_[i]; }
  /// Number of peers excluding self.
  std::size_t degree(std::size_t i) const { return neighbors_[i].size() - 1; }

  double spectral_gap() const { return spectral_gap_; }
  /// False when the second singular value is 1, i.e. gossip cannot reach consensus.
  bool connected() const { return connected_; }

 private:
  MixingMatrix() = default;

  std::size_t n_ = 0;
  TopologyKind kind_ = TopologyKind::custom;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> weights_;
  std::vector<std::vector<Neighbor>> neighbors_;
  double spectral_gap_ = 0.0;
  bool connected_ = false;
};

MixingMatrix build_ring(std::size_t n);
MixingMatrix build_torus(std::size_t rows, std::size_t cols);
MixingMatrix build_complete(std::size_t n);

/// Second-largest singular value of a symmetric W (second-largest |eigenvalue|).
double second_singular_value(const MixingMatrix& w);

/// 1 - sigma_2(W)^2, or 0 for a disconnected graph.
double spectral_gap(const MixingMatrix& w);

/// out[i] = sum_j w_ij * in[j] over the sparse neighbor lists. All vectors in
/// `in` must have the same length; `out` is resized as needed.
void gossip_mix(const MixingMatrix& w, std::span<const std::vector<double>> in,
                std::vector<std::vector<double>>& out,
                ExecPolicy policy = ExecPolicy::parallel);

/// Serial dense reference for gossip_mix, kept for testing and benchmarking.
std::vector<std::vector<double>> gossip_mix_reference(
    const MixingMatrix& w, std::span<const std::vector<double>> in);

}  // namespace saddle
