// SPDX-License-Identifier: Apache-2.0
#include "saddle/topology.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "saddle/error.hpp"

namespace saddle {

namespace {

constexpr double kStochasticTol = 1e-12;
constexpr double kDisconnectedTol = 1e-12;

void add_edge(std::vector<double>& w, std::size_t n, std::size_t i, std::size_t j,
              double weight) {
  w[i * n + j] = weight;
  w[j * n + i] = weight;
}

}  // namespace

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::ring: return "ring";
    case TopologyKind::torus: return "torus";
    case TopologyKind::complete: return "complete";
    case TopologyKind::custom: return "custom";
  }
  return "custom";
}

MixingMatrix MixingMatrix::from_weights(std::size_t n, std::vector<double> weights,
                                        TopologyKind kind, std::size_t rows,
                                        std::size_t cols) {
  if (n == 0) throw TopologyError("mixing matrix needs at least one agent");
  if (weights.size() != n * n) {
    throw TopologyError(fmt::format("expected {} weights for n={}, got {}", n * n, n,
                                    weights.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    double col_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double wij = weights[i * n + j];
      if (!std::isfinite(wij) || wij < 0.0) {
        throw TopologyError(fmt::format("weight w[{}][{}] = {} is not a finite "
                                        "non-negative value", i, j, wij));
      }
      if (wij != weights[j * n + i]) {
        throw TopologyError(fmt::format("mixing matrix not symmetric at ({}, {})", i, j));
      }
      row_sum += wij;
      col_sum += weights[j * n + i];
    }
    if (std::abs(row_sum - 1.0) > kStochasticTol || std::abs(col_sum - 1.0) > kStochasticTol) {
      throw TopologyError(fmt::format("row/column {} does not sum to 1", i));
    }
    if (!(weights[i * n + i] > 0.0)) {
      throw TopologyError(fmt::format("agent {} has no self weight", i));
    }
  }

  MixingMatrix m;
  m.n_ = n;
  m.kind_ = kind;
  m.rows_ = rows;
  m.cols_ = cols;
  m.weights_ = std::move(weights);
  m.neighbors_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double wij = m.weights_[i * n + j];
      if (wij != 0.0) m.neighbors_[i].push_back({j, wij});
    }
  }
  const double sigma2 = second_singular_value(m);
  m.connected_ = sigma2 < 1.0 - kDisconnectedTol;
  m.spectral_gap_ = m.connected_ ? 1.0 - sigma2 * sigma2 : 0.0;
  return m;
}

MixingMatrix build_ring(std::size_t n) {
  if (n < 2) throw TopologyError(fmt::format("ring needs n >= 2, got {}", n));
  std::vector<double> w(n * n, 0.0);
  if (n == 2) {
    std::fill(w.begin(), w.end(), 0.5);
  } else {
    const double third = 1.0 / 3.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i * n + i] = third;
      add_edge(w, n, i, (i + 1) % n, third);
    }
  }
  return MixingMatrix::from_weights(n, std::move(w), TopologyKind::ring);
}

MixingMatrix build_torus(std::size_t rows, std::size_t cols) {
  if (rows < 3 || cols < 3) {
    throw TopologyError(
        fmt::format("torus needs rows >= 3 and cols >= 3, got {}x{}", rows, cols));
  }
  const std::size_t n = rows * cols;
  const double fifth = 1.0 / 5.0;
  std::vector<double> w(n * n, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      w[i * n + i] = fifth;
      add_edge(w, n, i, r * cols + (c + 1) % cols, fifth);
      add_edge(w, n, i, ((r + 1) % rows) * cols + c, fifth);
    }
  }
  return MixingMatrix::from_weights(n, std::move(w), TopologyKind::torus, rows, cols);
}

MixingMatrix build_complete(std::size_t n) {
  if (n < 1) throw TopologyError("complete graph needs n >= 1");
  std::vector<double> w(n * n, 1.0 / static_cast<double>(n));
  return MixingMatrix::from_weights(n, std::move(w), TopologyKind::complete);
}

double second_singular_value(const MixingMatrix& w) {
  const std::size_t n = w.size();
  if (n == 1) return 0.0;
  Eigen::MatrixXd dense(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dense(i, j) = w.weight(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense, Eigen::EigenvaluesOnly);
  std::vector<double> mags(n);
  for (std::size_t k = 0; k < n; ++k) mags[k] = std::abs(solver.eigenvalues()(k));
  std::sort(mags.begin(), mags.end(), std::greater<>());
  return mags[1];
}

double spectral_gap(const MixingMatrix& w) { return w.spectral_gap(); }

void gossip_mix(const MixingMatrix& w, std::span<const std::vector<double>> in,
                std::vector<std::vector<double>>& out, ExecPolicy policy) {
  const std::size_t n = w.size();
  if (in.size() != n) throw ShapeError("gossip_mix: one input vector per agent required");
  const std::size_t d = in.empty() ? 0 : in[0].size();
  for (const auto& v : in) {
    if (v.size() != d) throw ShapeError("gossip_mix: ragged input vectors");
  }
  out.resize(n);
  for_each_index(policy, n, [&](std::size_t i) {
    auto& dst = out[i];
    dst.assign(d, 0.0);
    for (const Neighbor& nb : w.neighbors(i)) {
      const auto& src = in[nb.id];
      for (std::size_t k = 0; k < d; ++k) dst[k] += nb.weight * src[k];
    }
  });
}

std::vector<std::vector<double>> gossip_mix_reference(
    const MixingMatrix& w, std::span<const std::vector<double>> in) {
  const std::size_t n = w.size();
  const std::size_t d = in.empty() ? 0 : in[0].size();
  std::vector<std::vector<double>> out(n, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += w.weight(i, j) * in[j][k];
      out[i][k] = acc;
    }
  return out;
}

}  // namespace saddle
