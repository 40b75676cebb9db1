// SPDX-License-Identifier: Apache-2.0
// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the library's numerical kernels.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "saddle/datagen.hpp"
#include "saddle/model.hpp"
#include "saddle/topology.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix dense(const saddle::MixingMatrix& w) {
  Matrix m(w.size(), std::vector<double>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = 0; j < w.size(); ++j) m[i][j] = w.weight(i, j);
  return m;
}

// Cyclic Jacobi rotations on a symmetric matrix. Returns eigenvalues
// (unsorted) and, if requested, eigenvectors as columns.
inline std::vector<double> jacobi_eigenvalues(Matrix a, Matrix* vectors = nullptr) {
  const std::size_t n = a.size();
  Matrix v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i][i];
  if (vectors) *vectors = v;
  return eig;
}

// 1 - sigma_2^2 from the Jacobi spectrum.
inline double spectral_gap(const saddle::MixingMatrix& w) {
  auto eig = jacobi_eigenvalues(dense(w));
  for (auto& e : eig) e = std::abs(e);
  std::sort(eig.begin(), eig.end(), std::greater<>());
  const double s2 = eig.size() > 1 ? eig[1] : 0.0;
  return 1.0 - s2 * s2;
}

// Eigenvalues of the uniform ring: 1/3 + 2/3 cos(2 pi k / n).
inline double ring_gap_closed_form(std::size_t n) {
  if (n == 2) return 1.0;
  std::vector<double> eig;
  for (std::size_t k = 0; k < n; ++k)
    eig.push_back(std::abs(1.0 / 3.0 + 2.0 / 3.0 * std::cos(2.0 * M_PI * k / n)));
  std::sort(eig.begin(), eig.end(), std::greater<>());
  return 1.0 - eig[1] * eig[1];
}

// Central-difference gradient with step h relative to max(1, |x_k|).
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h_rel = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double x0 = x[k];
    const double h = h_rel * std::max(1.0, std::abs(x0));
    x[k] = x0 + h;
    const double up = f(x);
    x[k] = x0 - h;
    const double down = f(x);
    x[k] = x0;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

// Dense Hessian by central differences of an exact gradient, symmetrized.
inline Matrix fd_hessian(const std::function<std::vector<double>(const std::vector<double>&)>& grad,
                         std::vector<double> x, double h = 1e-5) {
  const std::size_t d = x.size();
  Matrix hess(d, std::vector<double>(d));
  for (std::size_t k = 0; k < d; ++k) {
    const double x0 = x[k];
    x[k] = x0 + h;
    const auto up = grad(x);
    x[k] = x0 - h;
    const auto down = grad(x);
    x[k] = x0;
    for (std::size_t j = 0; j < d; ++j) hess[j][k] = (up[j] - down[j]) / (2.0 * h);
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) hess[i][j] = hess[j][i] = 0.5 * (hess[i][j] + hess[j][i]);
  return hess;
}

inline std::vector<double> matvec(const Matrix& m, const std::vector<double>& v) {
  std::vector<double> out(m.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += m[i][j] * v[j];
  return out;
}

inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

// Straightforward MLP forward pass and mean cross-entropy, written without the
// library's helpers.
inline double mlp_loss(const std::vector<double>& p, std::size_t d_in, std::size_t hidden,
                       std::size_t classes, const saddle::Dataset& data,
                       const std::vector<std::size_t>& idx) {
  double total = 0.0;
  for (std::size_t s : idx) {
    const double* x = &data.features[s * d_in];
    std::vector<double> h(hidden), z(classes);
    for (std::size_t j = 0; j < hidden; ++j) {
      double a = 0.0;
      for (std::size_t k = 0; k < d_in; ++k) a += p[j * d_in + k] * x[k];
      h[j] = std::tanh(p[hidden * d_in + j] + a);
    }
    const std::size_t w2 = hidden * d_in + hidden;
    const std::size_t b2 = w2 + classes * hidden;
    for (std::size_t c = 0; c < classes; ++c) {
      double a = 0.0;
      for (std::size_t j = 0; j < hidden; ++j) a += p[w2 + c * hidden + j] * h[j];
      z[c] = p[b2 + c] + a;
    }
    const double peak = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double zc : z) sum += std::exp(zc - peak);
    total += std::log(sum) + peak - z[static_cast<std::size_t>(data.labels[s])];
  }
  return total / static_cast<double>(idx.size());
}

// Squared L2 mass of everything top-k discards, by sorting magnitudes.
inline double topk_tail_mass(std::vector<double> block, std::size_t k) {
  for (auto& x : block) x = x * x;
  std::sort(block.begin(), block.end(), std::greater<>());
  return std::accumulate(block.begin() + static_cast<std::ptrdiff_t>(k), block.end(), 0.0);
}

inline double consensus_error(const std::vector<std::vector<double>>& xs) {
  const std::size_t n = xs.size(), d = xs[0].size();
  double total = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    for (const auto& x : xs) mean += x[k];
    mean /= static_cast<double>(n);
    for (const auto& x : xs) total += (x[k] - mean) * (x[k] - mean);
  }
  return total / static_cast<double>(n);
}

inline double label_entropy(const saddle::Dataset& ds, const std::vector<std::size_t>& shard) {
  std::vector<double> counts(ds.classes, 0.0);
  for (std::size_t i : shard) counts[static_cast<std::size_t>(ds.labels[i])] += 1.0;
  double h = 0.0;
  for (double c : counts) {
    if (c == 0) continue;
    const double p = c / static_cast<double>(shard.size());
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace oracle
