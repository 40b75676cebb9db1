// SPDX-License-Identifier: Apache-2.0
#include "saddle/metrics.hpp"

#include <array>
#include <cmath>
#include <fmt/format.h>
#include <ostream>
#include <sstream>

#include "saddle/error.hpp"

namespace saddle {

namespace {

constexpr std::array<std::string_view, 8> kColumns{
    "round",           "train_loss_mean",        "test_acc_consensus",
    "consensus_error", "grad_norm_mean",         "compression_error_sum",
    "update_norm_sum", "bits_transmitted_cumulative"};

std::vector<Vec> collect_params(const std::vector<AgentState>& agents) {
  std::vector<Vec> out;
  out.reserve(agents.size());
  for (const auto& a : agents) out.push_back(a.params);
  return out;
}

Vec random_unit(std::size_t dim, Rng& rng) {
  Vec v(dim);
  double n = 0.0;
  while (n == 0.0) {
    for (auto& x : v) x = standard_normal(rng);
    n = norm2(v);
  }
  for (auto& x : v) x /= n;
  return v;
}

}  // namespace

std::span<const std::string_view> metrics_columns() { return kColumns; }

void write_metrics_csv(const MetricsLog& log, std::ostream& out) {
  for (std::size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << kColumns[i];
  out << '\n';
  for (const auto& r : log.rows) {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", r.round, r.train_loss_mean,
                       r.test_acc_consensus, r.consensus_error, r.grad_norm_mean,
                       r.compression_error_sum, r.update_norm_sum,
                       r.bits_transmitted_cumulative);
  }
}

std::string metrics_csv(const MetricsLog& log) {
  std::ostringstream out;
  write_metrics_csv(log, out);
  return out.str();
}

Vec consensus_model(std::span<const Vec> params) {
  if (params.empty()) throw ShapeError("consensus of zero agents");
  const std::size_t d = params.front().size();
  // Running mean: exact when all agents agree.
  Vec mean = params.front();
  for (std::size_t i = 1; i < params.size(); ++i) {
    const auto& p = params[i];
    if (p.size() != d) throw ShapeError("agents disagree on the parameter size");
    const double w = 1.0 / static_cast<double>(i + 1);
    for (std::size_t k = 0; k < d; ++k) mean[k] += (p[k] - mean[k]) * w;
  }
  return mean;
}

Vec consensus_model(const std::vector<AgentState>& agents) {
  return consensus_model(collect_params(agents));
}

double consensus_error(std::span<const Vec> params) {
  const Vec mean = consensus_model(params);
  double total = 0.0;
  for (const auto& p : params) {
    for (std::size_t k = 0; k < mean.size(); ++k) {
      const double diff = p[k] - mean[k];
      total += diff * diff;
    }
  }
  return total / static_cast<double>(params.size());
}

double consensus_error(const std::vector<AgentState>& agents) {
  return consensus_error(collect_params(agents));
}

CompressionNorms compression_error_norms(const Layout& layout, std::span<const double> theta,
                                         std::span<const double> compressed) {
  if (theta.size() != layout.size() || compressed.size() != layout.size()) {
    throw ShapeError("compression norms: vector does not match the layout");
  }
  CompressionNorms out;
  for (const auto& b : layout.blocks()) {
    double err = 0.0;
    double mag = 0.0;
    for (std::size_t i = b.offset; i < b.offset + b.length; ++i) {
      const double diff = compressed[i] - theta[i];
      err += diff * diff;
      mag += theta[i] * theta[i];
    }
    out.error_sum += std::sqrt(err);
    out.payload_norm_sum += std::sqrt(mag);
  }
  return out;
}

double lambda_max(const std::function<Vec(std::span<const double>)>& apply, std::size_t dim,
                  const LambdaOptions& opts, Rng& rng) {
  if (opts.iters < 1) throw ConfigError("lambda_max needs at least one iteration");
  if (dim == 0) return 0.0;
  const std::size_t restarts = std::max<std::size_t>(opts.restarts, 1);
  double best = 0.0;
  for (std::size_t r = 0; r < restarts; ++r) {
    Vec v;
    if (r == 0 && opts.start && norm2(*opts.start) > 0.0) {
      v = *opts.start;
      const double n = norm2(v);
      for (auto& x : v) x /= n;
    } else {
      v = random_unit(dim, rng);
    }
    double value = 0.0;
    for (std::size_t it = 0; it < opts.iters; ++it) {
      Vec w = apply(v);
      if (w.size() != dim) throw ShapeError("operator changed the vector size");
      const double rq = dot(v, w);
      if (!std::isfinite(rq)) throw NumericError("power iteration produced a non-finite value");
      const double n = norm2(w);
      const bool settled = it > 0 && std::abs(rq - value) < opts.tol * std::abs(rq);
      value = rq;
      if (n == 0.0 || settled) break;
      for (std::size_t k = 0; k < dim; ++k) v[k] = w[k] / n;
    }
    if (r == 0 || std::abs(value) > std::abs(best)) best = value;
  }
  return best;
}

double lambda_max(const GradOracle& oracle, std::span<const double> params, const Batch& batch,
                  const LambdaOptions& opts, Rng& rng) {
  return lambda_max([&](std::span<const double> v) { return oracle.hvp(params, batch, v); },
                    oracle.dim(), opts, rng);
}

LossSurface loss_surface(const GradOracle& oracle, std::span<const double> params,
                         const Batch& batch, double extent, std::size_t grid_points, Rng& rng) {
  if (grid_points < 1 || grid_points % 2 == 0) {
    throw ConfigError("loss surface needs an odd number of grid points");
  }
  if (!(extent > 0.0)) throw ConfigError("loss surface extent must be > 0");
  const std::size_t d = params.size();
  LossSurface s;
  s.u = random_unit(d, rng);
  s.v = random_unit(d, rng);
  if (d > 1) {
    // Gram-Schmidt until v has a usable component orthogonal to u.
    for (;;) {
      const double proj = dot(s.u, s.v);
      for (std::size_t k = 0; k < d; ++k) s.v[k] -= proj * s.u[k];
      const double n = norm2(s.v);
      if (n > 1e-8) {
        for (auto& x : s.v) x /= n;
        break;
      }
      s.v = random_unit(d, rng);
    }
  } else {
    s.v.assign(d, 0.0);
  }

  s.axis.resize(grid_points);
  const double half = static_cast<double>(grid_points - 1);
  for (std::size_t i = 0; i < grid_points; ++i) {
    s.axis[i] = grid_points == 1 ? 0.0
                                 : extent * (2.0 * static_cast<double>(i) - half) / half;
  }
  s.losses.resize(grid_points * grid_points);
  Vec point(d);
  for (std::size_t ia = 0; ia < grid_points; ++ia) {
    for (std::size_t ib = 0; ib < grid_points; ++ib) {
      for (std::size_t k = 0; k < d; ++k)
        point[k] = params[k] + (s.axis[ia] * s.u[k] + s.axis[ib] * s.v[k]);
      s.losses[ia * grid_points + ib] = oracle.loss(point, batch);
    }
  }
  return s;
}

void write_surface_csv(const LossSurface& surface, std::ostream& out) {
  out << "a,b,loss\n";
  const std::size_t g = surface.axis.size();
  for (std::size_t ia = 0; ia < g; ++ia)
    for (std::size_t ib = 0; ib < g; ++ib)
      out << fmt::format("{},{},{}\n", surface.axis[ia], surface.axis[ib], surface.at(ia, ib));
}

VarianceDiagnostics variance_diagnostics(const std::vector<AgentState>& agents,
                                         std::span<const double> point,
                                         std::size_t batch_size, std::size_t samples,
                                         std::uint64_t seed) {
  if (agents.empty()) throw ShapeError("variance diagnostics need at least one agent");
  const std::size_t n = agents.size();
  const std::size_t d = point.size();
  std::vector<Vec> full(n);
  double sigma_total = 0.0;
  std::size_t sigma_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = agents[i];
    full[i] = a.objective->grad(point, full_batch(a.shard));
    Rng rng = make_stream(seed, Stream::variance, a.id);
    for (std::size_t s = 0; s < samples; ++s) {
      const Vec g = a.objective->grad(point, sample_batch(a.shard, batch_size, rng));
      double dev = 0.0;
      for (std::size_t k = 0; k < d; ++k) dev += (g[k] - full[i][k]) * (g[k] - full[i][k]);
      sigma_total += dev;
      ++sigma_count;
    }
  }
  VarianceDiagnostics out;
  out.sigma2_hat = sigma_count ? sigma_total / static_cast<double>(sigma_count) : 0.0;
  const Vec mean = consensus_model(full);
  double delta_total = 0.0;
  for (const auto& g : full)
    for (std::size_t k = 0; k < d; ++k) delta_total += (g[k] - mean[k]) * (g[k] - mean[k]);
  out.delta2_hat = delta_total / static_cast<double>(n);
  return out;
}

std::uint64_t bits_per_round(Algorithm algorithm, const CompressionOp& op,
                             const MixingMatrix& w, const Layout& layout) {
  std::uint64_t edges = 0;
  for (std::size_t i = 0; i < w.size(); ++i) edges += w.degree(i);
  const std::uint64_t raw = CompressionOp::identity().bit_cost(layout);
  switch (family_of(algorithm)) {
    case Family::dpsgd:
    case Family::qgm:
    case Family::ngm: return uncompressed_bits_per_round(algorithm, w, layout.size());
    case Family::comp_qgm: return op.bit_cost(layout) * edges;
    case Family::comp_ngm: return (raw + op.bit_cost(layout)) * edges;
  }
  return 0;
}

CostReport comm_cost_report(const MetricsLog& log, Algorithm algorithm, const MixingMatrix& w,
                            std::size_t dim) {
  CostReport r;
  if (!log.rows.empty()) {
    r.bits_total = log.rows.back().bits_transmitted_cumulative;
    r.baseline_bits_total =
        uncompressed_bits_per_round(algorithm, w, dim) * log.rows.back().round;
  }
  r.bits_per_agent = static_cast<double>(r.bits_total) / static_cast<double>(w.size());
  r.gb_per_agent = r.bits_per_agent / 8.0 / 1e9;
  r.ratio = r.bits_total == 0 ? 1.0
                              : static_cast<double>(r.baseline_bits_total) /
                                    static_cast<double>(r.bits_total);
  return r;
}

}  // namespace saddle
