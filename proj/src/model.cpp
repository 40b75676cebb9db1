// SPDX-License-Identifier: Apache-2.0
#include "saddle/model.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

#include "saddle/error.hpp"
#include "saddle/rng.hpp"

namespace saddle {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Layout Layout::contiguous(const std::vector<std::pair<std::string, std::size_t>>& blocks) {
  Layout out;
  for (const auto& [name, length] : blocks) {
    if (length == 0) throw ShapeError(fmt::format("block '{}' is empty", name));
    out.blocks_.push_back({name, out.size_, length});
    out.size_ += length;
  }
  return out;
}

Layout Layout::single(std::size_t d, std::string name) {
  return contiguous({{std::move(name), d}});
}

std::size_t Layout::max_block_length() const {
  std::size_t m = 0;
  for (const auto& b : blocks_) m = std::max(m, b.length);
  return m;
}

void ParamVector::validate() const {
  if (values.size() != layout.size()) {
    throw ShapeError(fmt::format("parameter vector has {} values, layout expects {}",
                                 values.size(), layout.size()));
  }
  for (double v : values)
    if (!std::isfinite(v)) throw NumericError("non-finite parameter value");
}

// ---------------------------------------------------------------------------
// GradOracle

void GradOracle::check_inputs(std::span<const double> params, const Batch& batch) const {
  if (params.size() != dim()) {
    throw ShapeError(fmt::format("expected {} parameters, got {}", dim(), params.size()));
  }
  if (!uses_data()) return;
  if (batch.data == nullptr || batch.indices.empty()) throw ShapeError("empty batch");
  for (std::size_t i : batch.indices) {
    if (i >= batch.data->size()) {
      throw ShapeError(fmt::format("batch index {} out of range {}", i, batch.data->size()));
    }
  }
}

double GradOracle::loss(std::span<const double> params, const Batch& batch) const {
  check_inputs(params, batch);
  const double value = loss_impl(params, batch);
  if (!std::isfinite(value)) throw NumericError("loss is not finite");
  return value;
}

double GradOracle::loss_and_grad(std::span<const double> params, const Batch& batch,
                                 std::span<double> out) const {
  check_inputs(params, batch);
  if (out.size() != dim()) throw ShapeError("gradient buffer has the wrong length");
  const double value = loss_and_grad_impl(params, batch, out);
  if (!std::isfinite(value)) throw NumericError("loss is not finite");
  for (double g : out)
    if (!std::isfinite(g)) throw NumericError("gradient is not finite");
  return value;
}

Vec GradOracle::grad(std::span<const double> params, const Batch& batch) const {
  Vec out(dim());
  loss_and_grad(params, batch, out);
  return out;
}

Vec GradOracle::hvp(std::span<const double> params, const Batch& batch,
                    std::span<const double> v) const {
  if (v.size() != dim()) throw ShapeError("hvp direction has the wrong length");
  const double vnorm = norm2(v);
  Vec out(dim(), 0.0);
  if (vnorm == 0.0) return out;
  const double eps = 1e-4 * std::max(1.0, norm2(params));
  Vec plus(params.begin(), params.end());
  Vec minus(params.begin(), params.end());
  for (std::size_t i = 0; i < dim(); ++i) {
    plus[i] += eps * v[i] / vnorm;
    minus[i] -= eps * v[i] / vnorm;
  }
  const Vec gp = grad(plus, batch);
  const Vec gm = grad(minus, batch);
  const double scale = vnorm / (2.0 * eps);
  for (std::size_t i = 0; i < dim(); ++i) out[i] = (gp[i] - gm[i]) * scale;
  return out;
}

double GradOracle::accuracy(std::span<const double>, const Dataset&) const {
  throw ShapeError("accuracy is only defined for classifiers");
}

ParamVector GradOracle::init_params(std::uint64_t, double) const {
  return {layout(), Vec(dim(), 0.0)};
}

// ---------------------------------------------------------------------------
// Quadratic

QuadraticOracle::QuadraticOracle(std::vector<double> a, bool is_diagonal, Vec center)
    : GradOracle(Layout::single(center.size())),
      a_(std::move(a)),
      diagonal_(is_diagonal),
      center_(std::move(center)) {}

std::shared_ptr<QuadraticOracle> QuadraticOracle::dense(std::vector<double> a, Vec center) {
  const std::size_t d = center.size();
  if (d == 0) throw ShapeError("quadratic needs d >= 1");
  if (a.size() != d * d) throw ShapeError("quadratic matrix must be d x d");
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (a[i * d + j] != a[j * d + i]) throw ShapeError("quadratic matrix must be symmetric");
  return std::shared_ptr<QuadraticOracle>(new QuadraticOracle(std::move(a), false, std::move(center)));
}

std::shared_ptr<QuadraticOracle> QuadraticOracle::diagonal(Vec a_diag, Vec center) {
  if (center.empty()) throw ShapeError("quadratic needs d >= 1");
  if (a_diag.size() != center.size()) throw ShapeError("diagonal length must equal d");
  return std::shared_ptr<QuadraticOracle>(
      new QuadraticOracle(std::move(a_diag), true, std::move(center)));
}

void QuadraticOracle::apply(std::span<const double> v, std::span<double> out) const {
  const std::size_t d = center_.size();
  if (diagonal_) {
    for (std::size_t i = 0; i < d; ++i) out[i] = a_[i] * v[i];
    return;
  }
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += a_[i * d + j] * v[j];
    out[i] = acc;
  }
}

double QuadraticOracle::loss_impl(std::span<const double> params, const Batch&) const {
  Vec diff(params.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = params[i] - center_[i];
  Vec ad(diff.size());
  apply(diff, ad);
  return 0.5 * dot(diff, ad);
}

double QuadraticOracle::loss_and_grad_impl(std::span<const double> params, const Batch&,
                                           std::span<double> out) const {
  Vec diff(params.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = params[i] - center_[i];
  apply(diff, out);
  return 0.5 * dot(diff, out);
}

Vec QuadraticOracle::hvp(std::span<const double>, const Batch&,
                         std::span<const double> v) const {
  if (v.size() != dim()) throw ShapeError("hvp direction has the wrong length");
  Vec out(dim());
  apply(v, out);
  return out;
}

ParamVector QuadraticOracle::init_params(std::uint64_t seed, double scale) const {
  ParamVector p{layout(), Vec(dim(), 0.0)};
  if (scale != 0.0) {
    Rng rng = make_stream(seed, Stream::init);
    for (auto& x : p.values) x = scale * standard_normal(rng);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy helpers

namespace {

// Returns -log softmax(z)[label] and overwrites z with softmax(z) - onehot.
double softmax_xent_backward(std::span<double> z, int label) {
  const double peak = *std::max_element(z.begin(), z.end());
  const double target = z[label];
  double sum = 0.0;
  for (double& v : z) sum += v = std::exp(v - peak);
  const double loss = std::log(sum) + peak - target;
  for (double& v : z) v /= sum;
  z[label] -= 1.0;
  return loss;
}

double softmax_xent(std::span<const double> z, int label) {
  const double peak = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - peak);
  return std::log(sum) + peak - z[label];
}

std::size_t argmax(std::span<const double> z) {
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

void check_features(const Batch& batch, std::size_t d_in) {
  if (batch.data->d_in != d_in) {
    throw ShapeError(fmt::format("model expects {} features, data has {}", d_in,
                                 batch.data->d_in));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Logistic regression

LogisticRegressionOracle::LogisticRegressionOracle(std::size_t d_in, std::size_t classes)
    : GradOracle(Layout::contiguous({{"weight", classes * d_in}, {"bias", classes}})),
      d_in_(d_in),
      classes_(classes) {
  if (d_in == 0 || classes < 2) throw ShapeError("logistic regression needs d_in >= 1, C >= 2");
}

double LogisticRegressionOracle::loss_impl(std::span<const double> params,
                                           const Batch& batch) const {
  check_features(batch, d_in_);
  const double* w = params.data();
  const double* b = params.data() + classes_ * d_in_;
  Vec z(classes_);
  double total = 0.0;
  for (std::size_t idx : batch.indices) {
    auto x = batch.data->row(idx);
    for (std::size_t c = 0; c < classes_; ++c) z[c] = b[c] + dot({w + c * d_in_, d_in_}, x);
    total += softmax_xent(z, batch.data->labels[idx]);
  }
  return total / static_cast<double>(batch.indices.size());
}

double LogisticRegressionOracle::loss_and_grad_impl(std::span<const double> params,
                                                    const Batch& batch,
                                                    std::span<double> out) const {
  check_features(batch, d_in_);
  std::fill(out.begin(), out.end(), 0.0);
  const double* w = params.data();
  const double* b = params.data() + classes_ * d_in_;
  double* gw = out.data();
  double* gb = out.data() + classes_ * d_in_;
  Vec z(classes_);
  double total = 0.0;
  for (std::size_t idx : batch.indices) {
    auto x = batch.data->row(idx);
    for (std::size_t c = 0; c < classes_; ++c) z[c] = b[c] + dot({w + c * d_in_, d_in_}, x);
    total += softmax_xent_backward(z, batch.data->labels[idx]);
    for (std::size_t c = 0; c < classes_; ++c) {
      gb[c] += z[c];
      for (std::size_t k = 0; k < d_in_; ++k) gw[c * d_in_ + k] += z[c] * x[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.indices.size());
  for (double& g : out) g *= inv;
  return total * inv;
}

double LogisticRegressionOracle::accuracy(std::span<const double> params,
                                          const Dataset& data) const {
  if (params.size() != dim()) throw ShapeError("accuracy: wrong parameter length");
  if (data.size() == 0) return 0.0;
  const double* w = params.data();
  const double* b = params.data() + classes_ * d_in_;
  Vec z(classes_);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto x = data.row(i);
    for (std::size_t c = 0; c < classes_; ++c) z[c] = b[c] + dot({w + c * d_in_, d_in_}, x);
    correct += argmax(z) == static_cast<std::size_t>(data.labels[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

ParamVector LogisticRegressionOracle::init_params(std::uint64_t seed, double scale) const {
  ParamVector p{layout(), Vec(dim(), 0.0)};
  if (scale != 0.0) {
    Rng rng = make_stream(seed, Stream::init);
    const double bound = scale / std::sqrt(static_cast<double>(d_in_));
    for (std::size_t i = 0; i < classes_ * d_in_; ++i)
      p.values[i] = bound * (2.0 * uniform01(rng) - 1.0);
  }
  return p;
}

// ---------------------------------------------------------------------------
// MLP

MlpOracle::MlpOracle(std::size_t d_in, std::size_t hidden, std::size_t classes)
    : GradOracle(Layout::contiguous({{"w1", hidden * d_in},
                                     {"b1", hidden},
                                     {"w2", classes * hidden},
                                     {"b2", classes}})),
      d_in_(d_in),
      hidden_(hidden),
      classes_(classes) {
  if (d_in == 0 || hidden == 0 || classes < 2) {
    throw ShapeError("mlp needs d_in >= 1, hidden >= 1, C >= 2");
  }
}

void MlpOracle::logits(std::span<const double> params, std::span<const double> x,
                       std::span<double> h, std::span<double> z) const {
  const double* w1 = params.data();
  const double* b1 = w1 + hidden_ * d_in_;
  const double* w2 = b1 + hidden_;
  const double* b2 = w2 + classes_ * hidden_;
  for (std::size_t j = 0; j < hidden_; ++j)
    h[j] = std::tanh(b1[j] + dot({w1 + j * d_in_, d_in_}, x));
  for (std::size_t c = 0; c < classes_; ++c)
    z[c] = b2[c] + dot({w2 + c * hidden_, hidden_}, h);
}

double MlpOracle::loss_impl(std::span<const double> params, const Batch& batch) const {
  check_features(batch, d_in_);
  Vec h(hidden_), z(classes_);
  double total = 0.0;
  for (std::size_t idx : batch.indices) {
    logits(params, batch.data->row(idx), h, z);
    total += softmax_xent(z, batch.data->labels[idx]);
  }
  return total / static_cast<double>(batch.indices.size());
}

double MlpOracle::loss_and_grad_impl(std::span<const double> params, const Batch& batch,
                                     std::span<double> out) const {
  check_features(batch, d_in_);
  std::fill(out.begin(), out.end(), 0.0);
  const double* w2 = params.data() + hidden_ * d_in_ + hidden_;
  double* gw1 = out.data();
  double* gb1 = gw1 + hidden_ * d_in_;
  double* gw2 = gb1 + hidden_;
  double* gb2 = gw2 + classes_ * hidden_;

  Vec h(hidden_), z(classes_), dh(hidden_);
  double total = 0.0;
  for (std::size_t idx : batch.indices) {
    auto x = batch.data->row(idx);
    logits(params, x, h, z);
    total += softmax_xent_backward(z, batch.data->labels[idx]);
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t c = 0; c < classes_; ++c) {
      gb2[c] += z[c];
      for (std::size_t j = 0; j < hidden_; ++j) {
        gw2[c * hidden_ + j] += z[c] * h[j];
        dh[j] += w2[c * hidden_ + j] * z[c];
      }
    }
    for (std::size_t j = 0; j < hidden_; ++j) {
      const double da = dh[j] * (1.0 - h[j] * h[j]);
      gb1[j] += da;
      for (std::size_t k = 0; k < d_in_; ++k) gw1[j * d_in_ + k] += da * x[k];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.indices.size());
  for (double& g : out) g *= inv;
  return total * inv;
}

double MlpOracle::accuracy(std::span<const double> params, const Dataset& data) const {
  if (params.size() != dim()) throw ShapeError("accuracy: wrong parameter length");
  if (data.size() == 0) return 0.0;
  Vec h(hidden_), z(classes_);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    logits(params, data.row(i), h, z);
    correct += argmax(z) == static_cast<std::size_t>(data.labels[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

ParamVector MlpOracle::init_params(std::uint64_t seed, double scale) const {
  ParamVector p{layout(), Vec(dim(), 0.0)};
  Rng rng = make_stream(seed, Stream::init);
  auto fill_uniform = [&](const Block& block, std::size_t fan_in) {
    const double bound = scale / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < block.length; ++i)
      p.values[block.offset + i] = bound * (2.0 * uniform01(rng) - 1.0);
  };
  const auto blocks = layout().blocks();
  fill_uniform(blocks[0], d_in_);
  fill_uniform(blocks[2], hidden_);
  return p;
}

}  // namespace saddle
