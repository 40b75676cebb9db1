// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "saddle/datagen.hpp"

namespace saddle {

using Vec = std::vector<double>;

/// Named contiguous slice of a flat parameter vector (one layer).
struct Block {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
};

class Layout {
 public:
  Layout() = default;
  /// Builds contiguous blocks in the given order.
  static Layout contiguous(const std::vector<std::pair<std::string, std::size_t>>& blocks);
  /// One block covering the whole vector.
  static Layout single(std::size_t d, std::string name = "x");

  std::size_t size() const { return size_; }
  std::span<const Block> blocks() const { return blocks_; }
  std::size_t max_block_length() const;

 private:
  std::vector<Block> blocks_;
  std::size_t size_ = 0;
};

struct ParamVector {
  Layout layout;
  Vec values;

  /// Throws ShapeError on length mismatch and NumericError on non-finite values.
  void validate() const;
};

/// Minibatch: indices into a dataset. Data-free objectives accept an empty batch.
struct Batch {
  const Dataset* data = nullptr;
  std::vector<std::size_t> indices;
};

enum class ModelKind { quadratic, logistic_regression, mlp };

/// Differentiable loss over a flat parameter vector. Implementations are
/// immutable, so evaluations for different agents may run concurrently.
class GradOracle {
 public:
  virtual ~GradOracle() = default;

  virtual ModelKind kind() const = 0;
  const Layout& layout() const { return layout_; }
  std::size_t dim() const { return layout_.size(); }
  /// False for objectives such as the quadratic whose loss ignores the batch.
  virtual bool uses_data() const = 0;

  /// Mean per-sample loss.
  double loss(std::span<const double> params, const Batch& batch) const;
  /// Writes the gradient of loss() into `out` and returns the loss.
  double loss_and_grad(std::span<const double> params, const Batch& batch,
                       std::span<double> out) const;
  Vec grad(std::span<const double> params, const Batch& batch) const;
  /// Hessian-vector product. Central difference of gradients unless the
  /// oracle overrides it with an exact form.
  virtual Vec hvp(std::span<const double> params, const Batch& batch,
                  std::span<const double> v) const;

  /// Fraction of correctly classified samples; classifiers only.
  virtual double accuracy(std::span<const double> params, const Dataset& data) const;

  /// Seeded starting point.
  virtual ParamVector init_params(std::uint64_t seed, double scale) const;

 protected:
  explicit GradOracle(Layout layout) : layout_(std::move(layout)) {}
  virtual double loss_impl(std::span<const double> params, const Batch& batch) const = 0;
  virtual double loss_and_grad_impl(std::span<const double> params, const Batch& batch,
                                    std::span<double> out) const = 0;
  void check_inputs(std::span<const double> params, const Batch& batch) const;

 private:
  Layout layout_;
};

/// 1/2 (x - c)^T A (x - c) with symmetric A, stored dense or diagonal.
class QuadraticOracle final : public GradOracle {
 public:
  static std::shared_ptr<QuadraticOracle> dense(std::vector<double> a, Vec center);
  static std::shared_ptr<QuadraticOracle> diagonal(Vec a_diag, Vec center);

  ModelKind kind() const override { return ModelKind::quadratic; }
  bool uses_data() const override { return false; }
  Vec hvp(std::span<const double> params, const Batch& batch,
          std::span<const double> v) const override;
  ParamVector init_params(std::uint64_t seed, double scale) const override;

  const Vec& center() const { return center_; }

 private:
  QuadraticOracle(std::vector<double> a, bool is_diagonal, Vec center);
  double loss_impl(std::span<const double> params, const Batch& batch) const override;
  double loss_and_grad_impl(std::span<const double> params, const Batch& batch,
                            std::span<double> out) const override;
  void apply(std::span<const double> v, std::span<double> out) const;

  std::vector<double> a_;
  bool diagonal_;
  Vec center_;
};

/// Multinomial logistic regression: blocks "weight" (C x d_in) then "bias" (C).
class LogisticRegressionOracle final : public GradOracle {
 public:
  LogisticRegressionOracle(std::size_t d_in, std::size_t classes);

  ModelKind kind() const override { return ModelKind::logistic_regression; }
  bool uses_data() const override { return true; }
  double accuracy(std::span<const double> params, const Dataset& data) const override;
  ParamVector init_params(std::uint64_t seed, double scale) const override;

 private:
  double loss_impl(std::span<const double> params, const Batch& batch) const override;
  double loss_and_grad_impl(std::span<const double> params, const Batch& batch,
                            std::span<double> out) const override;

  std::size_t d_in_;
  std::size_t classes_;
};

/// One tanh hidden layer with softmax cross-entropy. Blocks: "w1" (hidden x
/// d_in), "b1" (hidden), "w2" (C x hidden), "b2" (C).
class MlpOracle final : public GradOracle {
 public:
  MlpOracle(std::size_t d_in, std::size_t hidden, std::size_t classes);

  ModelKind kind() const override { return ModelKind::mlp; }
  bool uses_data() const override { return true; }
  double accuracy(std::span<const double> params, const Dataset& data) const override;
  ParamVector init_params(std::uint64_t seed, double scale) const override;

  std::size_t hidden() const { return hidden_; }

 private:
  double loss_impl(std::span<const double> params, const Batch& batch) const override;
  double loss_and_grad_impl(std::span<const double> params, const Batch& batch,
                            std::span<double> out) const override;
  void logits(std::span<const double> params, std::span<const double> x,
              std::span<double> hidden_act, std::span<double> out) const;

  std::size_t d_in_;
  std::size_t hidden_;
  std::size_t classes_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace saddle
