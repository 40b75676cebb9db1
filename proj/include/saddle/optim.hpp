// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saddle/model.hpp"

namespace saddle {

struct SamConfig {
  double rho = 0.0;  // perturbation radius; 0 gives plain gradients
};

struct SamResult {
  Vec perturbed_grad;  // gradient at params + perturbation
  Vec ascent_grad;     // gradient at params
  Vec perturbation;    // rho * g / ||g||, zero when rho = 0 or g = 0
  double ascent_loss = 0.0;
};

/// Sharpness-aware gradient on a single batch: ascend by rho along the
/// normalized gradient (global L2 norm), then take the gradient there. Both
/// evaluations use the same batch. With rho = 0 or a zero gradient the ascent
/// gradient is returned unchanged.
SamResult sam_gradient(const GradOracle& oracle, std::span<const double> params,
                       const Batch& batch, double rho);

/// m is the in-step direction, m_hat the quasi-global buffer. The local
/// (NGM-style) momentum keeps its running buffer in m.
struct MomentumState {
  Vec m;
  Vec m_hat;
  double beta = 0.0;
  double mu = 0.0;

  static MomentumState zeros(std::size_t d, double beta, double mu);
};

/// m = beta * m_hat + g.
void qgm_in_step_momentum(MomentumState& state, std::span<const double> g);

/// d = (x_before - x_after) / eta; m_hat = mu * m_hat + (1 - mu) * d.
void qgm_momentum_update(MomentumState& state, std::span<const double> x_before,
                         std::span<const double> x_after, double eta);

/// Heavy-ball local momentum m = beta * m + g. Writes the descent direction to
/// `direction`: m, or g + beta * m for the Nesterov form.
void local_momentum_step(MomentumState& state, std::span<const double> g, bool nesterov,
                         std::span<double> direction);

/// Step learning-rate decay: the base rate is divided by `factor` each time
/// training passes one of the milestone fractions.
class LrSchedule {
 public:
  LrSchedule() = default;
  LrSchedule(double base, std::vector<double> milestones, double factor);

  /// Parses "constant" or "step:<f1,f2,...>:<factor>", e.g. "step:0.5,0.75:10".
  static LrSchedule parse(std::string_view text, double base);
  std::string to_string() const;

  /// Rate for 1-based round `round` out of `total` rounds.
  double at(std::size_t round, std::size_t total) const;
  double base() const { return base_; }

 private:
  double base_ = 0.1;
  std::vector<double> milestones_;
  double factor_ = 1.0;
};

}  // namespace saddle
