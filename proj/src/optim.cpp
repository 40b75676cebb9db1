// SPDX-License-Identifier: Apache-2.0
#include "saddle/optim.hpp"

#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "saddle/error.hpp"

namespace saddle {

SamResult sam_gradient(const GradOracle& oracle, std::span<const double> params,
                       const Batch& batch, double rho) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw NumericError("rho must be finite and >= 0");
  SamResult r;
  r.ascent_grad.resize(oracle.dim());
  r.ascent_loss = oracle.loss_and_grad(params, batch, r.ascent_grad);
  r.perturbation.assign(oracle.dim(), 0.0);
  const double gnorm = norm2(r.ascent_grad);
  if (rho == 0.0 || gnorm == 0.0) {
    r.perturbed_grad = r.ascent_grad;
    return r;
  }
  Vec shifted(params.begin(), params.end());
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    r.perturbation[i] = rho * (r.ascent_grad[i] / gnorm);
    shifted[i] += r.perturbation[i];
  }
  r.perturbed_grad = oracle.grad(shifted, batch);
  return r;
}

MomentumState MomentumState::zeros(std::size_t d, double beta, double mu) {
  if (!(beta >= 0.0 && beta < 1.0) || !(mu >= 0.0 && mu < 1.0)) {
    throw ConfigError(fmt::format("momentum coefficients must lie in [0, 1): beta={}, mu={}",
                                  beta, mu));
  }
  return {Vec(d, 0.0), Vec(d, 0.0), beta, mu};
}

void qgm_in_step_momentum(MomentumState& state, std::span<const double> g) {
  for (std::size_t i = 0; i < g.size(); ++i) state.m[i] = state.beta * state.m_hat[i] + g[i];
}

void qgm_momentum_update(MomentumState& state, std::span<const double> x_before,
                         std::span<const double> x_after, double eta) {
  if (!(eta > 0.0)) throw NumericError("eta must be > 0");
  for (std::size_t i = 0; i < x_before.size(); ++i) {
    const double d = (x_before[i] - x_after[i]) / eta;
    state.m_hat[i] = state.mu * state.m_hat[i] + (1.0 - state.mu) * d;
  }
}

void local_momentum_step(MomentumState& state, std::span<const double> g, bool nesterov,
                         std::span<double> direction) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    state.m[i] = state.beta * state.m[i] + g[i];
    direction[i] = nesterov ? g[i] + state.beta * state.m[i] : state.m[i];
  }
}

LrSchedule::LrSchedule(double base, std::vector<double> milestones, double factor)
    : base_(base), milestones_(std::move(milestones)), factor_(factor) {
  if (!(base > 0.0) || !std::isfinite(base)) throw ConfigError("eta must be finite and > 0");
  if (!(factor >= 1.0)) throw ConfigError("lr_schedule factor must be >= 1");
  for (double m : milestones_) {
    if (!(m > 0.0 && m < 1.0)) throw ConfigError("lr_schedule milestones must lie in (0, 1)");
  }
}

LrSchedule LrSchedule::parse(std::string_view text, double base) {
  if (text == "constant" || text.empty()) return {base, {}, 1.0};
  if (!text.starts_with("step:")) {
    throw ConfigError(fmt::format("lr_schedule '{}' must be 'constant' or "
                                  "'step:<fractions>:<factor>'", text));
  }
  const auto rest = text.substr(5);
  const auto colon = rest.rfind(':');
  if (colon == std::string_view::npos) {
    throw ConfigError(fmt::format("lr_schedule '{}' is missing the factor", text));
  }
  auto to_double = [&](std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError(fmt::format("lr_schedule '{}': cannot parse '{}'", text, s));
    }
    return v;
  };
  std::vector<double> milestones;
  auto list = rest.substr(0, colon);
  while (!list.empty()) {
    const auto comma = list.find(',');
    milestones.push_back(to_double(list.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    list = list.substr(comma + 1);
  }
  return {base, std::move(milestones), to_double(rest.substr(colon + 1))};
}

std::string LrSchedule::to_string() const {
  if (milestones_.empty()) return "constant";
  return fmt::format("step:{}:{}", fmt::join(milestones_, ","), factor_);
}

double LrSchedule::at(std::size_t round, std::size_t total) const {
  double rate = base_;
  const double progress =
      total == 0 ? 0.0 : static_cast<double>(round - 1) / static_cast<double>(total);
  for (double m : milestones_)
    if (progress >= m) rate /= factor_;
  return rate;
}

}  // namespace saddle
