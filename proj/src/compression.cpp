// SPDX-License-Identifier: Apache-2.0
#include "saddle/compression.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

#include "saddle/error.hpp"

namespace saddle {

namespace {

double quant_levels(int bits) {
  return static_cast<double>((std::uint64_t{1} << bits) - 1);
}

void check_layout(std::span<const double> v, const Layout& layout) {
  if (v.size() != layout.size()) {
    throw ShapeError(fmt::format("payload has {} values, layout expects {}", v.size(),
                                 layout.size()));
  }
}

template <class T>
T parse_number(std::string_view text, std::string_view what) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(fmt::format("invalid {} '{}'", what, text));
  }
  return value;
}

}  // namespace

CompressionOp CompressionOp::quant(int bits) {
  if (bits < 1 || bits > 32) {
    throw ConfigError(fmt::format("quantization bits must lie in [1, 32], got {}", bits));
  }
  return {CompressionKind::stochastic_quant, bits, 1.0};
}

CompressionOp CompressionOp::top_k(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError(fmt::format("top-k fraction must lie in (0, 1], got {}", fraction));
  }
  return {CompressionKind::top_k, 32, fraction};
}

CompressionOp CompressionOp::parse(std::string_view text) {
  if (text == "none" || text == "identity") return identity();
  if (text == "sign") return sign();
  if (text.starts_with("quant:")) return quant(parse_number<int>(text.substr(6), "bits"));
  if (text.starts_with("topk:")) {
    return top_k(parse_number<double>(text.substr(5), "top-k fraction"));
  }
  throw ConfigError(fmt::format(
      "unknown compression '{}' (expected none | quant:<bits> | topk:<fraction> | sign)",
      text));
}

std::string CompressionOp::to_string() const {
  switch (kind) {
    case CompressionKind::identity: return "none";
    case CompressionKind::stochastic_quant: return fmt::format("quant:{}", bits);
    case CompressionKind::top_k: return fmt::format("topk:{}", fraction);
    case CompressionKind::sign_scaled: return "sign";
  }
  return "none";
}

std::size_t top_k_count(double fraction, std::size_t length) {
  const double exact = fraction * static_cast<double>(length);
  const double nearest = std::round(exact);
  // 0.3 * 10 evaluates to 3.0000000000000004; do not let that round up.
  double k = std::abs(exact - nearest) < 1e-9 ? nearest : std::ceil(exact);
  k = std::clamp(k, 1.0, static_cast<double>(length));
  return static_cast<std::size_t>(k);
}

std::optional<double> CompressionOp::declared_delta(const Layout& layout) const {
  switch (kind) {
    case CompressionKind::identity: return 1.0;
    case CompressionKind::top_k: {
      double worst = 1.0;
      for (const auto& b : layout.blocks()) {
        worst = std::min(worst, static_cast<double>(top_k_count(fraction, b.length)) /
                                    static_cast<double>(b.length));
      }
      return worst;
    }
    case CompressionKind::sign_scaled:
      // Q is the projection onto sign(v): error = ||v||^2 - ||v||_1^2 / len.
      return 1.0 / static_cast<double>(layout.max_block_length());
    case CompressionKind::stochastic_quant: {
      // Per coordinate variance <= step^2 / 4 = s^2 / L^2 and s^2 <= ||v_block||^2.
      const double levels = quant_levels(bits);
      const double delta =
          1.0 - static_cast<double>(layout.max_block_length()) / (levels * levels);
      if (delta > 0.0) return delta;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::uint64_t CompressionOp::bit_cost(const Layout& layout) const {
  std::uint64_t total = 0;
  for (const auto& b : layout.blocks()) {
    const auto len = static_cast<std::uint64_t>(b.length);
    switch (kind) {
      case CompressionKind::identity: total += kFloatBits * len; break;
      case CompressionKind::stochastic_quant:
        total += static_cast<std::uint64_t>(bits) * len + kFloatBits;
        break;
      case CompressionKind::top_k:
        total += top_k_count(fraction, b.length) * (kFloatBits + kIndexBits);
        break;
      case CompressionKind::sign_scaled: total += len + kFloatBits; break;
    }
  }
  return total;
}

CompressedMessage compress_identity(std::span<const double> v, const Layout& layout) {
  check_layout(v, layout);
  CompressedMessage msg;
  msg.kind = CompressionKind::identity;
  msg.dim = v.size();
  msg.payload = RawPayload{Vec(v.begin(), v.end())};
  msg.bit_cost = CompressionOp::identity().bit_cost(layout);
  return msg;
}

CompressedMessage quantize_stochastic(std::span<const double> v, const Layout& layout,
                                      int bits, Rng& rng) {
  check_layout(v, layout);
  const CompressionOp op = CompressionOp::quant(bits);
  const double levels = quant_levels(bits);
  QuantPayload q;
  q.bits = bits;
  q.levels.resize(v.size());
  for (const auto& b : layout.blocks()) {
    double scale = 0.0;
    for (std::size_t i = 0; i < b.length; ++i) scale = std::max(scale, std::abs(v[b.offset + i]));
    q.scales.push_back(scale);
    for (std::size_t i = 0; i < b.length; ++i) {
      // One uniform draw per coordinate regardless of the value, so the
      // stream position depends only on the layout.
      const double u = uniform01(rng);
      if (scale == 0.0) {
        q.levels[b.offset + i] = 0;
        continue;
      }
      const double pos = std::clamp((v[b.offset + i] / scale + 1.0) * 0.5 * levels, 0.0, levels);
      const double lower = std::min(std::floor(pos), levels);
      const double level = (u < pos - lower) ? std::min(lower + 1.0, levels) : lower;
      q.levels[b.offset + i] = static_cast<std::uint32_t>(level);
    }
  }
  CompressedMessage msg;
  msg.kind = CompressionKind::stochastic_quant;
  msg.dim = v.size();
  msg.payload = std::move(q);
  msg.bit_cost = op.bit_cost(layout);
  return msg;
}

CompressedMessage top_k(std::span<const double> v, const Layout& layout, double fraction) {
  check_layout(v, layout);
  const CompressionOp op = CompressionOp::top_k(fraction);
  SparsePayload sp;
  std::vector<std::size_t> order;
  for (const auto& b : layout.blocks()) {
    if (b.length > (std::size_t{1} << kIndexBits)) {
      throw IndexWidthError(fmt::format("block '{}' has {} entries; top-k indices are {} bits",
                                        b.name, b.length, kIndexBits));
    }
    const std::size_t k = top_k_count(fraction, b.length);
    order.resize(b.length);
    std::iota(order.begin(), order.end(), 0);
    const double* base = v.data() + b.offset;
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [base](std::size_t l, std::size_t r) {
                        const double al = std::abs(base[l]);
                        const double ar = std::abs(base[r]);
                        return al > ar || (al == ar && l < r);
                      });
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    sp.kept_per_block.push_back(static_cast<std::uint32_t>(k));
    for (std::size_t j = 0; j < k; ++j) {
      sp.indices.push_back(static_cast<std::uint16_t>(order[j]));
      sp.values.push_back(base[order[j]]);
    }
  }
  CompressedMessage msg;
  msg.kind = CompressionKind::top_k;
  msg.dim = v.size();
  msg.payload = std::move(sp);
  msg.bit_cost = op.bit_cost(layout);
  return msg;
}

CompressedMessage sign_scaled(std::span<const double> v, const Layout& layout) {
  check_layout(v, layout);
  SignPayload sp;
  sp.sign_words.assign((v.size() + 63) / 64, 0);
  for (const auto& b : layout.blocks()) {
    double l1 = 0.0;
    for (std::size_t i = 0; i < b.length; ++i) {
      const std::size_t at = b.offset + i;
      l1 += std::abs(v[at]);
      if (v[at] < 0.0) sp.sign_words[at / 64] |= std::uint64_t{1} << (at % 64);
    }
    sp.scales.push_back(l1 / static_cast<double>(b.length));
  }
  CompressedMessage msg;
  msg.kind = CompressionKind::sign_scaled;
  msg.dim = v.size();
  msg.payload = std::move(sp);
  msg.bit_cost = CompressionOp::sign().bit_cost(layout);
  return msg;
}

CompressedMessage compress(const CompressionOp& op, std::span<const double> v,
                           const Layout& layout, Rng& rng) {
  switch (op.kind) {
    case CompressionKind::identity: return compress_identity(v, layout);
    case CompressionKind::stochastic_quant: return quantize_stochastic(v, layout, op.bits, rng);
    case CompressionKind::top_k: return top_k(v, layout, op.fraction);
    case CompressionKind::sign_scaled: return sign_scaled(v, layout);
  }
  throw Error("unknown compression kind");
}

Vec CompressedMessage::decode(const Layout& layout) const {
  if (layout.size() != dim) throw ShapeError("decode: layout does not match message");
  Vec out(dim, 0.0);
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, RawPayload>) {
          out = p.values;
        } else if constexpr (std::is_same_v<P, QuantPayload>) {
          const double levels = quant_levels(p.bits);
          std::size_t bi = 0;
          for (const auto& b : layout.blocks()) {
            const double s = p.scales[bi++];
            for (std::size_t i = 0; i < b.length; ++i) {
              const double l = static_cast<double>(p.levels[b.offset + i]);
              out[b.offset + i] = s * (2.0 * l / levels - 1.0);
            }
          }
        } else if constexpr (std::is_same_v<P, SparsePayload>) {
          std::size_t cursor = 0;
          std::size_t bi = 0;
          for (const auto& b : layout.blocks()) {
            for (std::uint32_t j = 0; j < p.kept_per_block[bi]; ++j, ++cursor)
              out[b.offset + p.indices[cursor]] = p.values[cursor];
            ++bi;
          }
        } else {
          std::size_t bi = 0;
          for (const auto& b : layout.blocks()) {
            const double s = p.scales[bi++];
            for (std::size_t i = 0; i < b.length; ++i) {
              const std::size_t at = b.offset + i;
              const bool negative = (p.sign_words[at / 64] >> (at % 64)) & 1U;
              out[at] = negative ? -s : s;
            }
          }
        }
      },
      payload);
  return out;
}

FeedbackResult apply_error_feedback(std::span<const double> payload,
                                    ErrorFeedbackState& state, const CompressionOp& op,
                                    const Layout& layout, Rng& rng) {
  if (state.residual.empty()) state.residual.assign(payload.size(), 0.0);
  if (state.residual.size() != payload.size()) {
    throw ShapeError("error-feedback residual and payload lengths differ");
  }
  FeedbackResult r;
  r.corrected.resize(payload.size());
  for (std::size_t i = 0; i < payload.size(); ++i) r.corrected[i] = payload[i] + state.residual[i];
  r.message = compress(op, r.corrected, layout, rng);
  r.decoded = r.message.decode(layout);
  for (std::size_t i = 0; i < payload.size(); ++i)
    state.residual[i] = r.corrected[i] - r.decoded[i];
  return r;
}

double contraction_delta(const CompressionOp& op, std::size_t trials, std::size_t dim,
                         Rng& rng) {
  if (trials < 1000) throw Error("contraction_delta needs at least 1000 trials");
  if (dim == 0) throw ShapeError("contraction_delta needs dim >= 1");
  const Layout layout = Layout::single(dim);
  if (op.kind == CompressionKind::identity || op.kind == CompressionKind::top_k) {
    return *op.declared_delta(layout);
  }
  const std::size_t draws = op.is_stochastic() ? 8 : 1;
  double worst = 0.0;
  Vec v(dim);
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& x : v) x = standard_normal(rng);
    const double vv = dot(v, v);
    double err = 0.0;
    for (std::size_t k = 0; k < draws; ++k) {
      const Vec q = compress(op, v, layout, rng).decode(layout);
      for (std::size_t i = 0; i < dim; ++i) err += (q[i] - v[i]) * (q[i] - v[i]);
    }
    worst = std::max(worst, err / static_cast<double>(draws) / vv);
  }
  return 1.0 - worst;
}

}  // namespace saddle
