// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "saddle/model.hpp"
#include "saddle/rng.hpp"

namespace saddle {

enum class CompressionKind { identity, stochastic_quant, top_k, sign_scaled };

/// Bits charged for one real value on the wire. Reals are simulated in double
/// precision but costed as 32-bit floats.
inline constexpr std::uint64_t kFloatBits = 32;
/// Width of a top-k intra-block index.
inline constexpr std::uint64_t kIndexBits = 16;

/// Parameterized compression operator Q(.). Every operator acts block by block
/// on the parameter layout.
struct CompressionOp {
  CompressionKind kind = CompressionKind::identity;
  int bits = 32;          // stochastic_quant only, in [1, 32]
  double fraction = 1.0;  // top_k only, in (0, 1]

  static CompressionOp identity() { return {}; }
  static CompressionOp quant(int bits);
  static CompressionOp top_k(double fraction);
  static CompressionOp sign() { return {CompressionKind::sign_scaled, 32, 1.0}; }

  /// Parses "none" | "quant:<bits>" | "topk:<fraction>" | "sign".
  static CompressionOp parse(std::string_view text);
  std::string to_string() const;

  bool is_stochastic() const { return kind == CompressionKind::stochastic_quant; }

  /// Contraction constant delta in E||Q(v) - v||^2 <= (1 - delta)||v||^2 that
  /// holds for every v with this layout, or nullopt when the operator gives no
  /// positive guarantee (low-bit quantization on long blocks).
  std::optional<double> declared_delta(const Layout& layout) const;

  /// Exact bits of one encoded message for this layout.
  std::uint64_t bit_cost(const Layout& layout) const;
};

/// Entries kept by top-k in a block of the given length.
std::size_t top_k_count(double fraction, std::size_t length);

struct RawPayload {
  Vec values;
};

/// Per-block max-abs scale and b-bit grid level per coordinate. Level l decodes
/// to scale * (2 l / (2^b - 1) - 1).
struct QuantPayload {
  int bits = 0;
  Vec scales;
  std::vector<std::uint32_t> levels;
};

/// Kept entries per block, with 16-bit intra-block indices in ascending order.
struct SparsePayload {
  std::vector<std::uint32_t> kept_per_block;
  std::vector<std::uint16_t> indices;
  Vec values;
};

/// Per-block mean-|v| scale and a sign bitmap (bit set = negative).
struct SignPayload {
  Vec scales;
  std::vector<std::uint64_t> sign_words;
};

struct CompressedMessage {
  CompressionKind kind = CompressionKind::identity;
  std::size_t dim = 0;
  std::variant<RawPayload, QuantPayload, SparsePayload, SignPayload> payload;
  std::uint64_t bit_cost = 0;

  /// Reconstructs Q(v) exactly.
  Vec decode(const Layout& layout) const;
};

CompressedMessage compress_identity(std::span<const double> v, const Layout& layout);
CompressedMessage quantize_stochastic(std::span<const double> v, const Layout& layout,
                                      int bits, Rng& rng);
CompressedMessage top_k(std::span<const double> v, const Layout& layout, double fraction);
CompressedMessage sign_scaled(std::span<const double> v, const Layout& layout);

/// Dispatches on op.kind. `rng` is only consumed by stochastic operators.
CompressedMessage compress(const CompressionOp& op, std::span<const double> v,
                           const Layout& layout, Rng& rng);

/// Residual carried on one agent-edge between rounds.
struct ErrorFeedbackState {
  Vec residual;
};

struct FeedbackResult {
  CompressedMessage message;
  Vec corrected;  // payload + residual, the vector that was compressed
  Vec decoded;    // Q(corrected)
};

/// p = payload + e; emits Q(p) and stores e = p - Q(p). An empty residual is
/// treated as zero.
FeedbackResult apply_error_feedback(std::span<const double> payload,
                                    ErrorFeedbackState& state, const CompressionOp& op,
                                    const Layout& layout, Rng& rng);

/// Monte Carlo estimate of delta over `trials` Gaussian vectors of length
/// `dim` (single block): 1 - max_v E_Q||Q(v) - v||^2 / ||v||^2. Exact for
/// identity and top-k.
double contraction_delta(const CompressionOp& op, std::size_t trials, std::size_t dim,
                         Rng& rng);

}  // namespace saddle
