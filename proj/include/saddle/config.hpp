// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "saddle/experiment.hpp"

namespace saddle {

/// A base run plus sweep axes. Leaves are the cartesian product
/// algorithm x bits x alpha x seed.
struct ExperimentSpec {
  RunConfig base;
  std::vector<std::uint64_t> seeds;        // empty: base.seed only
  std::vector<int> sweep_bits;             // quantization bits for comp_* algorithms
  std::vector<double> sweep_alpha;
  std::vector<Algorithm> sweep_algorithm;
  std::size_t sweep_cap = 256;
  std::string out_dir = "out";

  std::vector<RunConfig> leaves() const;
};

/// Parses `key = value` lines (`#` starts a comment). Unknown keys, repeated
/// keys and malformed values raise ConfigError naming the key and line.
ExperimentSpec parse_config(std::string_view text);
ExperimentSpec load_config(const std::filesystem::path& path);

/// Cross-field checks on every leaf. Throws ConfigError.
void validate(const ExperimentSpec& spec);

/// Every key the parser accepts, in documentation order.
std::vector<std::string_view> config_keys();

}  // namespace saddle
