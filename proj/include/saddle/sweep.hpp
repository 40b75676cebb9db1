// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "saddle/config.hpp"

namespace saddle {

struct LeafOutcome {
  RunConfig config;
  std::filesystem::path csv;
  RunResult result;
};

struct ExperimentOutcome {
  std::vector<LeafOutcome> leaves;
  std::filesystem::path summary;
  std::size_t diverged = 0;
};

/// File stem of one leaf's outputs.
std::string leaf_stem(const RunConfig& cfg);

/// Runs every leaf, writes one metrics CSV per leaf (plus a surface CSV when
/// requested) and `summary.csv` aggregated over seeds. `progress` is called
/// after each leaf.
ExperimentOutcome execute(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                          const std::function<void(const LeafOutcome&)>& progress = {});

/// Column names of summary.csv, in output order.
std::vector<std::string> summary_columns();

/// One parsed summary.csv row, keyed by column name.
struct SummaryRow {
  std::vector<std::string> values;
  const std::string& get(std::string_view column) const;
};
std::vector<SummaryRow> read_summary(const std::filesystem::path& path);

/// Prints the accuracy-vs-bits and cost-ratio tables for a run directory.
/// Throws IoError when the directory holds no summary.
void write_report(const std::filesystem::path& dir, std::ostream& out);

}  // namespace saddle
