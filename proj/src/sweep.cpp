// SPDX-License-Identifier: Apache-2.0
#include "saddle/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "saddle/error.hpp"

namespace saddle {

namespace {

const std::vector<std::string> kSummaryColumns = {
    "name",           "algorithm",        "compression",   "bits",
    "alpha",          "runs",             "diverged",      "final_acc_mean",
    "final_acc_std",  "final_loss_mean",  "final_consensus_error_mean",
    "lambda_max_mean", "sigma2_mean",     "delta2_mean",   "bits_per_agent",
    "gb_per_agent",   "cost_ratio"};

std::string op_tag(const CompressionOp& op) {
  std::string s = op.to_string();
  s.erase(std::remove(s.begin(), s.end(), ':'), s.end());
  return s;
}

// Quantization width for the accuracy-vs-bits axis; raw floats count as 32.
std::string bits_label(const CompressionOp& op) {
  switch (op.kind) {
    case CompressionKind::identity: return std::to_string(kFloatBits);
    case CompressionKind::stochastic_quant: return std::to_string(op.bits);
    default: return "";
  }
}

struct Accumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;

  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++count;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : std::nan(""); }
  double sample_std() const {
    if (count < 2) return 0.0;
    const double m = mean();
    const double var = (sum_sq - static_cast<double>(count) * m * m) /
                       static_cast<double>(count - 1);
    return std::sqrt(std::max(var, 0.0));
  }
};

struct Group {
  const RunConfig* first = nullptr;
  std::size_t runs = 0;
  std::size_t diverged = 0;
  Accumulator acc, loss, consensus, lambda, sigma2, delta2, bits_agent, gb_agent, ratio;
};

void write_summary(const std::vector<LeafOutcome>& leaves, const std::filesystem::path& path) {
  std::vector<std::string> order;
  std::map<std::string, Group> groups;
  for (const auto& leaf : leaves) {
    const auto& c = leaf.config;
    const std::string key =
        fmt::format("{}|{}|{}", to_string(c.algorithm), c.compression.to_string(), c.alpha);
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    Group& g = it->second;
    if (g.first == nullptr) g.first = &c;
    ++g.runs;
    const auto& log = leaf.result.log;
    // Cost is known even for diverged runs; quality metrics only count finished ones.
    g.bits_agent.add(leaf.result.cost.bits_per_agent);
    g.gb_agent.add(leaf.result.cost.gb_per_agent);
    g.ratio.add(leaf.result.cost.ratio);
    if (log.diverged) {
      ++g.diverged;
      continue;
    }
    const auto& last = log.rows.back();
    g.acc.add(last.test_acc_consensus);
    g.loss.add(last.train_loss_mean);
    g.consensus.add(last.consensus_error);
    if (!log.lambda_max_samples.empty()) g.lambda.add(log.lambda_max_samples.back().value);
    if (log.variance) {
      g.sigma2.add(log.variance->sigma2_hat);
      g.delta2.add(log.variance->delta2_hat);
    }
  }

  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << fmt::format("{}\n", fmt::join(kSummaryColumns, ","));
  auto cell = [](const Accumulator& a) {
    return a.count ? fmt::format("{}", a.mean()) : std::string();
  };
  for (const auto& key : order) {
    const Group& g = groups.at(key);
    const RunConfig& c = *g.first;
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", c.name,
                       to_string(c.algorithm), c.compression.to_string(),
                       bits_label(c.compression), c.alpha, g.runs, g.diverged, cell(g.acc),
                       g.acc.count ? fmt::format("{}", g.acc.sample_std()) : std::string(),
                       cell(g.loss), cell(g.consensus), cell(g.lambda), cell(g.sigma2),
                       cell(g.delta2), cell(g.bits_agent), cell(g.gb_agent), cell(g.ratio));
  }
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::string leaf_stem(const RunConfig& cfg) {
  return fmt::format("{}-{}-{}-a{}-s{}", cfg.name, to_string(cfg.algorithm),
                     op_tag(cfg.compression), cfg.alpha, cfg.seed);
}

ExperimentOutcome execute(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                          const std::function<void(const LeafOutcome&)>& progress) {
  validate(spec);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));

  ExperimentOutcome outcome;
  for (auto& cfg : spec.leaves()) {
    LeafOutcome leaf;
    leaf.config = cfg;
    leaf.result = run(cfg);
    leaf.csv = out_dir / (leaf_stem(cfg) + ".csv");
    {
      std::ofstream out(leaf.csv);
      if (!out) throw IoError(fmt::format("cannot write '{}'", leaf.csv.string()));
      write_metrics_csv(leaf.result.log, out);
    }
    if (leaf.result.surface) {
      std::ofstream out(out_dir / (leaf_stem(cfg) + "-surface.csv"));
      if (!out) throw IoError("cannot write the loss surface");
      write_surface_csv(*leaf.result.surface, out);
    }
    if (leaf.result.log.diverged) ++outcome.diverged;
    if (progress) progress(leaf);
    outcome.leaves.push_back(std::move(leaf));
  }
  outcome.summary = out_dir / "summary.csv";
  write_summary(outcome.leaves, outcome.summary);
  return outcome;
}

std::vector<std::string> summary_columns() { return kSummaryColumns; }

const std::string& SummaryRow::get(std::string_view column) const {
  const auto it = std::find(kSummaryColumns.begin(), kSummaryColumns.end(), column);
  if (it == kSummaryColumns.end()) throw Error(fmt::format("no summary column '{}'", column));
  return values.at(static_cast<std::size_t>(it - kSummaryColumns.begin()));
}

std::vector<SummaryRow> read_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != kSummaryColumns) {
    throw IoError(fmt::format("'{}' is not a summary file", path.string()));
  }
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    SummaryRow row{split_csv_line(line)};
    if (row.values.size() != kSummaryColumns.size()) {
      throw IoError(fmt::format("'{}': malformed row '{}'", path.string(), line));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

// Summary cells are shortest round-trip reprs; tables show fixed precision.
std::string fixed(const std::string& cell, int digits) {
  if (cell.empty()) return cell;
  return fmt::format("{:.{}f}", std::stod(cell), digits);
}

std::string general(const std::string& cell) {
  if (cell.empty()) return cell;
  return fmt::format("{:.4g}", std::stod(cell));
}

}  // namespace

void write_report(const std::filesystem::path& dir, std::ostream& out) {
  const auto path = dir / "summary.csv";
  if (!std::filesystem::exists(path)) {
    throw IoError(fmt::format("no summary.csv in '{}'", dir.string()));
  }
  auto rows = read_summary(path);
  if (rows.empty()) throw IoError(fmt::format("'{}' has no runs", path.string()));
  std::stable_sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
    return a.get("algorithm") < b.get("algorithm");
  });

  out << "accuracy vs bits\n";
  out << fmt::format("{:<16} {:<12} {:>5} {:>10} {:>10} {:>10} {:>5} {:>8}\n", "algorithm",
                     "compression", "bits", "alpha", "acc_mean", "acc_std", "runs", "diverged");
  for (const auto& r : rows) {
    const bool baseline = r.get("bits") == "32";
    const auto line = fmt::format("{:<16} {:<12} {:>5} {:>10} {:>10} {:>10} {:>5} {:>8}  {}",
                       r.get("algorithm"), r.get("compression"), r.get("bits"), r.get("alpha"),
                       fixed(r.get("final_acc_mean"), 4), fixed(r.get("final_acc_std"), 4), r.get("runs"),
                       r.get("diverged"), baseline ? "baseline" : "");
    out << line.substr(0, line.find_last_not_of(' ') + 1) << '\n';
  }
  out << "\ncommunication cost\n";
  out << fmt::format("{:<16} {:<12} {:>16} {:>14} {:>10}\n", "algorithm", "compression",
                     "bits_per_agent", "gb_per_agent", "ratio");
  for (const auto& r : rows) {
    out << fmt::format("{:<16} {:<12} {:>16} {:>14} {:>10}\n", r.get("algorithm"),
                       r.get("compression"), r.get("bits_per_agent"),
                       general(r.get("gb_per_agent")), fixed(r.get("cost_ratio"), 3));
  }
}

}  // namespace saddle
