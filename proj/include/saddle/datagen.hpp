// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace saddle {

enum class Split { train, test };

/// Dense row-major labeled dataset.
struct Dataset {
  std::size_t d_in = 0;
  std::size_t classes = 0;
  Split split = Split::train;
  std::vector<double> features;  // size() * d_in
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * d_in, d_in};
  }
  /// Throws ShapeError if dimensions or labels are inconsistent.
  void validate() const;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

/// Gaussian clusters, `per_class` samples per class in each split. Means are
/// orthonormal axes when classes <= d_in, otherwise seeded unit directions.
DatasetPair make_blobs(std::size_t classes, std::size_t per_class, std::size_t d_in,
                       double spread, std::uint64_t seed);

/// Two interleaved spirals in the plane (2 classes, d_in = 2).
DatasetPair make_spirals(std::size_t per_class, double noise, std::uint64_t seed);

/// Reads `d_in,C,count` followed by `label,f1,...,f_din` rows and splits off a
/// seeded `test_fraction` of the rows as the test set.
DatasetPair load_dataset_file(const std::filesystem::path& path, double test_fraction,
                              std::uint64_t seed);

/// Sample-to-agent assignment for a training set.
struct PartitionPlan {
  double alpha = 0.0;  // 0 for the IID split
  std::size_t agents = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> assignment;  // per-sample agent index

  /// Sample indices owned by each agent, ascending.
  std::vector<std::vector<std::size_t>> shards() const;
};

/// Per-class Dirichlet(alpha) split across agents with largest-remainder
/// rounding. Agents that already hold their fair share (total / n) are
/// excluded from later classes, so tiny alpha yields one class per agent.
PartitionPlan partition_dirichlet(const Dataset& ds, std::size_t agents, double alpha,
                                  std::uint64_t seed);

/// Uniform random split into shards whose sizes differ by at most one.
PartitionPlan iid_partition(const Dataset& ds, std::size_t agents, std::uint64_t seed);

}  // namespace saddle
