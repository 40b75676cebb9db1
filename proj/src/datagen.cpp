// SPDX-License-Identifier: Apache-2.0
#include "saddle/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "saddle/error.hpp"
#include "saddle/rng.hpp"

namespace saddle {

void Dataset::validate() const {
  if (features.size() != labels.size() * d_in) {
    throw ShapeError(fmt::format("dataset has {} features for {} samples of dimension {}",
                                 features.size(), labels.size(), d_in));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ShapeError(fmt::format("label {} outside [0, {})", y, classes));
    }
  }
}

namespace {

std::vector<std::vector<double>> blob_means(std::size_t classes, std::size_t d_in,
                                            std::uint64_t seed) {
  std::vector<std::vector<double>> means(classes, std::vector<double>(d_in, 0.0));
  if (classes <= d_in) {
    for (std::size_t c = 0; c < classes; ++c) means[c][c] = 1.0;
    return means;
  }
  Rng rng = make_stream(seed, Stream::data, 0, 0);
  for (auto& mu : means) {
    double norm = 0.0;
    while (norm < 1e-8) {
      for (auto& x : mu) x = standard_normal(rng);
      norm = std::sqrt(std::inner_product(mu.begin(), mu.end(), mu.begin(), 0.0));
    }
    for (auto& x : mu) x /= norm;
  }
  return means;
}

Dataset sample_blobs(const std::vector<std::vector<double>>& means, std::size_t per_class,
                     double spread, Split split, Rng& rng) {
  Dataset ds;
  ds.classes = means.size();
  ds.d_in = means.front().size();
  ds.split = split;
  ds.features.reserve(ds.classes * per_class * ds.d_in);
  ds.labels.reserve(ds.classes * per_class);
  for (std::size_t c = 0; c < ds.classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s) {
      for (std::size_t k = 0; k < ds.d_in; ++k)
        ds.features.push_back(means[c][k] + spread * standard_normal(rng));
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

Dataset sample_spirals(std::size_t per_class, double noise, Split split, Rng& rng) {
  Dataset ds;
  ds.classes = 2;
  ds.d_in = 2;
  ds.split = split;
  for (int c = 0; c < 2; ++c) {
    for (std::size_t s = 0; s < per_class; ++s) {
      // Radius grows with the angle; the second class is rotated by pi.
      const double t = 0.25 + 2.75 * uniform01(rng);
      const double angle = 2.0 * std::numbers::pi * t * 0.5 + c * std::numbers::pi;
      const double r = t / 3.0;
      ds.features.push_back(r * std::cos(angle) + noise * standard_normal(rng));
      ds.features.push_back(r * std::sin(angle) + noise * standard_normal(rng));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

}  // namespace

DatasetPair make_blobs(std::size_t classes, std::size_t per_class, std::size_t d_in,
                       double spread, std::uint64_t seed) {
  if (classes < 2) throw ShapeError("make_blobs needs at least 2 classes");
  if (per_class < 1) throw ShapeError("make_blobs needs per_class >= 1");
  if (d_in < 1) throw ShapeError("make_blobs needs d_in >= 1");
  if (!(spread > 0.0)) throw ShapeError("make_blobs needs spread > 0");
  const auto means = blob_means(classes, d_in, seed);
  Rng train_rng = make_stream(seed, Stream::data, 1, 0);
  Rng test_rng = make_stream(seed, Stream::data, 2, 0);
  return {sample_blobs(means, per_class, spread, Split::train, train_rng),
          sample_blobs(means, per_class, spread, Split::test, test_rng)};
}

DatasetPair make_spirals(std::size_t per_class, double noise, std::uint64_t seed) {
  if (per_class < 1) throw ShapeError("make_spirals needs per_class >= 1");
  Rng train_rng = make_stream(seed, Stream::data, 1, 0);
  Rng test_rng = make_stream(seed, Stream::data, 2, 0);
  return {sample_spirals(per_class, noise, Split::train, train_rng),
          sample_spirals(per_class, noise, Split::test, test_rng)};
}

DatasetPair load_dataset_file(const std::filesystem::path& path, double test_fraction,
                              std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open dataset file '{}'", path.string()));
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ShapeError("test_fraction must lie in [0, 1)");
  }

  auto split_csv = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  auto parse_double = [&](const std::string& s, std::size_t line_no) {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size() && s.find_first_not_of(" \t\r", used) != std::string::npos)
        throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ShapeError(fmt::format("{}:{}: cannot parse '{}'", path.string(), line_no, s));
    }
  };

  std::string line;
  if (!std::getline(in, line)) throw ShapeError("dataset file is empty");
  const auto header = split_csv(line);
  if (header.size() != 3) throw ShapeError("dataset header must be 'd_in,C,count'");
  const auto d_in = static_cast<std::size_t>(parse_double(header[0], 1));
  const auto classes = static_cast<std::size_t>(parse_double(header[1], 1));
  const auto count = static_cast<std::size_t>(parse_double(header[2], 1));

  Dataset all;
  all.d_in = d_in;
  all.classes = classes;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != d_in + 1) {
      throw ShapeError(fmt::format("{}:{}: expected {} columns, got {}", path.string(),
                                   line_no, d_in + 1, cells.size()));
    }
    all.labels.push_back(static_cast<int>(parse_double(cells[0], line_no)));
    for (std::size_t k = 0; k < d_in; ++k)
      all.features.push_back(parse_double(cells[k + 1], line_no));
  }
  if (all.size() != count) {
    throw ShapeError(fmt::format("header announces {} samples, file has {}", count,
                                 all.size()));
  }
  all.validate();

  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_stream(seed, Stream::data, 3, 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * all.size()));

  DatasetPair pair;
  for (Dataset* ds : {&pair.train, &pair.test}) {
    ds->d_in = d_in;
    ds->classes = classes;
  }
  pair.test.split = Split::test;
  std::vector<std::size_t> test_idx(order.begin(), order.begin() + n_test);
  std::vector<std::size_t> train_idx(order.begin() + n_test, order.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  auto copy_rows = [&](const std::vector<std::size_t>& idx, Dataset& dst) {
    for (std::size_t i : idx) {
      auto r = all.row(i);
      dst.features.insert(dst.features.end(), r.begin(), r.end());
      dst.labels.push_back(all.labels[i]);
    }
  };
  copy_rows(train_idx, pair.train);
  copy_rows(test_idx, pair.test);
  return pair;
}

std::vector<std::vector<std::size_t>> PartitionPlan::shards() const {
  std::vector<std::vector<std::size_t>> out(agents);
  for (std::size_t i = 0; i < assignment.size(); ++i) out[assignment[i]].push_back(i);
  return out;
}

namespace {

void check_partition_args(const Dataset& ds, std::size_t agents) {
  if (ds.split != Split::train) throw PartitionError("only training sets are partitioned");
  if (agents < 1) throw PartitionError("partition needs at least one agent");
  if (agents > ds.size()) {
    throw PartitionError(fmt::format("cannot give {} agents at least one of {} samples",
                                     agents, ds.size()));
  }
}

// log of a Gamma(alpha, 1) draw, stable for tiny alpha:
// Gamma(a) = Gamma(a + 1) * U^(1/a).
double log_gamma_draw(double alpha, Rng& rng) {
  const double boosted = std::gamma_distribution<double>(alpha + 1.0, 1.0)(rng);
  double u = uniform01(rng);
  while (u <= 0.0) u = uniform01(rng);
  return std::log(boosted) + std::log(u) / alpha;
}

// Moves one sample from the largest shard into every empty shard.
void repair_empty_shards(std::vector<std::size_t>& assignment, std::size_t agents) {
  for (;;) {
    std::vector<std::size_t> sizes(agents, 0);
    for (std::size_t a : assignment) ++sizes[a];
    const auto empty = std::find(sizes.begin(), sizes.end(), std::size_t{0});
    if (empty == sizes.end()) return;
    const auto largest = static_cast<std::size_t>(
        std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    const auto target = static_cast<std::size_t>(empty - sizes.begin());
    // Take the highest-index sample of the largest shard.
    for (std::size_t i = assignment.size(); i-- > 0;) {
      if (assignment[i] == largest) {
        assignment[i] = target;
        break;
      }
    }
  }
}

}  // namespace

PartitionPlan partition_dirichlet(const Dataset& ds, std::size_t agents, double alpha,
                                  std::uint64_t seed) {
  check_partition_args(ds, agents);
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw PartitionError(fmt::format("alpha must be finite and > 0, got {}", alpha));
  }
  Rng rng = make_stream(seed, Stream::partition, 0, 0);

  std::vector<std::vector<std::size_t>> by_class(ds.classes);
  for (std::size_t i = 0; i < ds.size(); ++i)
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  const double fair_share = static_cast<double>(ds.size()) / static_cast<double>(agents);
  std::vector<std::size_t> held(agents, 0);
  std::vector<std::size_t> assignment(ds.size(), 0);

  std::vector<std::size_t> class_order(ds.classes);
  std::iota(class_order.begin(), class_order.end(), 0);
  std::shuffle(class_order.begin(), class_order.end(), rng);

  for (std::size_t c : class_order) {
    auto& members = by_class[c];
    std::shuffle(members.begin(), members.end(), rng);

    std::vector<double> logp(agents);
    for (auto& lp : logp) lp = log_gamma_draw(alpha, rng);
    bool any_open = false;
    for (std::size_t a = 0; a < agents; ++a)
      any_open |= static_cast<double>(held[a]) < fair_share;
    if (any_open) {
      for (std::size_t a = 0; a < agents; ++a)
        if (static_cast<double>(held[a]) >= fair_share)
          logp[a] = -std::numeric_limits<double>::infinity();
    }
    const double peak = *std::max_element(logp.begin(), logp.end());
    std::vector<double> p(agents);
    double total = 0.0;
    for (std::size_t a = 0; a < agents; ++a) total += p[a] = std::exp(logp[a] - peak);
    for (auto& x : p) x /= total;

    // Largest-remainder rounding of p * |class| to integer counts.
    const std::size_t m = members.size();
    std::vector<std::size_t> counts(agents);
    std::vector<std::pair<double, std::size_t>> remainders(agents);
    std::size_t assigned = 0;
    for (std::size_t a = 0; a < agents; ++a) {
      const double exact = p[a] * static_cast<double>(m);
      counts[a] = static_cast<std::size_t>(std::floor(exact));
      assigned += counts[a];
      remainders[a] = {exact - std::floor(exact), a};
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& l, const auto& r) { return l.first > r.first; });
    for (std::size_t k = 0; assigned < m; ++k, ++assigned) ++counts[remainders[k].second];

    // Agents may not exceed the fair share while others still have room;
    // overflow moves to the open agents in order of their draw.
    const auto cap = static_cast<std::size_t>(std::ceil(fair_share));
    std::vector<std::size_t> by_draw(agents);
    std::iota(by_draw.begin(), by_draw.end(), 0);
    std::stable_sort(by_draw.begin(), by_draw.end(),
                     [&](std::size_t l, std::size_t r) { return p[l] > p[r]; });
    std::size_t overflow = 0;
    for (std::size_t a = 0; a < agents; ++a) {
      const std::size_t room = held[a] < cap ? cap - held[a] : 0;
      if (counts[a] > room) {
        overflow += counts[a] - room;
        counts[a] = room;
      }
    }
    for (std::size_t a : by_draw) {
      if (overflow == 0) break;
      const std::size_t room = held[a] + counts[a] < cap ? cap - held[a] - counts[a] : 0;
      const std::size_t take = std::min(room, overflow);
      counts[a] += take;
      overflow -= take;
    }
    // Only reachable when every agent is full (cap rounding); keep the draw.
    if (overflow > 0) counts[by_draw.front()] += overflow;

    std::size_t cursor = 0;
    for (std::size_t a = 0; a < agents; ++a) {
      for (std::size_t k = 0; k < counts[a]; ++k) assignment[members[cursor++]] = a;
      held[a] += counts[a];
    }
  }
  repair_empty_shards(assignment, agents);

  PartitionPlan plan;
  plan.alpha = alpha;
  plan.agents = agents;
  plan.seed = seed;
  plan.assignment = std::move(assignment);
  return plan;
}

PartitionPlan iid_partition(const Dataset& ds, std::size_t agents, std::uint64_t seed) {
  check_partition_args(ds, agents);
  Rng rng = make_stream(seed, Stream::partition, 1, 0);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  PartitionPlan plan;
  plan.alpha = 0.0;
  plan.agents = agents;
  plan.seed = seed;
  plan.assignment.assign(ds.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) plan.assignment[order[k]] = k % agents;
  return plan;
}

}  // namespace saddle
