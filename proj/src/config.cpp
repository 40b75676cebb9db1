// SPDX-License-Identifier: Apache-2.0
#include "saddle/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

#include "saddle/error.hpp"

namespace saddle {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string_view unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(fmt::format("{}: cannot parse '{}'", key, text));
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, text));
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view text) {
  std::vector<T> out;
  for (auto item : split_list(text)) out.push_back(parse_number<T>(key, item));
  if (out.empty()) throw ConfigError(fmt::format("{}: empty list", key));
  return out;
}

// Parser state that outlives a single key.
struct ParseState {
  ExperimentSpec spec;
  bool mu_set = false;
  bool agents_set = false;
  bool compression_set = false;
};

using Setter = std::function<void(ParseState&, std::string_view key, std::string_view value)>;

template <typename T>
Setter number(T RunConfig::*field) {
  return [field](ParseState& s, std::string_view k, std::string_view v) {
    s.spec.base.*field = parse_number<T>(k, v);
  };
}

template <typename T>
Setter hyper(T Hyper::*field) {
  return [field](ParseState& s, std::string_view k, std::string_view v) {
    s.spec.base.hyper.*field = parse_number<T>(k, v);
  };
}

const std::vector<std::pair<std::string_view, Setter>>& setters() {
  static const std::vector<std::pair<std::string_view, Setter>> table = {
      {"name", [](ParseState& s, auto, auto v) { s.spec.base.name = std::string(v); }},
      {"algorithm",
       [](ParseState& s, auto, auto v) { s.spec.base.algorithm = parse_algorithm(v); }},
      {"topology",
       [](ParseState& s, auto k, auto v) {
         if (v == "ring") s.spec.base.topology = TopologyKind::ring;
         else if (v == "torus") s.spec.base.topology = TopologyKind::torus;
         else if (v == "complete") s.spec.base.topology = TopologyKind::complete;
         else throw ConfigError(fmt::format("{}: unknown topology '{}'", k, v));
       }},
      {"agents",
       [](ParseState& s, auto k, auto v) {
         s.spec.base.agents = parse_number<std::size_t>(k, v);
         s.agents_set = true;
       }},
      {"torus_rows", number(&RunConfig::torus_rows)},
      {"torus_cols", number(&RunConfig::torus_cols)},
      {"dataset", [](ParseState& s, auto, auto v) { s.spec.base.dataset = std::string(v); }},
      {"classes", number(&RunConfig::classes)},
      {"per_class", number(&RunConfig::per_class)},
      {"d_in", number(&RunConfig::d_in)},
      {"spread", number(&RunConfig::spread)},
      {"noise", number(&RunConfig::noise)},
      {"test_fraction", number(&RunConfig::test_fraction)},
      {"partition",
       [](ParseState& s, auto k, auto v) {
         if (v == "dirichlet") s.spec.base.iid = false;
         else if (v == "iid") s.spec.base.iid = true;
         else throw ConfigError(fmt::format("{}: expected dirichlet or iid, got '{}'", k, v));
       }},
      {"alpha", number(&RunConfig::alpha)},
      {"model",
       [](ParseState& s, auto k, auto v) {
         if (v == "quadratic") s.spec.base.model = ModelKind::quadratic;
         else if (v == "logreg") s.spec.base.model = ModelKind::logistic_regression;
         else if (v == "mlp") s.spec.base.model = ModelKind::mlp;
         else throw ConfigError(fmt::format("{}: unknown model '{}'", k, v));
       }},
      {"hidden", number(&RunConfig::hidden)},
      {"init_scale", number(&RunConfig::init_scale)},
      {"quad_dim", number(&RunConfig::quad_dim)},
      {"quad_cond", number(&RunConfig::quad_cond)},
      {"quad_spread", number(&RunConfig::quad_spread)},
      {"quad_centers",
       [](ParseState& s, auto k, auto v) { s.spec.base.quad_centers = parse_list<double>(k, v); }},
      {"eta", hyper(&Hyper::eta)},
      {"rho", hyper(&Hyper::rho)},
      {"beta", hyper(&Hyper::beta)},
      {"mu",
       [](ParseState& s, auto k, auto v) {
         s.spec.base.hyper.mu = parse_number<double>(k, v);
         s.mu_set = true;
       }},
      {"gamma", hyper(&Hyper::gamma)},
      {"nesterov",
       [](ParseState& s, auto k, auto v) { s.spec.base.hyper.nesterov = parse_bool(k, v); }},
      {"batch_size", hyper(&Hyper::batch_size)},
      {"rounds", number(&RunConfig::rounds)},
      {"compression",
       [](ParseState& s, auto, auto v) {
         s.spec.base.compression = CompressionOp::parse(v);
         s.compression_set = true;
       }},
      {"lr_schedule",
       [](ParseState& s, auto, auto v) { s.spec.base.lr_schedule = std::string(v); }},
      {"seed", number(&RunConfig::seed)},
      {"seeds",
       [](ParseState& s, auto k, auto v) { s.spec.seeds = parse_list<std::uint64_t>(k, v); }},
      {"out_dir", [](ParseState& s, auto, auto v) { s.spec.out_dir = std::string(v); }},
      {"log_every", number(&RunConfig::log_every)},
      {"lambda_checkpoints",
       [](ParseState& s, auto k, auto v) {
         s.spec.base.lambda_checkpoints = parse_list<double>(k, v);
       }},
      {"lambda_iters", number(&RunConfig::lambda_iters)},
      {"lambda_tol", number(&RunConfig::lambda_tol)},
      {"lambda_samples", number(&RunConfig::lambda_samples)},
      {"variance_samples", number(&RunConfig::variance_samples)},
      {"surface_points", number(&RunConfig::surface_points)},
      {"surface_extent", number(&RunConfig::surface_extent)},
      {"sweep_bits",
       [](ParseState& s, auto k, auto v) { s.spec.sweep_bits = parse_list<int>(k, v); }},
      {"sweep_alpha",
       [](ParseState& s, auto k, auto v) { s.spec.sweep_alpha = parse_list<double>(k, v); }},
      {"sweep_algorithm",
       [](ParseState& s, auto k, auto v) {
         for (auto item : split_list(v)) s.spec.sweep_algorithm.push_back(parse_algorithm(item));
         if (s.spec.sweep_algorithm.empty()) throw ConfigError(fmt::format("{}: empty list", k));
       }},
      {"sweep_cap",
       [](ParseState& s, auto k, auto v) {
         s.spec.sweep_cap = parse_number<std::size_t>(k, v);
       }},
  };
  return table;
}

void require(bool ok, std::string_view message) {
  if (!ok) throw ConfigError(std::string(message));
}

void validate_leaf(const RunConfig& c) {
  const Hyper& h = c.hyper;
  require(c.rounds >= 1, "rounds must be >= 1");
  require(h.eta > 0.0 && std::isfinite(h.eta), "eta must be finite and > 0");
  require(h.rho >= 0.0 && std::isfinite(h.rho), "rho must be finite and >= 0");
  require(h.beta >= 0.0 && h.beta < 1.0, "beta must lie in [0, 1)");
  require(h.mu >= 0.0 && h.mu < 1.0, "mu must lie in [0, 1)");
  require(h.gamma > 0.0 && h.gamma <= 1.0, "gamma must lie in (0, 1]");
  require(h.batch_size >= 1, "batch_size must be >= 1");
  require(c.log_every >= 1, "log_every must be >= 1");
  require(c.alpha > 0.0 && std::isfinite(c.alpha), "alpha must be finite and > 0");
  require(c.lambda_iters >= 1, "lambda_iters must be >= 1");
  require(c.lambda_tol > 0.0, "lambda_tol must be > 0");
  require(c.surface_points == 0 || c.surface_points % 2 == 1, "surface_points must be odd");
  require(c.surface_extent > 0.0, "surface_extent must be > 0");
  for (double f : c.lambda_checkpoints)
    require(f > 0.0 && f <= 1.0, "lambda_checkpoints must lie in (0, 1]");
  (void)LrSchedule::parse(c.lr_schedule, h.eta);

  if (c.topology == TopologyKind::torus) {
    require(c.torus_rows > 0 && c.torus_cols > 0,
            "topology = torus requires torus_rows and torus_cols");
    require(c.torus_rows * c.torus_cols == c.agents,
            fmt::format("torus_rows * torus_cols = {} but agents = {}",
                        c.torus_rows * c.torus_cols, c.agents));
  }
  try {
    (void)build_topology(c);
  } catch (const TopologyError& e) {
    throw ConfigError(e.what());
  }

  if (c.model == ModelKind::quadratic) {
    require(c.quad_dim >= 1, "quad_dim must be >= 1");
    require(c.quad_cond >= 1.0, "quad_cond must be >= 1");
    require(c.quad_centers.empty() || c.quad_centers.size() == c.agents * c.quad_dim,
            "quad_centers needs agents * quad_dim values");
  } else {
    require(c.dataset == "blobs" || c.dataset == "spirals" || c.dataset.starts_with("file:"),
            fmt::format("dataset must be blobs, spirals or file:<path>, got '{}'", c.dataset));
    if (c.dataset == "blobs") {
      require(c.classes >= 2, "classes must be >= 2");
      require(c.per_class >= 1, "per_class must be >= 1");
      require(c.d_in >= 1, "d_in must be >= 1");
      require(c.spread > 0.0, "spread must be > 0");
      require(c.classes * c.per_class >= c.agents, "fewer training samples than agents");
    }
    if (c.dataset == "spirals") require(2 * c.per_class >= c.agents, "fewer samples than agents");
    require(c.test_fraction > 0.0 && c.test_fraction < 1.0, "test_fraction must lie in (0, 1)");
    require(c.hidden >= 1, "hidden must be >= 1");
  }
}

}  // namespace

std::vector<RunConfig> ExperimentSpec::leaves() const {
  const std::vector<Algorithm> algorithms =
      sweep_algorithm.empty() ? std::vector<Algorithm>{base.algorithm} : sweep_algorithm;
  const std::vector<double> alphas =
      sweep_alpha.empty() ? std::vector<double>{base.alpha} : sweep_alpha;
  const std::vector<std::uint64_t> seed_list =
      seeds.empty() ? std::vector<std::uint64_t>{base.seed} : seeds;

  std::vector<RunConfig> out;
  for (Algorithm a : algorithms) {
    std::vector<CompressionOp> ops;
    if (!is_compressed(a)) {
      ops.push_back(CompressionOp::identity());
    } else if (sweep_bits.empty()) {
      ops.push_back(base.compression);
    } else {
      for (int b : sweep_bits) ops.push_back(CompressionOp::quant(b));
    }
    for (const auto& op : ops) {
      for (double alpha : alphas) {
        for (std::uint64_t seed : seed_list) {
          RunConfig leaf = base;
          leaf.algorithm = a;
          leaf.compression = op;
          leaf.alpha = alpha;
          leaf.seed = seed;
          out.push_back(std::move(leaf));
        }
      }
    }
  }
  return out;
}

std::vector<std::string_view> config_keys() {
  std::vector<std::string_view> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

ExperimentSpec parse_config(std::string_view text) {
  ParseState state;
  std::set<std::string, std::less<>> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("line {}: expected 'key = value'", lineno));
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = unquote(trim(line.substr(eq + 1)));
    const auto& table = setters();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const auto& entry) { return entry.first == key; });
    if (it == table.end()) {
      throw ConfigError(fmt::format("line {}: unknown key '{}'", lineno, key));
    }
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError(fmt::format("line {}: key '{}' given twice", lineno, key));
    }
    if (value.empty()) throw ConfigError(fmt::format("line {}: '{}' has no value", lineno, key));
    try {
      it->second(state, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {}: {}", lineno, e.what()));
    }
  }

  auto& base = state.spec.base;
  if (!state.mu_set) base.hyper.mu = base.hyper.beta;
  if (base.topology == TopologyKind::torus && !state.agents_set && base.torus_rows > 0 &&
      base.torus_cols > 0) {
    base.agents = base.torus_rows * base.torus_cols;
  }

  // Compression only makes sense for the compressed engines.
  const auto algorithms = state.spec.sweep_algorithm.empty()
                              ? std::vector<Algorithm>{base.algorithm}
                              : state.spec.sweep_algorithm;
  bool any_compressed = false;
  for (Algorithm a : algorithms) {
    if (is_compressed(a) && !state.compression_set && state.spec.sweep_bits.empty()) {
      throw ConfigError(fmt::format(
          "algorithm {} requires the 'compression' key (or sweep_bits)", to_string(a)));
    }
    any_compressed = any_compressed || is_compressed(a);
  }
  if (!any_compressed && (state.compression_set || !state.spec.sweep_bits.empty())) {
    throw ConfigError("compression and sweep_bits require a comp_* algorithm");
  }
  return state.spec;
}

ExperimentSpec load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read config '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void validate(const ExperimentSpec& spec) {
  require(!spec.out_dir.empty(), "out_dir must not be empty");
  for (int b : spec.sweep_bits) require(b >= 1 && b <= 32, "sweep_bits values must lie in [1, 32]");
  const auto leaves = spec.leaves();
  require(leaves.size() <= spec.sweep_cap,
          fmt::format("sweep has {} runs, above sweep_cap = {}", leaves.size(), spec.sweep_cap));
  for (const auto& leaf : leaves) validate_leaf(leaf);
}

}  // namespace saddle
