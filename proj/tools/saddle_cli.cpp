// SPDX-License-Identifier: Apache-2.0
// Command-line driver: run, validate and report experiments.

#include <cstdlib>
#include <fmt/format.h>
#include <iostream>

#include "CLI11.hpp"
#include "saddle/error.hpp"
#include "saddle/sweep.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kRuntime = 2, kIo = 3 };

int cmd_run(const std::string& config_path, const std::string& out_override, bool serial) {
  auto spec = saddle::load_config(config_path);
  if (serial) spec.base.policy = saddle::ExecPolicy::serial;
  std::string out_dir = spec.out_dir;
  if (const char* env = std::getenv("SADDLE_OUT"); env != nullptr && *env != '\0') out_dir = env;
  if (!out_override.empty()) out_dir = out_override;

  const auto outcome = saddle::execute(spec, out_dir, [](const saddle::LeafOutcome& leaf) {
    const auto& log = leaf.result.log;
    if (log.diverged) {
      std::cerr << fmt::format("{}: diverged ({})\n", leaf.csv.filename().string(),
                               log.divergence_message);
      return;
    }
    const auto& last = log.rows.back();
    std::cout << fmt::format("{}: round {} loss {:.6g} acc {:.4f} consensus {:.3g}\n",
                             leaf.csv.filename().string(), last.round, last.train_loss_mean,
                             last.test_acc_consensus, last.consensus_error);
  });
  std::cout << fmt::format("{} runs, {} diverged, summary in {}\n", outcome.leaves.size(),
                           outcome.diverged, outcome.summary.string());
  return outcome.diverged > 0 ? kRuntime : kOk;
}

int cmd_validate(const std::string& config_path) {
  const auto spec = saddle::load_config(config_path);
  saddle::validate(spec);
  std::cout << fmt::format("ok: {} run(s)\n", spec.leaves().size());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized sharpness-aware training simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  bool serial = false;
  auto* run = app.add_subcommand("run", "execute every run of an experiment config");
  run->add_option("--config", config_path, "experiment config file")->required();
  run->add_option("--out", out_dir, "output directory (overrides SADDLE_OUT and out_dir)");
  run->add_flag("--serial", serial, "evaluate agents on one thread");

  std::string validate_path;
  auto* val = app.add_subcommand("validate", "check a config without running it");
  val->add_option("--config", validate_path, "experiment config file")->required();

  std::string report_dir;
  auto* report = app.add_subcommand("report", "print summary tables for a run directory");
  report->add_option("--dir", report_dir, "directory holding summary.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, serial);
    if (*val) return cmd_validate(validate_path);
    if (*report) {
      saddle::write_report(report_dir, std::cout);
      return kOk;
    }
  } catch (const saddle::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const saddle::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
