// SPDX-License-Identifier: Apache-2.0
// Drives the built command-line tool through std::system.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

fs::path workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "saddle_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const auto path = workdir() / name;
  std::ofstream(path) << text;
  return path;
}

struct Result {
  int code;
  std::string output;
};

Result invoke(const std::string& args, const std::string& env = "") {
  const auto log = workdir() / "output.txt";
  const std::string cmd =
      env + " \"" SADDLE_CLI_PATH "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

const char* kMinimal = "algorithm = dpsgd\nagents = 2\nrounds = 10\nclasses = 2\nper_class = 10\nd_in = 2\n";

}  // namespace

TEST_CASE("run writes one csv plus a summary") {
  const auto cfg = write_config("minimal.cfg", kMinimal);
  const auto out = workdir() / "minimal_out";
  const auto r = invoke("run --config \"" + cfg.string() + "\" --out \"" + out.string() + "\"");
  CHECK(r.code == 0);
  CHECK(count_files(out) == 2);
  CHECK(fs::exists(out / "summary.csv"));
}

TEST_CASE("SADDLE_OUT overrides out_dir") {
  const auto target = workdir() / "env_out";
  const auto cfg = write_config("env.cfg", std::string(kMinimal) + "out_dir = " +
                                               (workdir() / "ignored").string() + "\n");
  const auto r = invoke("run --config \"" + cfg.string() + "\"", "SADDLE_OUT=\"" + target.string() + "\"");
  CHECK(r.code == 0);
  CHECK(fs::exists(target / "summary.csv"));
  CHECK_FALSE(fs::exists(workdir() / "ignored"));
}

TEST_CASE("sweeps produce the cartesian product") {
  const auto cfg = write_config("sweep.cfg", R"(algorithm = comp_q_saddle
agents = 3
classes = 3
per_class = 10
d_in = 3
rounds = 3
sweep_bits = 4, 8
seeds = 1, 2, 3
)");
  const auto out = workdir() / "sweep_out";
  CHECK(invoke("run --config \"" + cfg.string() + "\" --out \"" + out.string() + "\"").code == 0);
  CHECK(count_files(out) == 7);
  std::ifstream summary(out / "summary.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(summary, line)) ++rows;
  CHECK(rows == 3);

  const auto report = invoke("report --dir \"" + out.string() + "\"");
  CHECK(report.code == 0);
  CHECK(report.output.find("accuracy vs bits") != std::string::npos);
  CHECK(report.output.find("comp_q_saddle") != std::string::npos);
}

TEST_CASE("validate reports schema and cross-field errors") {
  CHECK(invoke("validate --config \"" + write_config("ok.cfg", kMinimal).string() + "\"").code == 0);

  const auto unknown = invoke("validate --config \"" +
                              write_config("unknown.cfg", "learning_rate = 0.1\n").string() + "\"");
  CHECK(unknown.code == 1);
  CHECK(unknown.output.find("learning_rate") != std::string::npos);

  const auto comp = invoke("validate --config \"" +
                           write_config("comp.cfg", "algorithm = comp_q_saddle\n").string() + "\"");
  CHECK(comp.code == 1);
  CHECK(comp.output.find("compression") != std::string::npos);

  const auto torus = invoke("validate --config \"" +
                            write_config("torus.cfg", "topology = torus\nagents = 10\n").string() + "\"");
  CHECK(torus.code == 1);
  CHECK(torus.output.find("torus") != std::string::npos);

  CHECK(invoke("run --config \"" + (workdir() / "missing.cfg").string() + "\"").code == 3);
  CHECK(invoke("bogus").code == 1);
}

TEST_CASE("report on an empty directory fails") {
  const auto empty = workdir() / "empty";
  fs::create_directories(empty);
  CHECK(invoke("report --dir \"" + empty.string() + "\"").code == 3);
}

TEST_CASE("diverged runs are recorded and signalled") {
  const auto cfg = write_config("diverge.cfg",
                                "model = quadratic\nagents = 3\nquad_centers = 1, -1, 2\n"
                                "eta = 5\nrounds = 500\n");
  const auto out = workdir() / "diverge_out";
  const auto r = invoke("run --config \"" + cfg.string() + "\" --out \"" + out.string() + "\"");
  CHECK(r.code == 2);
  CHECK(r.output.find("diverged") != std::string::npos);
  CHECK(fs::exists(out / "summary.csv"));
}
