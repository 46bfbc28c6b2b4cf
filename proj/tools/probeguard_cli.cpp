/*
 * Copyright 2026 The probeguard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// probeguard <tune|eofm|eop|attack|stability|batch> --scenario FILE [...]

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "probeguard/error.hpp"
#include "probeguard/harness.hpp"

namespace fs = std::filesystem;
namespace ph = probeguard::harness;
using probeguard::ExitCode;

namespace {

struct Options {
  std::vector<std::string> scenarios;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
  int seeds = 1;
  std::string command = "attack";
};

ph::Scenario load(const std::string &path, const Options &o) {
  ph::Scenario sc = ph::load_scenario(path);
  if (o.seed) sc.seed = *o.seed;
  return sc;
}

int run_single(ph::Command cmd, const Options &o) {
  const ph::Scenario sc = load(o.scenarios.front(), o);
  const fs::path out = o.out.empty()
                           ? fs::path("out") / (sc.name + "-" + ph::to_string(cmd))
                           : fs::path(o.out);
  const ph::RunResult r = ph::run(sc, cmd);
  ph::write_artifacts(r, out);
  std::cout << r.summary.to_text() << "artifacts: " << out.string() << "\n";
  if (r.summary.stability && r.summary.stability->false_positives) {
    std::cerr << "error: trigger during idle run at "
              << *r.summary.stability->first_false_positive_min << " min\n";
    return static_cast<int>(ExitCode::kStability);
  }
  return 0;
}

int run_batch(const Options &o) {
  const ph::Command cmd = ph::parse_command(o.command);
  if (o.seeds < 1) throw probeguard::ConfigError("--seeds must be >= 1");
  const fs::path root = o.out.empty() ? fs::path("out") : fs::path(o.out);
  std::vector<ph::BatchJob> jobs;
  for (const auto &path : o.scenarios) {
    ph::Scenario base = load(path, o);
    for (int k = 0; k < o.seeds; ++k) {
      ph::BatchJob job;
      job.scenario = base;
      job.scenario.seed = base.seed + static_cast<std::uint64_t>(k);
      job.command = cmd;
      job.out_dir = root / (base.name + "-seed" + std::to_string(job.scenario.seed));
      jobs.push_back(std::move(job));
    }
  }
  const auto outcomes = ph::run_batch(jobs, o.jobs);
  int worst = 0;
  for (const auto &oc : outcomes) {
    std::cout << oc.out_dir.string() << ": "
              << (oc.exit_code ? "error " + std::to_string(oc.exit_code) + " " + oc.message
                               : std::string("ok"))
              << "\n";
    if (oc.exit_code && !worst) worst = oc.exit_code;
  }
  return worst;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Optical probing attack and countermeasure simulator"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App *sub, bool many) {
    if (many)
      sub->add_option("--scenario", o.scenarios, "Scenario files")->required();
    else
      sub->add_option("--scenario", o.scenarios, "Scenario file")->required()->expected(1);
    sub->add_option("--seed", o.seed, "Override the scenario seed");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };
  for (const char *name : {"tune", "eofm", "eop", "attack", "stability"}) {
    auto *sub = app.add_subcommand(name, std::string("Run the ") + name + " pipeline");
    add_common(sub, false);
  }
  auto *batch = app.add_subcommand("batch", "Run several scenarios and seeds in parallel");
  add_common(batch, true);
  batch->add_option("--seeds", o.seeds, "Consecutive seeds per scenario");
  batch->add_option("--command", o.command, "Pipeline to run per job")
      ->check(CLI::IsMember({"tune", "eofm", "eop", "attack", "stability"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "batch") return run_batch(o);
    return run_single(ph::parse_command(name), o);
  } catch (const probeguard::Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception &e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kInternal);
  }
}
