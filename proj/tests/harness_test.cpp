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

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "probeguard/error.hpp"
#include "probeguard/harness.hpp"
#include "probeguard/netlist.hpp"

namespace probeguard::harness {
namespace {

namespace fs = std::filesystem;

const fs::path kScenarios = PROBEGUARD_SCENARIO_DIR;

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path temp_dir(const std::string &name) {
  const fs::path d = fs::temp_directory_path() / ("probeguard_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string minimal(const std::string &extra) {
  return "netlist: " + (kScenarios / "key.net").string() + "\n" + extra;
}

TEST(ScenarioFile, BundledScenariosLoad) {
  for (const char *name : {"unprotected_key", "mtd_inter_key", "mtd_intra_key",
                           "unprotected_xor", "polymorphic_xor", "eop_shift",
                           "stability"}) {
    const Scenario sc = load_scenario(kScenarios / (std::string(name) + ".scn"));
    EXPECT_EQ(sc.name, name);
    EXPECT_FALSE(sc.netlist_text.empty());
  }
  const Scenario k = load_scenario(kScenarios / "mtd_inter_key.scn");
  EXPECT_EQ(k.defense.mode, defense::Mode::kMtdInter);
  EXPECT_EQ(k.defense.allowed_region.size(), 64u);
  EXPECT_DOUBLE_EQ(k.defense.pr_latency_us, 223.0);
  ASSERT_EQ(k.stimulus.squares.size(), 1u);
  EXPECT_EQ(k.stimulus.squares[0].half_period_cycles, 40u);
  EXPECT_DOUBLE_EQ(k.scan.dwell_ms, 1.0);
  EXPECT_EQ(k.attack, AttackKind::kKey);
  EXPECT_EQ(k.key.expected, "10110001");
  ASSERT_TRUE(k.sensor);
  EXPECT_EQ(k.sensor->site, (fabric::SliceCoord{3, 7}));
  EXPECT_EQ(k.sensor->params.chain_length, 8);
}

TEST(ScenarioFile, Errors) {
  EXPECT_THROW(parse_scenario("seed: 1\n", "."), ConfigError);  // no netlist
  EXPECT_THROW(parse_scenario(minimal("dwell: 1\n"), "."), ConfigError);
  EXPECT_THROW(parse_scenario(minimal("scan: {dwell_s: 1}\n"), "."), ConfigError);
  EXPECT_THROW(parse_scenario(minimal("scan: {dwell_ms: fast}\n"), "."), ConfigError);
  EXPECT_THROW(parse_scenario(minimal("stimulus: {square: [{net: rst, freq_mhz: 3}]}\n"), "."),
               ConfigError);
  EXPECT_THROW(parse_scenario(minimal("defense: {mode: bogus}\n"), "."), ConfigError);
  EXPECT_THROW(parse_scenario(minimal("attack: {kind: key, expected: 10x}\n"), "."),
               ConfigError);
  EXPECT_THROW(parse_scenario(minimal("a: [\n"), "."), ConfigError);
  EXPECT_THROW(parse_scenario("netlist: nope.net\n", "."), ConfigError);
  EXPECT_THROW(load_scenario("/nonexistent/x.scn"), ConfigError);
  try {
    parse_scenario(minimal("thermal:\n  tau_s: 1\n"), ".");
    FAIL();
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Resources, SensorAndDefenseSlots) {
  fabric::FabricModel m = fabric::parse_netlist(slurp(kScenarios / "key.net"));
  sensor::Sensor s({3, 7}, sensor::SensorParams{}, 1);
  sensor::instantiate(m, s);
  m.finalize();
  defense::DefensePolicy none;
  const ResourceReport r = report_resources(m, none);
  EXPECT_EQ(r.sensor_luts, 1);
  EXPECT_EQ(r.sensor_delay_elements, 9);
  EXPECT_EQ(r.sensor_ffs, 1);
  EXPECT_EQ(r.defense_slots, 0);

  defense::DefensePolicy inter;
  inter.mode = defense::Mode::kMtdInter;
  for (int x = 0; x < 8; ++x) inter.allowed_region.push_back({x, 12});
  EXPECT_EQ(report_resources(m, inter).defense_slots, 8 * 4);
  defense::DefensePolicy intra;
  intra.mode = defense::Mode::kMtdIntra;
  EXPECT_EQ(report_resources(m, intra).defense_slots, 8);
}

sensor::TuneValue tuned(const sensor::SensorModel &m) {
  return sensor::tune(m, 1).tune;
}

TEST(Stability, ZeroJitterCountsNothing) {
  sensor::SensorParams p;
  const sensor::SensorModel noisy(p, 3);
  const sensor::TuneValue t = tuned(noisy);
  p.jitter_ps = 0.0;
  const sensor::SensorModel quiet(p, 3);
  StabilityConfig cfg;
  cfg.duration_min = 1.0;
  const StabilityReport r = stability_test(quiet, t, 16, cfg, 1);
  EXPECT_EQ(r.p_zero, 0.0);
  EXPECT_EQ(r.total_zero_count, 0u);
  EXPECT_EQ(r.max_zero_count, 0u);
  EXPECT_EQ(r.false_positives, 0u);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].windows, r.windows);
}

TEST(Stability, SkippedStreamHasBinomialMoments) {
  // Per-window counts are Binomial(255, p): mean 255p. Compare the skipped
  // stream's total against that over ~2.4M windows.
  const sensor::SensorModel m(sensor::SensorParams{}, 3);
  const sensor::TuneValue t = tuned(m);
  StabilityConfig cfg;
  cfg.duration_min = 0.1;
  cfg.interval_s = 1.0;
  const StabilityReport r = stability_test(m, t, 0, cfg, 7);
  EXPECT_EQ(r.windows, 6'000'000'000ull / 10 / 255);
  const double n = static_cast<double>(r.windows) * 255.0;
  const double mean = r.p_zero * n;
  const double sd = std::sqrt(n * r.p_zero * (1 - r.p_zero));
  EXPECT_NEAR(static_cast<double>(r.total_zero_count), mean, 5 * sd);
  EXPECT_EQ(r.rows.size(), 6u);
  std::uint64_t windows = 0;
  for (const auto &row : r.rows) windows += row.windows;
  EXPECT_EQ(windows, r.windows);
  EXPECT_NEAR(r.rows.back().minute, 0.1, 1e-12);
  // Running max is non-decreasing and ends at the overall max.
  for (std::size_t i = 1; i < r.rows.size(); ++i)
    EXPECT_GE(r.rows[i].running_max, r.rows[i - 1].running_max);
  EXPECT_EQ(r.rows.back().running_max, r.max_zero_count);
}

TEST(Stability, LowThresholdIsReportedAsFalsePositive) {
  const sensor::SensorModel m(sensor::SensorParams{}, 3);
  const sensor::TuneValue t = tuned(m);
  StabilityConfig cfg;
  cfg.duration_min = 0.05;
  const StabilityReport r = stability_test(m, t, 1, cfg, 7);
  EXPECT_GT(r.false_positives, 0u);
  ASSERT_TRUE(r.first_false_positive_min);
  EXPECT_LT(*r.first_false_positive_min, 0.05);
}

TEST(Run, UnprotectedKeyRecoversAllBits) {
  const Scenario sc = load_scenario(kScenarios / "unprotected_key.scn");
  const RunResult r = run(sc, Command::kAttack);
  EXPECT_EQ(r.summary.bits_correct, 8);
  EXPECT_EQ(r.summary.key_recovered, "10110001");
  EXPECT_EQ(r.summary.resources.sensor_delay_elements, 9);
  EXPECT_LE(r.summary.trigger_time_us.value_or(0.0), r.summary.simulated_time_us);
  EXPECT_NEAR(r.summary.simulated_time_us, 624 * 1000.0, 1e-6);
}

TEST(Run, MtdInterTriggersAndDefeatsRecovery) {
  const Scenario sc = load_scenario(kScenarios / "mtd_inter_key.scn");
  const RunResult r = run(sc, Command::kAttack);
  ASSERT_TRUE(r.summary.trigger_time_us);
  ASSERT_TRUE(r.summary.reconfig_within_dwell);
  EXPECT_TRUE(*r.summary.reconfig_within_dwell);
  EXPECT_DOUBLE_EQ(*r.summary.reconfig_latency_us, 223.0);
  EXPECT_LE(r.summary.bits_correct, 5);
  EXPECT_NE(r.defense_log_csv.find("mtd_inter"), std::string::npos);
}

TEST(Run, DeterministicArtifacts) {
  Scenario sc = load_scenario(kScenarios / "mtd_inter_key.scn");
  sc.scan.region = {20.0, 60.0, 280.0, 95.0};
  const fs::path a = temp_dir("det_a"), b = temp_dir("det_b");
  write_artifacts(run(sc, Command::kAttack), a);
  write_artifacts(run(sc, Command::kAttack), b);
  for (const char *f : {"summary.txt", "image.pgm", "image.csv", "counters.csv",
                        "defense_log.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  sc.seed = 2;
  const fs::path c = temp_dir("det_c");
  write_artifacts(run(sc, Command::kAttack), c);
  EXPECT_NE(slurp(a / "image.csv"), slurp(c / "image.csv"));
}

TEST(Run, ErrorClasses) {
  Scenario sc = load_scenario(kScenarios / "mtd_inter_key.scn");
  sc.defense.allowed_region = {{30, 14}};
  EXPECT_THROW(run(sc, Command::kTune), CapacityError);

  sc = load_scenario(kScenarios / "unprotected_key.scn");
  sc.sensor->params.data_route_ps = 1e6;
  EXPECT_THROW(run(sc, Command::kTune), TuningFailure);

  sc = load_scenario(kScenarios / "unprotected_key.scn");
  sc.scan.region.x1 = 500.0;
  EXPECT_THROW(run(sc, Command::kEofm), ScenarioError);

  sc = load_scenario(kScenarios / "eop_shift.scn");
  EXPECT_THROW(run(sc, Command::kStability), ConfigError);
  sc.eop.target_ffs = {"missing"};
  EXPECT_THROW(run(sc, Command::kEop), ScenarioError);
}

TEST(Run, EopTraceFollowsShiftPattern) {
  Scenario sc = load_scenario(kScenarios / "eop_shift.scn");
  sc.eop.config.iterations = 200;
  const RunResult r = run(sc, Command::kEop);
  ASSERT_EQ(r.traces.size(), 2u);
  EXPECT_EQ(r.traces[0].first, "reg1");
  const std::string csv = traces_csv(r.traces);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "time_ps,reg1,reg2");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 801);
}

TEST(Batch, ParallelMatchesSerialAndKeepsOrder) {
  Scenario sc = load_scenario(kScenarios / "unprotected_key.scn");
  sc.scan.region = {20.0, 80.0, 280.0, 95.0};
  sc.scan.dwell_ms = 0.064;
  std::vector<BatchJob> jobs;
  const fs::path root = temp_dir("batch");
  for (int k = 0; k < 3; ++k) {
    BatchJob j;
    j.scenario = sc;
    j.scenario.seed = 10 + k;
    j.out_dir = root / ("par" + std::to_string(k));
    jobs.push_back(j);
  }
  Scenario bad = sc;
  bad.defense.mode = defense::Mode::kMtdInter;
  bad.defense.allowed_region = {{31, 15}};
  jobs.push_back({bad, Command::kAttack, root / "bad"});

  const auto par = run_batch(jobs, 3);
  ASSERT_EQ(par.size(), 4u);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(par[k].exit_code, 0) << par[k].message;
  EXPECT_EQ(par[3].exit_code, static_cast<int>(ExitCode::kCapacity));
  for (int k = 0; k < 3; ++k) {
    const fs::path serial = root / ("ser" + std::to_string(k));
    write_artifacts(run(jobs[k].scenario, Command::kAttack), serial);
    EXPECT_EQ(slurp(serial / "summary.txt"), slurp(jobs[k].out_dir / "summary.txt"));
  }
}

#ifdef PROBEGUARD_CLI
int cli(const std::string &args) {
  const std::string cmd = std::string(PROBEGUARD_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodePerErrorClass) {
  const fs::path d = temp_dir("cli");
  EXPECT_EQ(cli("attack --scenario /nonexistent.scn"), 2);
  EXPECT_EQ(cli("frobnicate"), 2);

  std::ofstream(d / "tf.scn") << minimal("sensor: {site: [3, 7], data_route_ps: 1000000}\n");
  EXPECT_EQ(cli("tune --scenario " + (d / "tf.scn").string() + " --out " + (d / "o1").string()), 3);

  std::ofstream(d / "cap.scn") << minimal(
      "sensor: {site: [3, 7]}\n"
      "defense: {mode: mtd_inter, allowed_region: {x0: 30, y0: 14, x1: 30, y1: 14}}\n");
  EXPECT_EQ(cli("tune --scenario " + (d / "cap.scn").string() + " --out " + (d / "o2").string()), 4);

  std::ofstream(d / "scn.scn") << minimal("scan: {region_um: {x0: 0, y0: 0, x1: 400, y1: 10}}\n");
  EXPECT_EQ(cli("eofm --scenario " + (d / "scn.scn").string() + " --out " + (d / "o3").string()), 5);

  std::ofstream(d / "fp.scn") << minimal(
      "sensor: {site: [3, 7]}\n"
      "defense: {threshold: 1}\n"
      "stability: {duration_min: 0.05}\n");
  EXPECT_EQ(cli("stability --scenario " + (d / "fp.scn").string() + " --out " + (d / "o4").string()), 6);

  EXPECT_EQ(cli("tune --scenario " + (kScenarios / "unprotected_key.scn").string() +
                " --seed 4 --out " + (d / "ok").string()),
            0);
  EXPECT_TRUE(fs::exists(d / "ok" / "summary.txt"));
  EXPECT_NE(slurp(d / "ok" / "summary.txt").find("seed: 4"), std::string::npos);
}
#endif

}  // namespace
}  // namespace probeguard::harness
