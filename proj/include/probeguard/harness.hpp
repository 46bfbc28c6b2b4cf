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

// Scenario files, the experiment pipeline and its artifacts.

#ifndef PROBEGUARD_HARNESS_HPP_
#define PROBEGUARD_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "probeguard/attacker.hpp"
#include "probeguard/cosim.hpp"
#include "probeguard/defense.hpp"
#include "probeguard/fabric.hpp"
#include "probeguard/sensor.hpp"
#include "probeguard/thermal.hpp"

namespace probeguard::harness {

enum class AttackKind { kNone, kKey, kFunction, kEop };

struct SensorConfig {
  fabric::SliceCoord site;
  sensor::SensorParams params;
};

struct KeyAttack {
  std::string reg = "key";
  // Character i is bit i.
  std::string expected;
};

struct FunctionAttack {
  std::vector<std::string> a_nets;
  std::vector<std::string> b_nets;
  std::string output_reg = "c";
  std::vector<std::pair<std::string, std::string>> vectors;
};

struct EopAttack {
  attacker::EopConfig config;
  // One probe per listed FF, parked on its slot at load time. Empty: probe
  // config.point.
  std::vector<std::string> target_ffs;
};

struct StabilityConfig {
  double duration_min = 30.0;
  double interval_s = 60.0;
  double rolling_s = 1.0;
  double plateau_limit_min = 10.0;
  // Overrides the sensor's jitter for the idle run; the tune is still found
  // with the scenario's own jitter.
  std::optional<double> jitter_ps;
};

struct Scenario {
  std::string name;
  std::string netlist_text;
  std::uint64_t seed = 1;
  double clock_mhz = 100.0;
  thermal::ThermalParams thermal;
  std::optional<SensorConfig> sensor;
  defense::DefensePolicy defense;
  sim::Stimulus stimulus;
  attacker::ScanConfig scan;
  // Decision level for reading pixels; <= 0 selects the default.
  double read_threshold = 0.0;
  AttackKind attack = AttackKind::kNone;
  KeyAttack key;
  FunctionAttack function;
  EopAttack eop;
  StabilityConfig stability;

  double threshold() const;
};

// Parse errors are ConfigError; the netlist path is relative to base_dir.
Scenario parse_scenario(const std::string &yaml_text,
                        const std::filesystem::path &base_dir);
Scenario load_scenario(const std::filesystem::path &path);

struct ResourceReport {
  int sensor_luts = 0;
  int sensor_delay_elements = 0;
  int sensor_ffs = 0;
  int defense_slots = 0;
};

// Counts cells named "sensor/..." and the slots the defense reserves.
ResourceReport report_resources(const fabric::FabricModel &model,
                                const defense::DefensePolicy &policy);

struct StabilityRow {
  double minute = 0.0;
  std::uint64_t windows = 0;
  double average = 0.0;
  std::uint32_t running_max = 0;
};

struct StabilityReport {
  double duration_min = 0.0;
  std::uint64_t windows = 0;
  double p_zero = 0.0;
  std::uint64_t total_zero_count = 0;
  std::uint32_t max_zero_count = 0;
  double max_rolling_average = 0.0;
  // Time of the last increase of the running maximum.
  double plateau_min = 0.0;
  std::uint64_t false_positives = 0;
  std::optional<double> first_false_positive_min;
  std::vector<StabilityRow> rows;

  bool plateaued_within(double minutes) const { return plateau_min <= minutes; }
  std::string to_csv() const;
};

// Laser-off run of the tuned sensor; `model` carries the idle jitter under
// study. Counts follow the exact per-sample model, with zero-free stretches
// skipped in one geometric draw.
StabilityReport stability_test(const sensor::SensorModel &model,
                               const sensor::TuneValue &tune,
                               std::uint32_t threshold,
                               const StabilityConfig &config, std::uint64_t seed);

enum class Command { kTune, kEofm, kEop, kAttack, kStability };
Command parse_command(const std::string &name);
std::string to_string(Command c);

struct RunSummary {
  std::string scenario;
  std::string command;
  std::uint64_t seed = 0;
  double clock_mhz = 0.0;
  std::optional<sensor::TuneResult> tune;
  std::uint32_t threshold = 0;
  defense::Mode defense_mode = defense::Mode::kNone;
  std::optional<double> trigger_time_us;
  std::optional<std::size_t> trigger_pixel;
  double simulated_time_us = 0.0;
  std::optional<double> reconfig_latency_us;
  std::optional<bool> reconfig_within_dwell;
  std::optional<std::size_t> pixels;
  double scan_start_us = 0.0;
  std::vector<fabric::SliceCoord> localized;
  std::string key_expected, key_recovered;
  int bits_correct = 0, bits_total = 0;
  std::vector<attacker::FunctionRow> function_table;
  std::optional<bool> function_is_xor;
  sim::CounterStats counters;
  ResourceReport resources;
  std::optional<StabilityReport> stability;
  std::optional<attacker::ScanConfig> scan;

  double accuracy() const {
    return bits_total ? static_cast<double>(bits_correct) / bits_total : 0.0;
  }
  std::string to_text() const;
};

struct RunResult {
  RunSummary summary;
  std::optional<attacker::EofmImage> image;
  std::vector<attacker::EofmImage> function_images;
  // (probed name, trace) per EOP probe.
  std::vector<std::pair<std::string, attacker::EopTrace>> traces;
  std::vector<sim::WindowRecord> windows;
  std::string defense_log_csv;
};

// Executes one command of the pipeline. Tuning failures, capacity errors and
// configuration errors propagate as their Error subclasses.
RunResult run(const Scenario &scenario, Command command);

// summary.txt, image.pgm, image.csv, counters.csv, trace.csv, defense_log.csv
// (whichever apply). Creates the directory.
void write_artifacts(const RunResult &result, const std::filesystem::path &dir);
std::string counters_csv(const std::vector<sim::WindowRecord> &windows);
// time_ps followed by one column per trace; traces must share a time base.
std::string traces_csv(
    const std::vector<std::pair<std::string, attacker::EopTrace>> &traces);

struct BatchJob {
  Scenario scenario;
  Command command = Command::kAttack;
  std::filesystem::path out_dir;
};

struct BatchOutcome {
  std::string name;
  std::filesystem::path out_dir;
  int exit_code = 0;
  std::string message;
};

// Runs independent jobs on up to `jobs` threads; results keep job order.
std::vector<BatchOutcome> run_batch(const std::vector<BatchJob> &jobs, int threads);

}  // namespace probeguard::harness

#endif  // PROBEGUARD_HARNESS_HPP_
