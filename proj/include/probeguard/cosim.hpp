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

// Fabric + thermal + sensor + defense stepped on one simulated clock.
//
// Time is counted in fabric clock cycles. Time point k is the k-th rising
// edge; the values visible during cycle [k, k+1) are those after the edge,
// the defense actions and the stimulus for cycle k have been applied. When
// an edge changes nothing and no input, window or defense event is due, the
// engine jumps straight to the next such event.

#ifndef PROBEGUARD_COSIM_HPP_
#define PROBEGUARD_COSIM_HPP_

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "probeguard/defense.hpp"
#include "probeguard/fabric.hpp"
#include "probeguard/sensor.hpp"
#include "probeguard/sim_time.hpp"
#include "probeguard/thermal.hpp"

namespace probeguard::sim {

// Drive program for fabric inputs, relative to a restartable origin.
struct Stimulus {
  std::map<std::string, bool> constants;

  struct Square {
    std::string net;
    std::uint64_t half_period_cycles = 1;
    bool start_high = false;
  };
  std::vector<Square> squares;

  // bits[i] is driven during steps i; each step lasts cycles_per_bit cycles.
  struct Pattern {
    std::string net;
    std::string bits;
    std::uint32_t cycles_per_bit = 1;
    bool repeat = true;
  };
  std::vector<Pattern> patterns;
};

// Half period, in cycles, of a square wave at freq_mhz on a clock_mhz clock.
// Throws ConfigError unless it is a whole number of cycles.
std::uint64_t half_period_cycles(double freq_mhz, double clock_mhz);

struct WindowRecord {
  std::uint64_t index = 0;
  std::uint32_t zero_count = 0;
  std::uint32_t max_pulse = 0;
  bool latched = false;
};

struct CounterStats {
  std::uint64_t windows = 0;
  std::uint64_t total_zero_count = 0;
  std::uint32_t max_zero_count = 0;
};

class CoSim {
 public:
  // sensor and defense may be null. All referenced objects must outlive the
  // engine.
  CoSim(fabric::FabricModel &model, thermal::ThermalParams thermal_params,
        double clock_mhz, sensor::Sensor *sensor, defense::Defense *defense,
        std::uint64_t seed);

  void set_stimulus(const Stimulus &stimulus);
  // Restarts patterns and square waves at the current cycle.
  void restart_stimulus();
  void set_constant(const std::string &net, bool value);

  void set_spot(const thermal::LaserSpot &spot);
  const thermal::LaserSpot &spot() const { return spot_; }

  // Starts a new lock-in integration at freq_mhz from the current cycle.
  void begin_lockin(double freq_mhz);
  // (2/T) * integral of W(t) exp(-i w t) dt since begin_lockin.
  std::complex<double> lockin_phasor();
  // Photoresponse weight of the current state at the current spot.
  double response() const { return response_; }

  void advance(std::uint64_t cycles) { advance_to(now_ + cycles); }
  void advance_to(std::uint64_t cycle);

  std::uint64_t now_cycles() const { return now_; }
  SimTime now() const { return time_of(now_); }
  SimTime time_of(std::uint64_t cycle) const;
  double clock_mhz() const { return clock_mhz_; }

  // Brings the thermal field up to the current cycle.
  void sync_thermal();
  const thermal::ThermalField &thermal() const { return thermal_; }
  fabric::FabricModel &model() { return model_; }

  std::optional<std::uint64_t> trigger_cycle() const { return trigger_; }
  void set_record_windows(bool on) { record_ = on; }
  const std::vector<WindowRecord> &windows() const { return records_; }
  const CounterStats &counter_stats() const { return stats_; }

 private:
  struct Drive {
    fabric::NetId net;
    const Stimulus::Square *square = nullptr;
    const Stimulus::Pattern *pattern = nullptr;
    // For patterns: steps until the value next changes, per position.
    std::vector<std::uint32_t> run;
  };

  void process_time_point();
  bool apply_drives();
  bool drive_value(const Drive &d, std::uint64_t rel) const;
  std::uint64_t next_change(const Drive &d, std::uint64_t rel) const;
  void refresh_next_input_change();
  void refresh_weights();
  void refresh_response();
  void accumulate(std::uint64_t from, std::uint64_t to);
  void sensor_window();

  fabric::FabricModel &model_;
  thermal::ThermalField thermal_;
  double clock_mhz_;
  std::int64_t period_ps_;
  sensor::Sensor *sensor_;
  defense::Defense *defense_;
  sensor::Rng sensor_rng_;

  Stimulus stimulus_;
  std::vector<Drive> drives_;
  std::uint64_t origin_ = 0;
  std::uint64_t next_input_change_ = UINT64_MAX;

  std::uint64_t now_ = 0;
  bool quiet_ = false;
  std::uint64_t next_window_end_ = UINT64_MAX;

  thermal::LaserSpot spot_;
  std::uint64_t thermal_cycle_ = 0;

  // Photoresponse.
  std::vector<std::pair<fabric::NetId, double>> weights_;
  std::uint64_t weights_placement_version_ = ~std::uint64_t{0};
  std::uint64_t response_state_version_ = ~std::uint64_t{0};
  double response_ = 0.0;
  double omega_per_cycle_ = 0.0;
  std::uint64_t lock_start_ = 0;
  std::complex<double> lock_sum_;
  bool lockin_on_ = false;

  std::optional<std::uint64_t> trigger_;
  bool record_ = false;
  std::vector<WindowRecord> records_;
  CounterStats stats_;
};

}  // namespace probeguard::sim

#endif  // PROBEGUARD_COSIM_HPP_
