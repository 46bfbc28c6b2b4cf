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

// Single-LUT delay sensor. A clock edge races itself into one register: the
// data path is one delay element plus a LUT (and its routing), the clock path
// is a chain of delay elements. When the two arrivals are close the register
// goes metastable; heating slows the fabric part of the data path and turns
// ones into zeros.

#ifndef PROBEGUARD_SENSOR_HPP_
#define PROBEGUARD_SENSOR_HPP_

#include <compare>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "probeguard/fabric.hpp"
#include "probeguard/thermal.hpp"

namespace probeguard::sensor {

using Rng = std::mt19937_64;

struct TuneValue {
  std::uint32_t data_delay = 0;   // 5-bit tap code
  std::uint32_t clock_delay = 0;  // (n+5)-bit chain code
  std::uint32_t lut_select = 0;   // which LUT input is passed through
  auto operator<=>(const TuneValue &) const = default;
};

std::string to_string(const TuneValue &t);

struct SensorReadout {
  std::uint32_t zero_count = 0;
  std::uint32_t max_pulse_len = 0;
  std::uint32_t window = 0;
};

// --- delay chain encoding --------------------------------------------------

// Width of the clock-chain code, n + 5 for a chain of 2^n elements.
int chain_code_bits(int chain_length);
// Per-element taps: element 0 takes the five LSBs, the next (code >> 5)
// elements sit at tap 31, the remaining ones at tap 0.
std::vector<int> chain_taps(std::uint32_t code, int chain_length);
// Total delay of a uniform chain.
double chain_delay(std::uint32_t code, int chain_length, double per_tap_ps,
                   double base_ps);

// Period (ns) of a ring oscillator made of `stages` fabric stages in series
// with a uniform delay chain set to `code`.
double ro_calibration(std::uint32_t code, int chain_length, double per_tap_ps,
                      double base_ps, int stages = 11,
                      double stage_delay_ps = 150.0);

struct RoPoint {
  std::uint32_t code;
  double period_ns;
};
std::vector<RoPoint> ro_sweep(int chain_length, double per_tap_ps,
                              double base_ps, int stages = 11,
                              double stage_delay_ps = 150.0);

// --- sensor device model ------------------------------------------------------

struct SensorParams {
  double clock_mhz = 100.0;
  int chain_length = 8;
  double t_sense_ms = 100.0;
  std::uint32_t t_detect_cycles = 255;
  double jitter_ps = 15.0;

  // Calibrated delay elements (not temperature dependent).
  double tap_ps = 78.0;
  double element_base_ps = 400.0;
  // Per-element process mismatch, drawn once per device.
  double tap_mismatch_rel = 0.01;
  double base_mismatch_ps = 5.0;

  // Fabric portions of each path; these scale with the local delay factor.
  double data_route_ps = 2400.0;
  double clock_route_ps = 300.0;
  std::vector<double> lut_pin_ps = {120.0, 150.0, 185.0, 230.0};
  double setup_ps = 0.0;

  // Tuning.
  std::uint32_t probe_batch = 10000;
  double band_low = 1e-4;
  double band_high = 0.5;
  int explore_radius = -1;  // < 0: derived from the pin-delay spread
  double threshold_sigmas = 6.0;
  std::uint32_t min_threshold = 16;

  int lut_arity() const { return static_cast<int>(lut_pin_ps.size()); }
  std::uint32_t max_clock_code() const;
  double clock_period_ps() const { return 1e6 / clock_mhz; }
  void validate() const;
};

// One physical instance of the sensor: nominal parameters plus the drawn
// mismatch of its delay elements.
class SensorModel {
 public:
  SensorModel(SensorParams params, std::uint64_t device_seed);

  const SensorParams &params() const { return params_; }
  // factor is the fabric delay factor (1 + alpha dT) at the sensor site.
  double clock_arrival_ps(std::uint32_t clock_code, double factor) const;
  double data_arrival_ps(std::uint32_t data_code, std::uint32_t lut_select,
                         double factor) const;
  double slack_ps(const TuneValue &t, double factor) const;
  // P(register samples 0) = Phi(-slack / jitter).
  double zero_probability(const TuneValue &t, double factor) const;
  void check(const TuneValue &t) const;

  const std::vector<fabric::DelayElement> &chain() const { return chain_; }
  const fabric::DelayElement &data_element() const { return data_element_; }

 private:
  SensorParams params_;
  std::vector<fabric::DelayElement> chain_;
  fabric::DelayElement data_element_;
};

double normal_cdf(double x);

// Draws one t_detect window of register outputs (1 = captured the edge).
void draw_window(double p_zero, std::uint32_t length, Rng &rng,
                 std::vector<std::uint8_t> &out);

// Zero count and longest zero run over the whole span.
SensorReadout read_counters(std::span<const std::uint8_t> samples);

// latch <- latch || zero_count >= threshold. threshold must be in
// (0, readout.window].
bool update_latch(bool &latch, const SensorReadout &readout,
                  std::uint32_t threshold);

struct SensorResources {
  int luts = 0;
  int delay_elements = 0;
  int ffs = 0;
};

// Deployed sensor: a device model at a site, its tune and its latch.
class Sensor {
 public:
  Sensor(fabric::SliceCoord site, SensorParams params,
         std::uint64_t device_seed);

  fabric::SliceCoord site() const { return site_; }
  const SensorModel &model() const { return model_; }
  const SensorParams &params() const { return model_.params(); }

  TuneValue tune() const { return tune_; }
  void set_tune(const TuneValue &t);
  std::uint32_t threshold() const { return threshold_; }
  void set_threshold(std::uint32_t threshold);

  bool latched() const { return latch_; }
  void reset_latch() { latch_ = false; }

  double zero_probability(const thermal::ThermalField &field) const;
  // One clock cycle of the sensor register.
  bool sample(const thermal::ThermalField &field, Rng &rng) const;
  // t_detect cycles at the current field; updates the latch.
  SensorReadout run_window(const thermal::ThermalField &field, Rng &rng);
  SensorReadout run_window_at(double p_zero, Rng &rng);
  std::span<const std::uint8_t> last_window() const { return window_; }

  SensorResources resources() const;

 private:
  fabric::SliceCoord site_;
  SensorModel model_;
  TuneValue tune_;
  std::uint32_t threshold_ = 0;
  bool latch_ = false;
  std::vector<std::uint8_t> window_;
};

// Adds the sensor's LUT, register and delay elements to a fabric (cells are
// named "sensor/..."). The model must be re-finalized afterwards.
void instantiate(fabric::FabricModel &model, const Sensor &sensor);

// --- tuning ------------------------------------------------------------------

std::uint64_t sense_budget_samples(double t_sense_ms, double clock_mhz);

struct Characterization {
  std::uint64_t windows = 0;
  std::uint32_t max_zero_count = 0;
  std::uint64_t total_zero_count = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

// Laser-off measurements of a sensor at arbitrary tune settings. Each
// setting gets its own random stream derived from (seed, setting), so a
// given setting always measures the same way no matter the search order.
class TuneBench {
 public:
  TuneBench(const SensorModel &model, std::uint64_t seed,
            double ambient_factor = 1.0);

  // Fraction of zeros over one probe batch.
  double probe_rate(const TuneValue &t) const;
  bool metastable(const TuneValue &t) const;
  // Zero counts of every t_detect window in t_sense.
  Characterization characterize(const TuneValue &t) const;

  const SensorModel &model() const { return model_; }

 private:
  Rng stream(const TuneValue &t, std::uint32_t tag) const;

  const SensorModel &model_;
  std::uint64_t seed_;
  double factor_;
};

struct TuneResult {
  TuneValue tune;
  Characterization idle;
  std::uint32_t threshold = 0;
  int probes = 0;
  int characterized = 0;
};

// Tune quality: lower max zero count, then lower total, then the smallest
// clock code (then data code, then select).
bool better_tune(const TuneValue &a, const Characterization &ca,
                 const TuneValue &b, const Characterization &cb);

std::uint32_t derive_threshold(const Characterization &idle,
                               const SensorParams &params);

// Searches every data code: binary search of the clock code for the
// metastable boundary with LUT select 0, then the neighbourhood of that
// boundary with every select. Throws TuningFailure if nothing is metastable.
TuneResult tune(const SensorModel &model, std::uint64_t seed,
                double ambient_factor = 1.0);

}  // namespace probeguard::sensor

#endif  // PROBEGUARD_SENSOR_HPP_
