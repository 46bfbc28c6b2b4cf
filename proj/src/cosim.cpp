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

#include "probeguard/cosim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "probeguard/error.hpp"

namespace probeguard::sim {

namespace {
constexpr std::uint64_t kNever = UINT64_MAX;
constexpr std::uint32_t kNoRun = UINT32_MAX;
// Cells at or beyond this many PSF sigmas contribute nothing. The untruncated
// Gaussian would still leave 3.7e-6 of the peak at 5 sigma.
constexpr double kPsfCutoffSigmas = 5.0;
}  // namespace

std::uint64_t half_period_cycles(double freq_mhz, double clock_mhz) {
  if (!(freq_mhz > 0.0)) throw ConfigError("frequency must be positive");
  const double h = clock_mhz / (2.0 * freq_mhz);
  const double r = std::round(h);
  if (r < 1.0 || std::abs(h - r) > 1e-9)
    throw ConfigError("a " + std::to_string(freq_mhz) +
                      " MHz square wave is not a whole number of " +
                      std::to_string(clock_mhz) + " MHz clock cycles");
  return static_cast<std::uint64_t>(r);
}

CoSim::CoSim(fabric::FabricModel &model, thermal::ThermalParams thermal_params,
             double clock_mhz, sensor::Sensor *sensor,
             defense::Defense *defense, std::uint64_t seed)
    : model_(model),
      thermal_(model.geometry(), thermal_params),
      clock_mhz_(clock_mhz),
      sensor_(sensor),
      defense_(defense) {
  if (!(clock_mhz > 0.0)) throw ConfigError("clock must be positive");
  const double period = 1e6 / clock_mhz;
  if (std::abs(period - std::round(period)) > 1e-6)
    throw ConfigError("clock period must be a whole number of picoseconds");
  period_ps_ = std::llround(period);
  if (!model_.finalized()) model_.finalize();
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), 0xc051u};
  sensor_rng_.seed(seq);
  if (sensor_) next_window_end_ = sensor_->params().t_detect_cycles;
  refresh_response();
}

SimTime CoSim::time_of(std::uint64_t cycle) const {
  return SimTime::from_ps(static_cast<std::int64_t>(cycle) * period_ps_);
}

// --- stimulus ------------------------------------------------------------------

void CoSim::set_stimulus(const Stimulus &stimulus) {
  stimulus_ = stimulus;
  drives_.clear();
  auto input = [&](const std::string &name) {
    const auto id = model_.find_net(name);
    if (!id || model_.nets()[*id].driver != fabric::DriverKind::kInput)
      throw ScenarioError("stimulus net '" + name + "' is not a fabric input");
    return *id;
  };
  for (const auto &[name, v] : stimulus_.constants) input(name);
  for (const auto &s : stimulus_.squares) {
    if (s.half_period_cycles == 0)
      throw ConfigError("square wave on '" + s.net + "' has zero period");
    drives_.push_back({input(s.net), &s, nullptr, {}});
  }
  for (const auto &p : stimulus_.patterns) {
    if (p.bits.empty() || p.cycles_per_bit == 0)
      throw ConfigError("pattern on '" + p.net + "' is empty");
    if (p.bits.find_first_not_of("01") != std::string::npos)
      throw ConfigError("pattern on '" + p.net + "' must be 0/1 characters");
    Drive d{input(p.net), nullptr, &p, {}};
    const std::size_t n = p.bits.size();
    d.run.assign(n, kNoRun);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t horizon = p.repeat ? n : n - i;
      for (std::size_t k = 1; k < horizon; ++k)
        if (p.bits[(i + k) % n] != p.bits[i]) {
          d.run[i] = static_cast<std::uint32_t>(k);
          break;
        }
    }
    drives_.push_back(std::move(d));
  }
  for (const auto &[name, v] : stimulus_.constants)
    model_.set_input(input(name), v);
  restart_stimulus();
}

void CoSim::restart_stimulus() {
  origin_ = now_;
  apply_drives();
  refresh_next_input_change();
  quiet_ = false;
  refresh_response();
}

void CoSim::set_constant(const std::string &net, bool value) {
  const auto id = model_.find_net(net);
  if (!id || model_.nets()[*id].driver != fabric::DriverKind::kInput)
    throw ScenarioError("net '" + net + "' is not a fabric input");
  stimulus_.constants[net] = value;
  model_.set_input(*id, value);
  quiet_ = false;
  refresh_response();
}

bool CoSim::drive_value(const Drive &d, std::uint64_t rel) const {
  if (d.square) {
    const bool first_half = (rel / d.square->half_period_cycles) % 2 == 0;
    return first_half ? d.square->start_high : !d.square->start_high;
  }
  const auto &p = *d.pattern;
  const std::uint64_t step = rel / p.cycles_per_bit;
  const std::uint64_t n = p.bits.size();
  const std::uint64_t idx = p.repeat ? step % n : std::min(step, n - 1);
  return p.bits[idx] == '1';
}

std::uint64_t CoSim::next_change(const Drive &d, std::uint64_t rel) const {
  if (d.square) {
    const std::uint64_t h = d.square->half_period_cycles;
    return (rel / h + 1) * h;
  }
  const auto &p = *d.pattern;
  const std::uint64_t step = rel / p.cycles_per_bit;
  const std::uint64_t n = p.bits.size();
  if (!p.repeat && step >= n - 1) return kNever;
  const std::uint32_t r = d.run[p.repeat ? step % n : step];
  if (r == kNoRun) return kNever;
  return (step + r) * p.cycles_per_bit;
}

bool CoSim::apply_drives() {
  const std::uint64_t before = model_.state_version();
  for (const Drive &d : drives_)
    model_.set_input(d.net, drive_value(d, now_ - origin_));
  return model_.state_version() != before;
}

void CoSim::refresh_next_input_change() {
  next_input_change_ = kNever;
  for (const Drive &d : drives_) {
    const std::uint64_t rel = next_change(d, now_ - origin_);
    if (rel != kNever)
      next_input_change_ = std::min(next_input_change_, origin_ + rel);
  }
}

// --- thermal / spot ---------------------------------------------------------------

void CoSim::sync_thermal() {
  if (now_ > thermal_cycle_) {
    thermal_.advance(time_of(now_ - thermal_cycle_).us(), spot_);
    thermal_cycle_ = now_;
  }
}

void CoSim::set_spot(const thermal::LaserSpot &spot) {
  if (spot.power < 0.0 || spot.sigma_um <= 0.0)
    throw ContractViolation("LaserSpot: power must be >= 0 and sigma > 0");
  sync_thermal();
  spot_ = spot;
  weights_placement_version_ = ~std::uint64_t{0};
  refresh_response();
}

// --- photoresponse / lock-in --------------------------------------------------------

void CoSim::refresh_weights() {
  weights_.clear();
  weights_placement_version_ = model_.placement_version();
  if (!spot_.enabled) return;
  const double cutoff = kPsfCutoffSigmas * spot_.sigma_um;
  auto add = [&](fabric::NetId net, fabric::PointUm at, double scale) {
    const double d = fabric::distance_um(at, spot_.center);
    if (d >= cutoff) return;
    weights_.emplace_back(net, scale * thermal::unit_gaussian(d, spot_.sigma_um));
  };
  for (std::size_t i = 0; i < model_.ffs().size(); ++i)
    add(model_.ffs()[i].q, model_.ff_position(i), 1.0);
  for (std::size_t i = 0; i < model_.luts().size(); ++i)
    add(model_.luts()[i].output, model_.lut_position(i), 0.5);
}

void CoSim::refresh_response() {
  bool dirty = false;
  if (weights_placement_version_ != model_.placement_version()) {
    refresh_weights();
    dirty = true;
  }
  if (dirty || response_state_version_ != model_.state_version()) {
    response_state_version_ = model_.state_version();
    double w = 0.0;
    for (const auto &[net, weight] : weights_)
      if (model_.value(net)) w += weight;
    response_ = w;
  }
}

void CoSim::begin_lockin(double freq_mhz) {
  if (!(freq_mhz > 0.0)) throw ConfigError("lock-in frequency must be positive");
  omega_per_cycle_ = 2.0 * std::numbers::pi * freq_mhz / clock_mhz_;
  lock_start_ = now_;
  lock_sum_ = {};
  lockin_on_ = true;
}

void CoSim::accumulate(std::uint64_t from, std::uint64_t to) {
  if (!lockin_on_ || response_ == 0.0 || to <= from) return;
  const double a = omega_per_cycle_ * static_cast<double>(from - lock_start_);
  const double b = omega_per_cycle_ * static_cast<double>(to - lock_start_);
  const std::complex<double> ea = std::polar(1.0, -a), eb = std::polar(1.0, -b);
  lock_sum_ += response_ * (ea - eb) / std::complex<double>(0.0, omega_per_cycle_);
}

std::complex<double> CoSim::lockin_phasor() {
  if (!lockin_on_ || now_ == lock_start_) return {};
  return 2.0 * lock_sum_ / static_cast<double>(now_ - lock_start_);
}

// --- main loop ----------------------------------------------------------------------

void CoSim::sensor_window() {
  const SimTime since = time_of(now_ - thermal_cycle_);
  const double dt =
      thermal_.predict(sensor_->site(), since.us(), spot_);
  const double factor =
      thermal::delay_factor(std::max(0.0, dt), thermal_.params().alpha_per_k);
  const double p = sensor_->model().zero_probability(sensor_->tune(), factor);
  const sensor::SensorReadout r = sensor_->run_window_at(p, sensor_rng_);
  if (record_)
    records_.push_back({stats_.windows, r.zero_count, r.max_pulse_len,
                        sensor_->latched()});
  ++stats_.windows;
  stats_.total_zero_count += r.zero_count;
  stats_.max_zero_count = std::max(stats_.max_zero_count, r.zero_count);
  if (sensor_->latched() && !trigger_) {
    trigger_ = now_;
    if (defense_) {
      defense_->on_trigger(model_, time_of(now_));
      quiet_ = false;
    }
  }
}

void CoSim::process_time_point() {
  bool changed = model_.step_clock();
  if (defense_ && defense_->service(model_, time_of(now_))) changed = true;
  if (now_ >= next_input_change_) {
    changed = apply_drives() || changed;
    refresh_next_input_change();
  }
  quiet_ = !changed;
  if (sensor_ && now_ == next_window_end_) {
    sensor_window();
    next_window_end_ += sensor_->params().t_detect_cycles;
  }
  refresh_response();
}

void CoSim::advance_to(std::uint64_t end) {
  while (now_ < end) {
    std::uint64_t next = now_ + 1;
    if (quiet_) {
      next = std::min({end, next_input_change_, next_window_end_});
      if (defense_) {
        if (auto t = defense_->next_event_time()) {
          const auto c = static_cast<std::uint64_t>(
              (t->ps() + period_ps_ - 1) / period_ps_);
          next = std::min(next, std::max(c, now_ + 1));
        }
      }
      next = std::max(next, now_ + 1);
    }
    accumulate(now_, next);
    now_ = next;
    process_time_point();
  }
}

}  // namespace probeguard::sim
