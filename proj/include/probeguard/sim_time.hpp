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

#ifndef PROBEGUARD_SIM_TIME_HPP_
#define PROBEGUARD_SIM_TIME_HPP_

#include <cmath>
#include <compare>
#include <cstdint>

namespace probeguard {

// Simulated time, stored as integer picoseconds. An hour is 3.6e15 ps, so
// int64 covers multi-day runs without rounding.
class SimTime {
 public:
  constexpr SimTime() = default;

  static constexpr SimTime from_ps(std::int64_t ps) { return SimTime(ps); }
  static SimTime from_ns(double ns) { return SimTime(std::llround(ns * 1e3)); }
  static SimTime from_us(double us) { return SimTime(std::llround(us * 1e6)); }
  static SimTime from_ms(double ms) { return SimTime(std::llround(ms * 1e9)); }
  static SimTime from_s(double s) { return SimTime(std::llround(s * 1e12)); }

  constexpr std::int64_t ps() const { return ps_; }
  constexpr double ns() const { return static_cast<double>(ps_) * 1e-3; }
  constexpr double us() const { return static_cast<double>(ps_) * 1e-6; }
  constexpr double ms() const { return static_cast<double>(ps_) * 1e-9; }
  constexpr double s() const { return static_cast<double>(ps_) * 1e-12; }

  constexpr SimTime operator+(SimTime o) const { return SimTime(ps_ + o.ps_); }
  constexpr SimTime operator-(SimTime o) const { return SimTime(ps_ - o.ps_); }
  constexpr SimTime operator*(std::int64_t k) const { return SimTime(ps_ * k); }
  constexpr SimTime &operator+=(SimTime o) {
    ps_ += o.ps_;
    return *this;
  }
  constexpr auto operator<=>(const SimTime &) const = default;

 private:
  constexpr explicit SimTime(std::int64_t ps) : ps_(ps) {}
  std::int64_t ps_ = 0;
};

}  // namespace probeguard

#endif  // PROBEGUARD_SIM_TIME_HPP_
