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

// Responses to a sensor trigger. Bitstream manipulation is modelled at the
// placement level: a relocation is a new FF placement that becomes active
// one reconfiguration latency after the trigger.

#ifndef PROBEGUARD_DEFENSE_HPP_
#define PROBEGUARD_DEFENSE_HPP_

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "probeguard/fabric.hpp"
#include "probeguard/sim_time.hpp"

namespace probeguard::defense {

using Rng = std::mt19937_64;

enum class Mode { kNone, kMtdInter, kMtdIntra, kPolymorphic, kZeroize };

std::string to_string(Mode m);
// Throws ConfigError on an unknown name.
Mode parse_mode(const std::string &name);

// What protected FFs show while a partial reconfiguration is in flight.
enum class MidPr { kHold, kZero };

struct DefensePolicy {
  Mode mode = Mode::kNone;
  double pr_latency_us = 223.0;
  std::vector<fabric::SliceCoord> allowed_region;
  // Latch threshold in zero counts; 0 means "derive from the idle tune".
  std::uint32_t threshold = 0;
  std::uint64_t rng_seed = 1;
  MidPr mid_pr = MidPr::kHold;
  // Input nets driven to 1 in polymorphic mode.
  std::vector<std::string> control_nets = {"alarm"};

  // Throws ConfigError if the policy cannot be used on this fabric.
  void validate(const fabric::FabricModel &model,
                std::optional<fabric::SliceCoord> sensor_site) const;
  // FF slots the MTD region reserves.
  int region_slots(const fabric::FabricModel &model) const;
};

// Bijection on {0..n-1}.
class Permutation {
 public:
  Permutation() = default;
  // Throws ContractViolation unless `mapping` is a bijection.
  explicit Permutation(std::vector<std::size_t> mapping);
  static Permutation identity(std::size_t n);

  std::size_t size() const { return map_.size(); }
  std::size_t operator()(std::size_t i) const { return map_.at(i); }
  const std::vector<std::size_t> &mapping() const { return map_; }

  Permutation inverse() const;
  // (this o other)(i) = this(other(i)).
  Permutation compose(const Permutation &other) const;
  bool is_identity() const;
  // e.g. "(0 2 1)(3 4)"; "()" for the identity.
  std::string cycle_notation() const;

  bool operator==(const Permutation &) const = default;

 private:
  std::vector<std::size_t> map_;
};

// Uniform permutation by Fisher-Yates. n must be >= 1.
Permutation permute_intra(std::size_t n, Rng &rng);

// New slot of bits[i] is the old slot of bits[pi(i)].
fabric::Placement apply_permutation(const fabric::Placement &placement,
                                    const std::vector<std::size_t> &bits,
                                    const Permutation &pi);

// Moves every FF listed in `bits` to a free slot of a uniformly chosen
// allowed slice (then a uniformly chosen free slot in it). Slots held by
// other FFs stay taken. Throws CapacityError when the region is full.
fabric::Placement relocate_inter(const fabric::Placement &placement,
                                 const std::vector<std::size_t> &bits,
                                 const std::vector<fabric::SliceCoord> &allowed,
                                 const fabric::Geometry &geometry, Rng &rng);

// k-input init whose top input selects f (0) or g (1). f and g are truth
// tables on k-1 inputs, entry i for input pattern i.
std::uint64_t configure_polymorphic_lut(const std::vector<std::uint8_t> &f,
                                        const std::vector<std::uint8_t> &g);

struct ReconfigEvent {
  SimTime fire_time;
  SimTime completes_at;
  fabric::Placement old_placement;
  fabric::Placement new_placement;
};

struct LogEntry {
  double trigger_time_us = 0.0;
  std::string mode;
  std::optional<double> event_complete_us;
  std::string placement_diff;
  std::string permutation;
};

// Runtime side of a policy inside one simulation.
class Defense {
 public:
  explicit Defense(DefensePolicy policy);

  const DefensePolicy &policy() const { return policy_; }
  bool triggered() const { return triggered_; }
  bool reconfiguring() const { return pending_.has_value(); }

  // Called when the latch sets. Repeated calls are ignored.
  void on_trigger(fabric::FabricModel &model, SimTime now);
  // Applies events due at or before `now`. Returns true if the model changed.
  bool service(fabric::FabricModel &model, SimTime now);
  std::optional<SimTime> next_event_time() const;

  const std::vector<ReconfigEvent> &events() const { return events_; }
  const std::vector<LogEntry> &log() const { return log_; }
  std::string log_csv() const;

 private:
  void start_pr(fabric::FabricModel &model, SimTime now,
                fabric::Placement next, LogEntry entry);
  void zeroize(fabric::FabricModel &model, LogEntry entry);

  DefensePolicy policy_;
  Rng rng_;
  bool triggered_ = false;
  std::optional<ReconfigEvent> pending_;
  std::vector<ReconfigEvent> events_;
  std::vector<LogEntry> log_;
};

std::string placement_diff(const fabric::FabricModel &model,
                           const fabric::Placement &before,
                           const fabric::Placement &after);

}  // namespace probeguard::defense

#endif  // PROBEGUARD_DEFENSE_HPP_
