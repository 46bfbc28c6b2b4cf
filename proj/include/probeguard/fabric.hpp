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

// Cycle-accurate model of a small LUT/FF fabric. Functional evaluation is
// synchronous with a single global clock; sub-cycle delays are only computed
// analytically (propagation_delay) where a caller needs them.

#ifndef PROBEGUARD_FABRIC_HPP_
#define PROBEGUARD_FABRIC_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "probeguard/geometry.hpp"

namespace probeguard::thermal {
class ThermalField;
}

namespace probeguard::fabric {

using NetId = std::uint32_t;
inline constexpr NetId kNoNet = ~NetId{0};

inline constexpr int kMaxLutArity = 6;

struct Lut {
  std::string name;
  int arity = 0;
  // Bit i is the output for the input pattern whose unsigned value is i,
  // input 0 being the least significant bit.
  std::uint64_t init_bits = 0;
  std::vector<NetId> inputs;
  NetId output = kNoNet;
  SliceCoord site;
  int slot = 0;
};

bool evaluate_lut(int arity, std::uint64_t init_bits,
                  std::span<const std::uint8_t> inputs);
inline bool evaluate_lut(const Lut &lut, std::span<const std::uint8_t> inputs) {
  return evaluate_lut(lut.arity, lut.init_bits, inputs);
}

// FDRE: clock enable and synchronous reset, reset has priority.
struct FlipFlop {
  std::string name;
  NetId d = kNoNet;
  NetId ce = kNoNet;
  NetId rst = kNoNet;
  NetId q = kNoNet;
  bool state = false;
  FfSlot site;
  // Logical register membership, e.g. key[3].
  std::string reg;
  int bit = -1;
  bool protected_bit = false;
  // Set by the defense: ignore clock edges (mid-reconfiguration) or read 0
  // forever (zeroized).
  bool hold = false;
  bool force_zero = false;
};

// Tapped delay line with 32 tap settings. Tap 31 (0b11111) is the longest
// delay; incrementing past it wraps to tap 0.
class DelayElement {
 public:
  static constexpr int kMaxTap = 31;

  DelayElement() = default;
  DelayElement(double base_ps, double per_tap_ps, int tap = 0);

  void set_tap(int tap);
  void increment();
  void decrement();
  int tap() const { return tap_; }

  double delay_ps() const { return delay_ps(tap_); }
  double delay_ps(int tap) const;
  double base_ps() const { return base_ps_; }
  double per_tap_ps() const { return per_tap_ps_; }

 private:
  double base_ps_ = 0.0;
  double per_tap_ps_ = 78.0;
  int tap_ = 0;
};

struct DelayCell {
  std::string name;
  DelayElement element;
  NetId input = kNoNet;
  NetId output = kNoNet;
  SliceCoord site;
};

enum class DriverKind : std::uint8_t {
  kNone,
  kInput,
  kConstant,
  kLut,
  kFlipFlop,
  kDelay,
};

struct Net {
  std::string name;
  DriverKind driver = DriverKind::kNone;
  std::uint32_t driver_index = 0;
  int driver_count = 0;
  double base_delay_ps = 100.0;
  std::optional<PointUm> centroid;
};

// Physical slot of every flip-flop, indexed like FabricModel::ffs().
using Placement = std::vector<FfSlot>;

class FabricModel {
 public:
  explicit FabricModel(Geometry geometry = {});

  // --- construction -------------------------------------------------------
  // Returns the id of the named net, creating an undriven net if needed.
  NetId net(const std::string &name);
  NetId add_input(const std::string &name);
  NetId add_constant(const std::string &name, bool value);
  std::size_t add_lut(Lut lut);
  std::size_t add_ff(FlipFlop ff);
  std::size_t add_delay(DelayCell cell);
  void set_net_delay(NetId id, double base_delay_ps,
                     std::optional<PointUm> centroid = std::nullopt);

  // Checks structural invariants, orders combinational cells and settles
  // the initial state. Must be called before any evaluation.
  void finalize();
  bool finalized() const { return finalized_; }
  // Throws ScenarioError if any structural invariant is broken.
  void validate() const;

  // --- evaluation ---------------------------------------------------------
  void set_input(NetId id, bool value);
  // One rising clock edge: every FF samples its pre-edge d/ce/rst, then the
  // combinational logic re-settles. Returns true if any net changed value.
  bool step_clock();
  bool value(NetId id) const { return values_[id] != 0; }
  std::span<const std::uint8_t> values() const { return values_; }
  std::vector<std::uint8_t> ff_state() const;
  void set_ff_state(std::size_t ff_index, bool q);
  // Bumped whenever any net value changes.
  std::uint64_t state_version() const { return state_version_; }

  // --- registers and placement -------------------------------------------
  std::vector<std::size_t> register_bits(const std::string &reg) const;
  std::vector<std::uint8_t> read_register(const std::string &reg) const;
  std::vector<std::size_t> protected_ffs() const;
  Placement placement() const;
  void apply_placement(const Placement &placement);
  std::uint64_t placement_version() const { return placement_version_; }
  PointUm ff_position(std::size_t ff_index) const;
  PointUm lut_position(std::size_t lut_index) const;
  PointUm net_centroid(NetId id) const;

  // --- accessors ----------------------------------------------------------
  const Geometry &geometry() const { return geometry_; }
  const std::vector<Net> &nets() const { return nets_; }
  const std::vector<Lut> &luts() const { return luts_; }
  const std::vector<FlipFlop> &ffs() const { return ffs_; }
  FlipFlop &ff(std::size_t i) { return ffs_.at(i); }
  const std::vector<DelayCell> &delays() const { return delays_; }
  std::optional<NetId> find_net(const std::string &name) const;
  std::optional<std::size_t> find_ff(const std::string &name) const;
  const std::vector<NetId> &inputs() const { return inputs_; }

 private:
  void drive(NetId id, DriverKind kind, std::uint32_t index);
  void settle();

  Geometry geometry_;
  std::vector<Net> nets_;
  std::map<std::string, NetId, std::less<>> net_index_;
  std::vector<Lut> luts_;
  std::vector<FlipFlop> ffs_;
  std::vector<DelayCell> delays_;
  std::vector<NetId> inputs_;

  // Combinational cells in evaluation order: (is_lut, index).
  std::vector<std::pair<bool, std::size_t>> comb_order_;
  std::vector<std::uint8_t> values_;
  std::vector<std::uint8_t> scratch_;
  std::vector<std::uint8_t> lut_inputs_;
  std::vector<std::uint8_t> next_state_;
  std::uint64_t state_version_ = 0;
  std::uint64_t placement_version_ = 0;
  bool finalized_ = false;
};

// Base net delay scaled by the delay factor at the net's centroid.
double propagation_delay(const FabricModel &model, NetId net,
                         const thermal::ThermalField &field);

}  // namespace probeguard::fabric

#endif  // PROBEGUARD_FABRIC_HPP_
