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

#include "probeguard/fabric.hpp"

#include <algorithm>
#include <set>

#include "probeguard/error.hpp"
#include "probeguard/thermal.hpp"

namespace probeguard::fabric {

bool evaluate_lut(int arity, std::uint64_t init_bits,
                  std::span<const std::uint8_t> inputs) {
  if (arity < 1 || arity > kMaxLutArity)
    throw ContractViolation("evaluate_lut: arity must be in 1..6");
  if (inputs.size() != static_cast<std::size_t>(arity))
    throw ContractViolation("evaluate_lut: expected " + std::to_string(arity) +
                            " inputs, got " + std::to_string(inputs.size()));
  unsigned index = 0;
  for (int i = 0; i < arity; ++i)
    index |= static_cast<unsigned>(inputs[static_cast<std::size_t>(i)] & 1u)
             << i;
  return ((init_bits >> index) & 1u) != 0;
}

// --- DelayElement ----------------------------------------------------------

DelayElement::DelayElement(double base_ps, double per_tap_ps, int tap)
    : base_ps_(base_ps), per_tap_ps_(per_tap_ps) {
  if (per_tap_ps <= 0.0)
    throw ContractViolation("DelayElement: per-tap delay must be positive");
  set_tap(tap);
}

void DelayElement::set_tap(int tap) {
  if (tap < 0 || tap > kMaxTap)
    throw ContractViolation("DelayElement: tap must be in 0..31");
  tap_ = tap;
}

void DelayElement::increment() { tap_ = tap_ == kMaxTap ? 0 : tap_ + 1; }
void DelayElement::decrement() { tap_ = tap_ == 0 ? kMaxTap : tap_ - 1; }

double DelayElement::delay_ps(int tap) const {
  if (tap < 0 || tap > kMaxTap)
    throw ContractViolation("DelayElement: tap must be in 0..31");
  return base_ps_ + tap * per_tap_ps_;
}

// --- FabricModel construction ----------------------------------------------

FabricModel::FabricModel(Geometry geometry) : geometry_(geometry) {
  if (geometry_.width <= 0 || geometry_.height <= 0 ||
      geometry_.site_pitch_um <= 0.0 || geometry_.ffs_per_slice <= 0 ||
      geometry_.luts_per_slice <= 0)
    throw ConfigError("fabric geometry must be positive");
}

NetId FabricModel::net(const std::string &name) {
  if (auto it = net_index_.find(name); it != net_index_.end())
    return it->second;
  const auto id = static_cast<NetId>(nets_.size());
  nets_.push_back(Net{name, DriverKind::kNone, 0, 0, 100.0, std::nullopt});
  net_index_.emplace(name, id);
  finalized_ = false;
  return id;
}

void FabricModel::drive(NetId id, DriverKind kind, std::uint32_t index) {
  Net &n = nets_.at(id);
  n.driver = kind;
  n.driver_index = index;
  ++n.driver_count;
  finalized_ = false;
}

NetId FabricModel::add_input(const std::string &name) {
  const NetId id = net(name);
  drive(id, DriverKind::kInput, static_cast<std::uint32_t>(inputs_.size()));
  inputs_.push_back(id);
  return id;
}

NetId FabricModel::add_constant(const std::string &name, bool value) {
  const NetId id = net(name);
  drive(id, DriverKind::kConstant, value ? 1u : 0u);
  return id;
}

std::size_t FabricModel::add_lut(Lut lut) {
  if (lut.arity < 1 || lut.arity > kMaxLutArity)
    throw ContractViolation("LUT " + lut.name + ": arity must be in 1..6");
  if (lut.inputs.size() != static_cast<std::size_t>(lut.arity))
    throw ContractViolation("LUT " + lut.name + ": input count != arity");
  if (lut.arity < kMaxLutArity && (lut.init_bits >> (1u << lut.arity)) != 0)
    throw ContractViolation("LUT " + lut.name +
                            ": init has bits beyond 2^k entries");
  const std::size_t index = luts_.size();
  drive(lut.output, DriverKind::kLut, static_cast<std::uint32_t>(index));
  luts_.push_back(std::move(lut));
  return index;
}

std::size_t FabricModel::add_ff(FlipFlop ff) {
  const std::size_t index = ffs_.size();
  drive(ff.q, DriverKind::kFlipFlop, static_cast<std::uint32_t>(index));
  ffs_.push_back(std::move(ff));
  ++placement_version_;
  return index;
}

std::size_t FabricModel::add_delay(DelayCell cell) {
  const std::size_t index = delays_.size();
  drive(cell.output, DriverKind::kDelay, static_cast<std::uint32_t>(index));
  delays_.push_back(std::move(cell));
  return index;
}

void FabricModel::set_net_delay(NetId id, double base_delay_ps,
                                std::optional<PointUm> centroid) {
  if (base_delay_ps < 0.0)
    throw ContractViolation("net delay must be non-negative");
  nets_.at(id).base_delay_ps = base_delay_ps;
  if (centroid) nets_.at(id).centroid = centroid;
}

void FabricModel::validate() const {
  for (const Net &n : nets_) {
    if (n.driver_count == 0)
      throw ScenarioError("net '" + n.name + "' has no driver");
    if (n.driver_count > 1)
      throw ScenarioError("net '" + n.name + "' has " +
                          std::to_string(n.driver_count) + " drivers");
  }
  std::set<FfSlot> used_ff;
  for (const FlipFlop &f : ffs_) {
    if (!geometry_.contains(f.site))
      throw ScenarioError("flip-flop '" + f.name + "' placed outside grid");
    if (!used_ff.insert(f.site).second)
      throw ScenarioError("flip-flop '" + f.name + "' shares slot (" +
                          std::to_string(f.site.slice.x) + "," +
                          std::to_string(f.site.slice.y) + ")/" +
                          std::to_string(f.site.slot));
  }
  std::set<std::pair<SliceCoord, int>> used_lut;
  for (const Lut &l : luts_) {
    if (!geometry_.contains(l.site) || l.slot < 0 ||
        l.slot >= geometry_.luts_per_slice)
      throw ScenarioError("LUT '" + l.name + "' placed outside grid");
    if (!used_lut.insert({l.site, l.slot}).second)
      throw ScenarioError("LUT '" + l.name + "' shares a slot");
  }
  for (const DelayCell &d : delays_)
    if (!geometry_.contains(d.site))
      throw ScenarioError("delay '" + d.name + "' placed outside grid");
  std::set<std::pair<std::string, int>> bits;
  for (const FlipFlop &f : ffs_)
    if (!f.reg.empty() && !bits.insert({f.reg, f.bit}).second)
      throw ScenarioError("register bit " + f.reg + "[" +
                          std::to_string(f.bit) + "] defined twice");
}

void FabricModel::finalize() {
  validate();
  // Kahn ordering of combinational cells; FF outputs, inputs and constants
  // are sources.
  const std::size_t n_comb = luts_.size() + delays_.size();
  std::vector<int> pending(n_comb, 0);
  std::vector<std::vector<std::size_t>> fanout(nets_.size());
  auto comb_id = [&](const Net &n) -> std::optional<std::size_t> {
    if (n.driver == DriverKind::kLut) return n.driver_index;
    if (n.driver == DriverKind::kDelay) return luts_.size() + n.driver_index;
    return std::nullopt;
  };
  auto add_edge = [&](NetId in, std::size_t cell) {
    if (comb_id(nets_[in])) {
      ++pending[cell];
      fanout[in].push_back(cell);
    }
  };
  for (std::size_t i = 0; i < luts_.size(); ++i)
    for (NetId in : luts_[i].inputs) add_edge(in, i);
  for (std::size_t i = 0; i < delays_.size(); ++i)
    add_edge(delays_[i].input, luts_.size() + i);

  std::vector<std::size_t> ready;
  for (std::size_t c = 0; c < n_comb; ++c)
    if (pending[c] == 0) ready.push_back(c);
  comb_order_.clear();
  while (!ready.empty()) {
    const std::size_t c = ready.back();
    ready.pop_back();
    const bool is_lut = c < luts_.size();
    const std::size_t idx = is_lut ? c : c - luts_.size();
    comb_order_.emplace_back(is_lut, idx);
    const NetId out = is_lut ? luts_[idx].output : delays_[idx].output;
    for (std::size_t next : fanout[out])
      if (--pending[next] == 0) ready.push_back(next);
  }
  if (comb_order_.size() != n_comb) {
    for (std::size_t c = 0; c < n_comb; ++c)
      if (pending[c] != 0)
        throw ScenarioError(
            "combinational cycle through '" +
            (c < luts_.size() ? luts_[c].name
                              : delays_[c - luts_.size()].name) +
            "'");
  }

  values_.assign(nets_.size(), 0);
  for (std::size_t i = 0; i < nets_.size(); ++i)
    if (nets_[i].driver == DriverKind::kConstant)
      values_[i] = static_cast<std::uint8_t>(nets_[i].driver_index);
  finalized_ = true;
  settle();
  ++state_version_;
}

// --- evaluation --------------------------------------------------------------

void FabricModel::settle() {
  for (const FlipFlop &f : ffs_) values_[f.q] = f.state ? 1 : 0;
  for (const auto &[is_lut, idx] : comb_order_) {
    if (is_lut) {
      const Lut &l = luts_[idx];
      lut_inputs_.resize(l.inputs.size());
      for (std::size_t i = 0; i < l.inputs.size(); ++i)
        lut_inputs_[i] = values_[l.inputs[i]];
      values_[l.output] = evaluate_lut(l, lut_inputs_) ? 1 : 0;
    } else {
      const DelayCell &d = delays_[idx];
      values_[d.output] = values_[d.input];
    }
  }
}

void FabricModel::set_input(NetId id, bool value) {
  if (!finalized_) throw ContractViolation("FabricModel not finalized");
  if (nets_.at(id).driver != DriverKind::kInput)
    throw ContractViolation("net '" + nets_[id].name + "' is not an input");
  const std::uint8_t v = value ? 1 : 0;
  if (values_[id] == v) return;
  values_[id] = v;
  settle();
  ++state_version_;
}

bool FabricModel::step_clock() {
  if (!finalized_) throw ContractViolation("FabricModel not finalized");
  scratch_ = values_;
  // Sample every FF from pre-edge values before touching any state.
  std::vector<std::uint8_t> &next = next_state_;
  next.resize(ffs_.size());
  for (std::size_t i = 0; i < ffs_.size(); ++i) {
    const FlipFlop &f = ffs_[i];
    bool q = f.state;
    if (f.hold) {
      // mid-reconfiguration: keep the last value
    } else if (f.force_zero || values_[f.rst]) {
      q = false;
    } else if (values_[f.ce]) {
      q = values_[f.d] != 0;
    }
    next[i] = q ? 1 : 0;
  }
  for (std::size_t i = 0; i < ffs_.size(); ++i) ffs_[i].state = next[i] != 0;
  settle();
  const bool changed = scratch_ != values_;
  if (changed) ++state_version_;
  return changed;
}

std::vector<std::uint8_t> FabricModel::ff_state() const {
  std::vector<std::uint8_t> out(ffs_.size());
  for (std::size_t i = 0; i < ffs_.size(); ++i) out[i] = ffs_[i].state;
  return out;
}

void FabricModel::set_ff_state(std::size_t ff_index, bool q) {
  ffs_.at(ff_index).state = q;
  if (finalized_) {
    settle();
    ++state_version_;
  }
}

// --- registers and placement -------------------------------------------------

std::vector<std::size_t> FabricModel::register_bits(
    const std::string &reg) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ffs_.size(); ++i)
    if (ffs_[i].reg == reg) out.push_back(i);
  std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    return ffs_[a].bit < ffs_[b].bit;
  });
  return out;
}

std::vector<std::uint8_t> FabricModel::read_register(
    const std::string &reg) const {
  std::vector<std::uint8_t> out;
  for (std::size_t i : register_bits(reg)) out.push_back(ffs_[i].state);
  return out;
}

std::vector<std::size_t> FabricModel::protected_ffs() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ffs_.size(); ++i)
    if (ffs_[i].protected_bit) out.push_back(i);
  return out;
}

Placement FabricModel::placement() const {
  Placement p;
  p.reserve(ffs_.size());
  for (const FlipFlop &f : ffs_) p.push_back(f.site);
  return p;
}

void FabricModel::apply_placement(const Placement &placement) {
  if (placement.size() != ffs_.size())
    throw ContractViolation("placement size does not match flip-flop count");
  std::set<FfSlot> seen;
  for (const FfSlot &s : placement) {
    if (!geometry_.contains(s))
      throw ScenarioError("placement slot outside grid");
    if (!seen.insert(s).second)
      throw ScenarioError("placement is not injective");
  }
  for (std::size_t i = 0; i < ffs_.size(); ++i) ffs_[i].site = placement[i];
  ++placement_version_;
}

PointUm FabricModel::ff_position(std::size_t ff_index) const {
  return geometry_.ff_position(ffs_.at(ff_index).site);
}

PointUm FabricModel::lut_position(std::size_t lut_index) const {
  const Lut &l = luts_.at(lut_index);
  return geometry_.lut_position(l.site, l.slot);
}

PointUm FabricModel::net_centroid(NetId id) const {
  const Net &n = nets_.at(id);
  if (n.centroid) return *n.centroid;
  switch (n.driver) {
    case DriverKind::kLut:
      return lut_position(n.driver_index);
    case DriverKind::kFlipFlop:
      return ff_position(n.driver_index);
    case DriverKind::kDelay:
      return geometry_.slice_center(delays_[n.driver_index].site);
    default:
      break;
  }
  // Off-fabric drivers: use the mean position of the sinks.
  double sx = 0.0, sy = 0.0;
  int count = 0;
  auto add = [&](PointUm p) {
    sx += p.x;
    sy += p.y;
    ++count;
  };
  for (std::size_t i = 0; i < luts_.size(); ++i)
    for (NetId in : luts_[i].inputs)
      if (in == id) add(lut_position(i));
  for (std::size_t i = 0; i < ffs_.size(); ++i) {
    const FlipFlop &f = ffs_[i];
    if (f.d == id || f.ce == id || f.rst == id) add(ff_position(i));
  }
  if (count == 0) return {0.0, 0.0};
  return {sx / count, sy / count};
}

std::optional<NetId> FabricModel::find_net(const std::string &name) const {
  if (auto it = net_index_.find(name); it != net_index_.end())
    return it->second;
  return std::nullopt;
}

std::optional<std::size_t> FabricModel::find_ff(const std::string &name) const {
  for (std::size_t i = 0; i < ffs_.size(); ++i)
    if (ffs_[i].name == name) return i;
  return std::nullopt;
}

double propagation_delay(const FabricModel &model, NetId net,
                         const thermal::ThermalField &field) {
  const Net &n = model.nets().at(net);
  return n.base_delay_ps * field.delay_factor_at(model.net_centroid(net));
}

}  // namespace probeguard::fabric
