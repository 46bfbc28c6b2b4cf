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

#include "probeguard/defense.hpp"

#include <algorithm>
#include <bit>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "probeguard/error.hpp"

namespace probeguard::defense {

using fabric::FfSlot;
using fabric::Placement;
using fabric::SliceCoord;

std::string to_string(Mode m) {
  switch (m) {
    case Mode::kNone:
      return "none";
    case Mode::kMtdInter:
      return "mtd_inter";
    case Mode::kMtdIntra:
      return "mtd_intra";
    case Mode::kPolymorphic:
      return "polymorphic";
    case Mode::kZeroize:
      return "zeroize";
  }
  return "?";
}

Mode parse_mode(const std::string &name) {
  for (Mode m : {Mode::kNone, Mode::kMtdInter, Mode::kMtdIntra,
                 Mode::kPolymorphic, Mode::kZeroize})
    if (to_string(m) == name) return m;
  throw ConfigError("unknown defense mode '" + name + "'");
}

void DefensePolicy::validate(const fabric::FabricModel &model,
                             std::optional<SliceCoord> sensor_site) const {
  const bool mtd = mode == Mode::kMtdInter || mode == Mode::kMtdIntra;
  if (mtd && !(pr_latency_us > 0.0))
    throw ConfigError("pr_latency_us must be positive for MTD modes");
  if (mode == Mode::kMtdInter) {
    if (allowed_region.empty())
      throw ConfigError("mtd_inter needs a non-empty allowed_region");
    for (const SliceCoord &c : allowed_region) {
      if (!model.geometry().contains(c))
        throw ConfigError("allowed_region slice outside the fabric");
      if (sensor_site && c == *sensor_site)
        throw ConfigError("allowed_region must not contain the sensor site");
    }
  }
  if (mode == Mode::kPolymorphic) {
    if (control_nets.empty())
      throw ConfigError("polymorphic mode needs at least one control net");
    for (const std::string &n : control_nets) {
      const auto id = model.find_net(n);
      if (!id || model.nets()[*id].driver != fabric::DriverKind::kInput)
        throw ConfigError("control net '" + n + "' is not a fabric input");
    }
  }
}

int DefensePolicy::region_slots(const fabric::FabricModel &model) const {
  switch (mode) {
    case Mode::kMtdInter: {
      const std::set<SliceCoord> unique(allowed_region.begin(),
                                        allowed_region.end());
      return static_cast<int>(unique.size()) * model.geometry().ffs_per_slice;
    }
    case Mode::kMtdIntra:
      return static_cast<int>(model.protected_ffs().size());
    default:
      return 0;
  }
}

// --- Permutation -----------------------------------------------------------------

Permutation::Permutation(std::vector<std::size_t> mapping)
    : map_(std::move(mapping)) {
  std::vector<bool> seen(map_.size(), false);
  for (std::size_t v : map_) {
    if (v >= map_.size() || seen[v])
      throw ContractViolation("permutation mapping is not a bijection");
    seen[v] = true;
  }
}

Permutation Permutation::identity(std::size_t n) {
  std::vector<std::size_t> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = i;
  return Permutation(std::move(m));
}

Permutation Permutation::inverse() const {
  std::vector<std::size_t> inv(map_.size());
  for (std::size_t i = 0; i < map_.size(); ++i) inv[map_[i]] = i;
  return Permutation(std::move(inv));
}

Permutation Permutation::compose(const Permutation &other) const {
  if (other.size() != size())
    throw ContractViolation("cannot compose permutations of different size");
  std::vector<std::size_t> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = map_[other.map_[i]];
  return Permutation(std::move(out));
}

bool Permutation::is_identity() const {
  for (std::size_t i = 0; i < map_.size(); ++i)
    if (map_[i] != i) return false;
  return true;
}

std::string Permutation::cycle_notation() const {
  std::ostringstream os;
  std::vector<bool> done(map_.size(), false);
  for (std::size_t start = 0; start < map_.size(); ++start) {
    if (done[start] || map_[start] == start) continue;
    os << '(';
    std::size_t i = start;
    bool first = true;
    while (!done[i]) {
      done[i] = true;
      os << (first ? "" : " ") << i;
      first = false;
      i = map_[i];
    }
    os << ')';
  }
  const std::string s = os.str();
  return s.empty() ? "()" : s;
}

Permutation permute_intra(std::size_t n, Rng &rng) {
  if (n == 0) throw ContractViolation("permute_intra needs n >= 1");
  std::vector<std::size_t> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = i;
  for (std::size_t i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(a[i], a[pick(rng)]);
  }
  return Permutation(std::move(a));
}

Placement apply_permutation(const Placement &placement,
                            const std::vector<std::size_t> &bits,
                            const Permutation &pi) {
  if (pi.size() != bits.size())
    throw ContractViolation("permutation size does not match bit count");
  Placement out = placement;
  for (std::size_t i = 0; i < bits.size(); ++i)
    out.at(bits[i]) = placement.at(bits[pi(i)]);
  return out;
}

Placement relocate_inter(const Placement &placement,
                         const std::vector<std::size_t> &bits,
                         const std::vector<SliceCoord> &allowed,
                         const fabric::Geometry &geometry, Rng &rng) {
  if (allowed.empty()) throw CapacityError("allowed_region is empty");
  const std::set<std::size_t> moving(bits.begin(), bits.end());
  std::set<FfSlot> taken;
  for (std::size_t i = 0; i < placement.size(); ++i)
    if (!moving.count(i)) taken.insert(placement[i]);

  // Unique slices in the order given, each with its free slots.
  std::vector<SliceCoord> slices;
  for (const SliceCoord &c : allowed)
    if (std::find(slices.begin(), slices.end(), c) == slices.end())
      slices.push_back(c);
  std::vector<std::vector<int>> free(slices.size());
  for (std::size_t s = 0; s < slices.size(); ++s)
    for (int slot = 0; slot < geometry.ffs_per_slice; ++slot)
      if (!taken.count(FfSlot{slices[s], slot})) free[s].push_back(slot);

  Placement out = placement;
  for (std::size_t bit : bits) {
    std::vector<std::size_t> open;
    for (std::size_t s = 0; s < slices.size(); ++s)
      if (!free[s].empty()) open.push_back(s);
    if (open.empty())
      throw CapacityError("allowed_region has too few free FF slots for " +
                          std::to_string(bits.size()) + " bits");
    std::uniform_int_distribution<std::size_t> pick_slice(0, open.size() - 1);
    const std::size_t s = open[pick_slice(rng)];
    std::uniform_int_distribution<std::size_t> pick_slot(0,
                                                         free[s].size() - 1);
    const std::size_t k = pick_slot(rng);
    out.at(bit) = FfSlot{slices[s], free[s][k]};
    free[s].erase(free[s].begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

std::uint64_t configure_polymorphic_lut(const std::vector<std::uint8_t> &f,
                                        const std::vector<std::uint8_t> &g) {
  if (f.size() != g.size())
    throw ContractViolation("polymorphic LUT halves differ in size");
  if (f.empty() || !std::has_single_bit(f.size()) || f.size() > 32)
    throw ContractViolation("polymorphic LUT halves must have 2^(k-1) entries"
                            " with k in 1..6");
  std::uint64_t init = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i]) init |= std::uint64_t{1} << i;
    if (g[i]) init |= std::uint64_t{1} << (i + f.size());
  }
  return init;
}

// --- runtime ---------------------------------------------------------------------

namespace {

std::string slot_text(const FfSlot &s) {
  std::ostringstream os;
  os << s.slice.x << ',' << s.slice.y << '/' << s.slot;
  return os.str();
}

std::string fmt_us(double us) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << us;
  return os.str();
}

std::string csv_field(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string placement_diff(const fabric::FabricModel &model,
                           const Placement &before, const Placement &after) {
  std::ostringstream os;
  bool first = true;
  for (std::size_t i = 0; i < before.size() && i < after.size(); ++i) {
    if (before[i] == after[i]) continue;
    os << (first ? "" : "; ") << model.ffs()[i].name << ' '
       << slot_text(before[i]) << "->" << slot_text(after[i]);
    first = false;
  }
  return first ? "unchanged" : os.str();
}

Defense::Defense(DefensePolicy policy)
    : policy_(std::move(policy)), rng_(policy_.rng_seed) {}

void Defense::start_pr(fabric::FabricModel &model, SimTime now, Placement next,
                       LogEntry entry) {
  ReconfigEvent ev;
  ev.fire_time = now;
  ev.completes_at = now + SimTime::from_us(policy_.pr_latency_us);
  ev.old_placement = model.placement();
  ev.new_placement = std::move(next);
  for (std::size_t i : model.protected_ffs()) {
    if (policy_.mid_pr == MidPr::kZero) model.set_ff_state(i, false);
    model.ff(i).hold = true;
  }
  entry.event_complete_us = ev.completes_at.us();
  entry.placement_diff = placement_diff(model, ev.old_placement,
                                        ev.new_placement);
  log_.push_back(std::move(entry));
  events_.push_back(ev);
  pending_ = std::move(ev);
}

void Defense::zeroize(fabric::FabricModel &model, LogEntry entry) {
  for (std::size_t i : model.protected_ffs()) model.ff(i).force_zero = true;
  log_.push_back(std::move(entry));
}

void Defense::on_trigger(fabric::FabricModel &model, SimTime now) {
  if (triggered_) return;
  triggered_ = true;
  LogEntry entry;
  entry.trigger_time_us = now.us();
  entry.mode = to_string(policy_.mode);
  const std::vector<std::size_t> bits = model.protected_ffs();
  switch (policy_.mode) {
    case Mode::kNone:
      log_.push_back(std::move(entry));
      return;
    case Mode::kMtdInter: {
      Placement next;
      try {
        next = relocate_inter(model.placement(), bits, policy_.allowed_region,
                              model.geometry(), rng_);
      } catch (const CapacityError &e) {
        entry.mode = "zeroize";
        entry.placement_diff = std::string("capacity fallback: ") + e.what();
        zeroize(model, std::move(entry));
        return;
      }
      start_pr(model, now, std::move(next), std::move(entry));
      return;
    }
    case Mode::kMtdIntra: {
      // One permutation per protected register.
      std::map<std::string, std::vector<std::size_t>> groups;
      for (std::size_t i : bits) groups[model.ffs()[i].reg].push_back(i);
      Placement next = model.placement();
      std::string perms;
      for (auto &[reg, members] : groups) {
        std::sort(members.begin(), members.end(),
                  [&](std::size_t a, std::size_t b) {
                    return model.ffs()[a].bit < model.ffs()[b].bit;
                  });
        const Permutation pi = permute_intra(members.size(), rng_);
        next = apply_permutation(next, members, pi);
        if (!perms.empty()) perms += "; ";
        if (groups.size() > 1) perms += (reg.empty() ? "-" : reg) + ":";
        perms += pi.cycle_notation();
      }
      entry.permutation = perms;
      start_pr(model, now, std::move(next), std::move(entry));
      return;
    }
    case Mode::kPolymorphic:
      for (const std::string &n : policy_.control_nets) {
        const auto id = model.find_net(n);
        if (!id) throw ScenarioError("control net '" + n + "' not found");
        model.set_input(*id, true);
      }
      entry.event_complete_us = now.us();
      log_.push_back(std::move(entry));
      return;
    case Mode::kZeroize:
      zeroize(model, std::move(entry));
      return;
  }
}

bool Defense::service(fabric::FabricModel &model, SimTime now) {
  if (!pending_ || pending_->completes_at > now) return false;
  model.apply_placement(pending_->new_placement);
  model.validate();
  for (std::size_t i : model.protected_ffs()) model.ff(i).hold = false;
  pending_.reset();
  return true;
}

std::optional<SimTime> Defense::next_event_time() const {
  if (pending_) return pending_->completes_at;
  return std::nullopt;
}

std::string Defense::log_csv() const {
  std::ostringstream os;
  os << "trigger_time_us,mode,event_complete_us,placement_diff,permutation\n";
  for (const LogEntry &e : log_) {
    os << fmt_us(e.trigger_time_us) << ',' << e.mode << ','
       << (e.event_complete_us ? fmt_us(*e.event_complete_us) : "") << ','
       << csv_field(e.placement_diff) << ',' << csv_field(e.permutation)
       << '\n';
  }
  return os.str();
}

}  // namespace probeguard::defense
