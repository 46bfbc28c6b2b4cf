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

// Scenario files are YAML. Every quantity with a unit carries it in its key
// (dwell_ms, pr_latency_us, ...); unknown keys are rejected so a misspelt
// unit cannot silently fall back to a default.

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "probeguard/error.hpp"
#include "probeguard/harness.hpp"

namespace probeguard::harness {

namespace {

std::string where(const YAML::Node &n, const std::string &path) {
  const YAML::Mark m = n.Mark();
  return m.line >= 0 ? path + " (line " + std::to_string(m.line + 1) + ")" : path;
}

void expect_map(const YAML::Node &n, const std::string &path) {
  if (!n.IsMap()) throw ConfigError(where(n, path) + ": expected a mapping");
}

void check_keys(const YAML::Node &n, const std::string &path,
                const std::set<std::string> &allowed) {
  expect_map(n, path);
  for (const auto &kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key))
      throw ConfigError(where(kv.first, path) + ": unknown key '" + key + "'");
  }
}

template <typename T>
T as(const YAML::Node &n, const std::string &path) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception &) {
    throw ConfigError(where(n, path) + ": wrong value type");
  }
}

template <typename T>
void read(const YAML::Node &parent, const char *key, const std::string &path,
          T &out) {
  if (const YAML::Node n = parent[key]) out = as<T>(n, path + "." + key);
}

fabric::SliceCoord read_coord(const YAML::Node &n, const std::string &path) {
  if (!n.IsSequence() || n.size() != 2)
    throw ConfigError(where(n, path) + ": expected [x, y]");
  return {as<int>(n[0], path), as<int>(n[1], path)};
}

fabric::PointUm read_point(const YAML::Node &n, const std::string &path) {
  if (!n.IsSequence() || n.size() != 2)
    throw ConfigError(where(n, path) + ": expected [x_um, y_um]");
  return {as<double>(n[0], path), as<double>(n[1], path)};
}

std::vector<std::string> read_strings(const YAML::Node &n, const std::string &path) {
  if (!n.IsSequence()) throw ConfigError(where(n, path) + ": expected a list");
  std::vector<std::string> out;
  for (const auto &e : n) out.push_back(as<std::string>(e, path));
  return out;
}

void parse_thermal(const YAML::Node &n, thermal::ThermalParams &t) {
  check_keys(n, "thermal", {"tau_us", "alpha_per_k", "heating_gain_k_per_us"});
  read(n, "tau_us", "thermal", t.tau_us);
  read(n, "alpha_per_k", "thermal", t.alpha_per_k);
  read(n, "heating_gain_k_per_us", "thermal", t.heating_gain_k_per_us);
}

SensorConfig parse_sensor(const YAML::Node &n, double clock_mhz) {
  const std::string p = "sensor";
  check_keys(n, p,
             {"site", "chain_length", "t_sense_ms", "t_detect_cycles", "jitter_ps",
              "tap_ps", "element_base_ps", "tap_mismatch_rel", "base_mismatch_ps",
              "data_route_ps", "clock_route_ps", "lut_pin_ps", "setup_ps",
              "probe_batch", "band_low", "band_high", "explore_radius",
              "threshold_sigmas", "min_threshold"});
  if (!n["site"]) throw ConfigError(where(n, p) + ": missing 'site'");
  SensorConfig c;
  c.site = read_coord(n["site"], p + ".site");
  auto &s = c.params;
  s.clock_mhz = clock_mhz;
  read(n, "chain_length", p, s.chain_length);
  read(n, "t_sense_ms", p, s.t_sense_ms);
  read(n, "t_detect_cycles", p, s.t_detect_cycles);
  read(n, "jitter_ps", p, s.jitter_ps);
  read(n, "tap_ps", p, s.tap_ps);
  read(n, "element_base_ps", p, s.element_base_ps);
  read(n, "tap_mismatch_rel", p, s.tap_mismatch_rel);
  read(n, "base_mismatch_ps", p, s.base_mismatch_ps);
  read(n, "data_route_ps", p, s.data_route_ps);
  read(n, "clock_route_ps", p, s.clock_route_ps);
  read(n, "lut_pin_ps", p, s.lut_pin_ps);
  read(n, "setup_ps", p, s.setup_ps);
  read(n, "probe_batch", p, s.probe_batch);
  read(n, "band_low", p, s.band_low);
  read(n, "band_high", p, s.band_high);
  read(n, "explore_radius", p, s.explore_radius);
  read(n, "threshold_sigmas", p, s.threshold_sigmas);
  read(n, "min_threshold", p, s.min_threshold);
  try {
    s.validate();
  } catch (const ContractViolation &e) {
    throw ConfigError(std::string("sensor: ") + e.what());
  }
  return c;
}

void parse_defense(const YAML::Node &n, defense::DefensePolicy &d) {
  const std::string p = "defense";
  check_keys(n, p,
             {"mode", "pr_latency_us", "allowed_region", "threshold", "mid_pr",
              "control_nets"});
  if (const auto m = n["mode"]) d.mode = defense::parse_mode(as<std::string>(m, p));
  read(n, "pr_latency_us", p, d.pr_latency_us);
  read(n, "threshold", p, d.threshold);
  if (const auto m = n["mid_pr"]) {
    const auto v = as<std::string>(m, p + ".mid_pr");
    if (v == "hold") d.mid_pr = defense::MidPr::kHold;
    else if (v == "zero") d.mid_pr = defense::MidPr::kZero;
    else throw ConfigError(where(m, p) + ": mid_pr must be hold or zero");
  }
  if (const auto c = n["control_nets"]) d.control_nets = read_strings(c, p + ".control_nets");
  if (const auto r = n["allowed_region"]) {
    // Inclusive slice rectangle.
    check_keys(r, p + ".allowed_region", {"x0", "y0", "x1", "y1"});
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
    read(r, "x0", p, x0);
    read(r, "y0", p, y0);
    read(r, "x1", p, x1);
    read(r, "y1", p, y1);
    d.allowed_region.clear();
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) d.allowed_region.push_back({x, y});
  }
}

void parse_stimulus(const YAML::Node &n, double clock_mhz, sim::Stimulus &st) {
  const std::string p = "stimulus";
  check_keys(n, p, {"constants", "square", "pattern"});
  if (const auto c = n["constants"]) {
    expect_map(c, p + ".constants");
    for (const auto &kv : c)
      st.constants[kv.first.as<std::string>()] = as<int>(kv.second, p + ".constants") != 0;
  }
  if (const auto sq = n["square"]) {
    if (!sq.IsSequence()) throw ConfigError(where(sq, p) + ": square must be a list");
    for (const auto &e : sq) {
      check_keys(e, p + ".square", {"net", "freq_mhz", "start_high"});
      sim::Stimulus::Square s;
      double f = 0.0;
      read(e, "net", p, s.net);
      read(e, "freq_mhz", p, f);
      read(e, "start_high", p, s.start_high);
      s.half_period_cycles = sim::half_period_cycles(f, clock_mhz);
      st.squares.push_back(s);
    }
  }
  if (const auto pt = n["pattern"]) {
    if (!pt.IsSequence()) throw ConfigError(where(pt, p) + ": pattern must be a list");
    for (const auto &e : pt) {
      check_keys(e, p + ".pattern", {"net", "bits", "cycles_per_bit", "repeat"});
      sim::Stimulus::Pattern s;
      read(e, "net", p, s.net);
      read(e, "bits", p, s.bits);
      read(e, "cycles_per_bit", p, s.cycles_per_bit);
      read(e, "repeat", p, s.repeat);
      st.patterns.push_back(s);
    }
  }
}

void parse_scan(const YAML::Node &n, attacker::ScanConfig &s) {
  const std::string p = "scan";
  check_keys(n, p,
             {"region_um", "pixel_pitch_um", "dwell_ms", "target_freq_mhz",
              "bandwidth_khz", "laser_power", "spot_sigma_um", "noise_sigma"});
  if (const auto r = n["region_um"]) {
    check_keys(r, p + ".region_um", {"x0", "y0", "x1", "y1"});
    read(r, "x0", p, s.region.x0);
    read(r, "y0", p, s.region.y0);
    read(r, "x1", p, s.region.x1);
    read(r, "y1", p, s.region.y1);
  }
  read(n, "pixel_pitch_um", p, s.pixel_pitch_um);
  read(n, "dwell_ms", p, s.dwell_ms);
  read(n, "target_freq_mhz", p, s.target_freq_mhz);
  read(n, "bandwidth_khz", p, s.bandwidth_khz);
  read(n, "laser_power", p, s.laser_power);
  read(n, "spot_sigma_um", p, s.spot_sigma_um);
  read(n, "noise_sigma", p, s.noise_sigma);
}

void parse_attack(const YAML::Node &n, Scenario &sc) {
  const std::string p = "attack";
  check_keys(n, p,
             {"kind", "register", "expected", "read_threshold", "a_nets", "b_nets",
              "output_register", "vectors", "target_ff", "point_um", "duration_ns",
              "resolution_ps", "iterations", "noise_sigma", "capture_radius_um"});
  std::string kind = "none";
  read(n, "kind", p, kind);
  read(n, "read_threshold", p, sc.read_threshold);
  if (kind == "none") {
    sc.attack = AttackKind::kNone;
  } else if (kind == "key") {
    sc.attack = AttackKind::kKey;
    read(n, "register", p, sc.key.reg);
    read(n, "expected", p, sc.key.expected);
    if (sc.key.expected.empty() ||
        sc.key.expected.find_first_not_of("01") != std::string::npos)
      throw ConfigError(where(n, p) + ": expected must be a non-empty 0/1 string");
  } else if (kind == "function") {
    sc.attack = AttackKind::kFunction;
    auto &f = sc.function;
    if (const auto a = n["a_nets"]) f.a_nets = read_strings(a, p + ".a_nets");
    if (const auto b = n["b_nets"]) f.b_nets = read_strings(b, p + ".b_nets");
    read(n, "output_register", p, f.output_reg);
    if (const auto v = n["vectors"]) {
      if (!v.IsSequence()) throw ConfigError(where(v, p) + ": vectors must be a list");
      for (const auto &e : v) {
        const auto pair = read_strings(e, p + ".vectors");
        if (pair.size() != 2) throw ConfigError(where(e, p) + ": vector must be [a, b]");
        f.vectors.emplace_back(pair[0], pair[1]);
      }
    }
    if (f.a_nets.empty() || f.a_nets.size() != f.b_nets.size() || f.vectors.empty())
      throw ConfigError(where(n, p) + ": function attack needs a_nets, b_nets and vectors");
  } else if (kind == "eop") {
    sc.attack = AttackKind::kEop;
    auto &e = sc.eop;
    if (const auto t = n["target_ff"]) {
      if (t.IsSequence()) e.target_ffs = read_strings(t, p + ".target_ff");
      else e.target_ffs.push_back(as<std::string>(t, p + ".target_ff"));
    }
    if (const auto pt = n["point_um"]) e.config.point = read_point(pt, p + ".point_um");
    else if (e.target_ffs.empty())
      throw ConfigError(where(n, p) + ": eop attack needs target_ff or point_um");
    read(n, "duration_ns", p, e.config.duration_ns);
    read(n, "resolution_ps", p, e.config.resolution_ps);
    read(n, "iterations", p, e.config.iterations);
    read(n, "noise_sigma", p, e.config.noise_sigma);
    read(n, "capture_radius_um", p, e.config.capture_radius_um);
  } else {
    throw ConfigError(where(n, p) + ": unknown attack kind '" + kind + "'");
  }
}

void parse_stability(const YAML::Node &n, StabilityConfig &s) {
  const std::string p = "stability";
  check_keys(n, p,
             {"duration_min", "interval_s", "rolling_s", "plateau_limit_min",
              "jitter_ps"});
  read(n, "duration_min", p, s.duration_min);
  read(n, "interval_s", p, s.interval_s);
  read(n, "rolling_s", p, s.rolling_s);
  read(n, "plateau_limit_min", p, s.plateau_limit_min);
  if (const auto j = n["jitter_ps"]) s.jitter_ps = as<double>(j, p + ".jitter_ps");
  if (!(s.duration_min > 0.0) || !(s.interval_s > 0.0) || !(s.rolling_s > 0.0))
    throw ConfigError("stability: durations must be positive");
}

}  // namespace

double Scenario::threshold() const {
  return read_threshold > 0.0 ? read_threshold : attacker::default_threshold();
}

Scenario parse_scenario(const std::string &yaml_text,
                        const std::filesystem::path &base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception &e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  check_keys(root, "scenario",
             {"name", "seed", "netlist", "clock_mhz", "thermal", "sensor", "defense",
              "stimulus", "scan", "attack", "stability"});
  Scenario sc;
  read(root, "name", "scenario", sc.name);
  read(root, "seed", "scenario", sc.seed);
  read(root, "clock_mhz", "scenario", sc.clock_mhz);
  if (!(sc.clock_mhz > 0.0)) throw ConfigError("scenario: clock_mhz must be > 0");

  std::string netlist;
  read(root, "netlist", "scenario", netlist);
  if (netlist.empty()) throw ConfigError("scenario: missing 'netlist'");
  const std::filesystem::path np = base_dir / netlist;
  std::ifstream in(np);
  if (!in) throw ConfigError("scenario: cannot read netlist " + np.string());
  std::ostringstream text;
  text << in.rdbuf();
  sc.netlist_text = text.str();

  if (const auto n = root["thermal"]) parse_thermal(n, sc.thermal);
  if (const auto n = root["sensor"]) sc.sensor = parse_sensor(n, sc.clock_mhz);
  if (const auto n = root["defense"]) parse_defense(n, sc.defense);
  if (const auto n = root["stimulus"]) parse_stimulus(n, sc.clock_mhz, sc.stimulus);
  if (const auto n = root["scan"]) parse_scan(n, sc.scan);
  if (const auto n = root["attack"]) parse_attack(n, sc);
  if (const auto n = root["stability"]) parse_stability(n, sc.stability);
  return sc;
}

Scenario load_scenario(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  Scenario sc = parse_scenario(text.str(), path.parent_path());
  if (sc.name.empty()) sc.name = path.stem().string();
  return sc;
}

}  // namespace probeguard::harness
