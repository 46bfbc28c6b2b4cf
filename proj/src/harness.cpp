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

#include "probeguard/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "probeguard/error.hpp"
#include "probeguard/netlist.hpp"

namespace probeguard::harness {

namespace {

// Stream tags: every consumer of randomness gets its own stream of the
// scenario seed.
enum : std::uint32_t {
  kTagDevice = 1,
  kTagTune = 2,
  kTagSim = 3,
  kTagDefense = 4,
  kTagAttack = 5,
  kTagStability = 6,
};

std::uint64_t derive(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), tag, 0x9a7du};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

bool starts_with(const std::string &s, const char *prefix) {
  return s.rfind(prefix, 0) == 0;
}

void write_file(const std::filesystem::path &p, const std::string &text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

void check_capacity(const fabric::FabricModel &model,
                    const defense::DefensePolicy &policy) {
  if (policy.mode != defense::Mode::kMtdInter) return;
  const auto prot = model.protected_ffs();
  const std::set<std::size_t> moving(prot.begin(), prot.end());
  const std::set<fabric::SliceCoord> region(policy.allowed_region.begin(),
                                            policy.allowed_region.end());
  int free = static_cast<int>(region.size()) * model.geometry().ffs_per_slice;
  for (std::size_t i = 0; i < model.ffs().size(); ++i)
    if (!moving.count(i) && region.count(model.ffs()[i].site.slice)) --free;
  if (free < static_cast<int>(prot.size()))
    throw CapacityError(fmt::format(
        "allowed_region has {} free FF slots for {} protected bits", free,
        prot.size()));
}

std::string opt_us(const std::optional<double> &v) {
  return v ? fmt::format("{:.3f}", *v) : "none";
}

}  // namespace

// --- resources ----------------------------------------------------------------------

ResourceReport report_resources(const fabric::FabricModel &model,
                                const defense::DefensePolicy &policy) {
  ResourceReport r;
  for (const auto &l : model.luts()) r.sensor_luts += starts_with(l.name, "sensor/");
  for (const auto &d : model.delays())
    r.sensor_delay_elements += starts_with(d.name, "sensor/");
  for (const auto &f : model.ffs()) r.sensor_ffs += starts_with(f.name, "sensor/");
  r.defense_slots = policy.region_slots(model);
  return r;
}

// --- stability -------------------------------------------------------------------------

std::string StabilityReport::to_csv() const {
  std::string out = "minute,windows,rolling_average,running_max\n";
  for (const auto &r : rows)
    out += fmt::format("{:.3f},{},{:.6f},{}\n", r.minute, r.windows, r.average,
                       r.running_max);
  return out;
}

StabilityReport stability_test(const sensor::SensorModel &model,
                               const sensor::TuneValue &tune,
                               std::uint32_t threshold,
                               const StabilityConfig &config, std::uint64_t seed) {
  const auto &params = model.params();
  const std::uint64_t w = params.t_detect_cycles;
  const double clock_hz = params.clock_mhz * 1e6;
  const auto cycles = static_cast<std::uint64_t>(std::llround(config.duration_min * 60.0 * clock_hz));
  const auto interval = static_cast<std::uint64_t>(std::llround(config.interval_s * clock_hz));
  const auto rolling = static_cast<std::uint64_t>(std::llround(config.rolling_s * clock_hz));
  if (w == 0 || interval == 0 || rolling == 0)
    throw ConfigError("stability: interval shorter than one clock cycle");

  StabilityReport rep;
  rep.duration_min = config.duration_min;
  rep.windows = cycles / w;
  rep.p_zero = model.zero_probability(tune, 1.0);

  const std::uint64_t n_intervals = (rep.windows * w + interval - 1) / interval;
  const std::uint64_t n_blocks = (rep.windows * w + rolling - 1) / rolling;
  std::vector<std::uint64_t> interval_sum(n_intervals, 0), block_sum(n_blocks, 0);
  std::vector<std::uint32_t> interval_max(n_intervals, 0);
  const auto minute_of = [&](std::uint64_t window_end_cycle) {
    return static_cast<double>(window_end_cycle) / clock_hz / 60.0;
  };

  const auto close_window = [&](std::uint64_t win, std::uint32_t count) {
    if (count == 0) return;
    const std::uint64_t start = win * w;
    rep.total_zero_count += count;
    interval_sum[start / interval] += count;
    block_sum[start / rolling] += count;
    auto &im = interval_max[start / interval];
    im = std::max(im, count);
    if (count > rep.max_zero_count) {
      rep.max_zero_count = count;
      rep.plateau_min = minute_of(start + w);
    }
    if (threshold > 0 && count >= threshold) {
      if (!rep.first_false_positive_min)
        rep.first_false_positive_min = minute_of(start + w);
      ++rep.false_positives;
    }
  };

  sensor::Rng rng(derive(seed, kTagStability));
  const double p = rep.p_zero;
  if (p > 0.0 && p * static_cast<double>(w) < 0.5) {
    std::geometric_distribution<std::uint64_t> gap(p);
    const std::uint64_t total = rep.windows * w;
    std::uint64_t pos = gap(rng);
    std::uint64_t cur = 0;
    std::uint32_t count = 0;
    while (pos < total) {
      const std::uint64_t win = pos / w;
      if (win != cur) {
        close_window(cur, count);
        cur = win;
        count = 0;
      }
      ++count;
      const std::uint64_t step = gap(rng);
      if (step >= total - pos) break;
      pos += step + 1;
    }
    close_window(cur, count);
  } else if (p > 0.0) {
    std::binomial_distribution<std::uint32_t> bin(static_cast<std::uint32_t>(w), p);
    for (std::uint64_t win = 0; win < rep.windows; ++win) close_window(win, bin(rng));
  }

  const auto windows_before = [&](std::uint64_t cycle) {
    return std::min(rep.windows, (cycle + w - 1) / w);
  };
  std::uint32_t running = 0;
  for (std::uint64_t k = 0; k < n_intervals; ++k) {
    const std::uint64_t nw =
        windows_before((k + 1) * interval) - windows_before(k * interval);
    running = std::max(running, interval_max[k]);
    StabilityRow row;
    row.minute = std::min(config.duration_min,
                          static_cast<double>((k + 1) * interval) / clock_hz / 60.0);
    row.windows = nw;
    row.average = nw ? static_cast<double>(interval_sum[k]) / nw : 0.0;
    row.running_max = running;
    rep.rows.push_back(row);
  }
  for (std::uint64_t b = 0; b < n_blocks; ++b) {
    const std::uint64_t nw =
        windows_before((b + 1) * rolling) - windows_before(b * rolling);
    if (nw)
      rep.max_rolling_average = std::max(
          rep.max_rolling_average, static_cast<double>(block_sum[b]) / nw);
  }
  return rep;
}

// --- commands ---------------------------------------------------------------------------

Command parse_command(const std::string &name) {
  if (name == "tune") return Command::kTune;
  if (name == "eofm") return Command::kEofm;
  if (name == "eop") return Command::kEop;
  if (name == "attack") return Command::kAttack;
  if (name == "stability") return Command::kStability;
  throw ConfigError("unknown command '" + name + "'");
}

std::string to_string(Command c) {
  switch (c) {
    case Command::kTune: return "tune";
    case Command::kEofm: return "eofm";
    case Command::kEop: return "eop";
    case Command::kAttack: return "attack";
    case Command::kStability: return "stability";
  }
  return "?";
}

std::string RunSummary::to_text() const {
  std::string s;
  auto line = [&](const std::string &k, const std::string &v) { s += k + ": " + v + "\n"; };
  line("scenario", scenario);
  line("command", command);
  line("seed", std::to_string(seed));
  line("clock_mhz", fmt::format("{:g}", clock_mhz));
  if (tune) {
    line("tune", sensor::to_string(tune->tune));
    line("idle_windows", std::to_string(tune->idle.windows));
    line("idle_mean_zero_count", fmt::format("{:.6f}", tune->idle.mean));
    line("idle_stddev_zero_count", fmt::format("{:.6f}", tune->idle.stddev));
    line("idle_max_zero_count", std::to_string(tune->idle.max_zero_count));
    line("tune_probes", std::to_string(tune->probes));
    line("tune_characterized", std::to_string(tune->characterized));
  } else {
    line("tune", "none");
  }
  line("threshold", std::to_string(threshold));
  line("defense_mode", defense::to_string(defense_mode));
  line("trigger_time_us", opt_us(trigger_time_us));
  if (trigger_pixel) line("trigger_pixel", std::to_string(*trigger_pixel));
  line("simulated_time_us", fmt::format("{:.3f}", simulated_time_us));
  if (reconfig_latency_us) line("reconfig_latency_us", opt_us(reconfig_latency_us));
  if (reconfig_within_dwell)
    line("reconfig_within_dwell", *reconfig_within_dwell ? "yes" : "no");
  if (scan) {
    line("scan_region_um", fmt::format("{:g},{:g},{:g},{:g}", scan->region.x0,
                                       scan->region.y0, scan->region.x1, scan->region.y1));
    line("scan_pixel_pitch_um", fmt::format("{:g}", scan->pixel_pitch_um));
    line("scan_dwell_ms", fmt::format("{:g}", scan->dwell_ms));
    line("scan_target_freq_mhz", fmt::format("{:g}", scan->target_freq_mhz));
    line("scan_bandwidth_khz", fmt::format("{:g}", scan->bandwidth_khz));
    line("scan_laser_power", fmt::format("{:g}", scan->laser_power));
    line("scan_noise_sigma", fmt::format("{:g}", scan->noise_sigma));
  }
  if (pixels) {
    line("scan_pixels", std::to_string(*pixels));
    line("scan_start_us", fmt::format("{:.3f}", scan_start_us));
  }
  if (!localized.empty() || pixels) {
    std::string sites;
    for (const auto &c : localized) sites += fmt::format("{}({},{})", sites.empty() ? "" : " ", c.x, c.y);
    line("localized_sites", sites.empty() ? "none" : sites);
  }
  if (bits_total) {
    line("key_expected", key_expected);
    line("key_recovered", key_recovered);
    line("bits_recovered", fmt::format("{}/{}", bits_correct, bits_total));
    line("bit_accuracy", fmt::format("{:.3f}", accuracy()));
  }
  if (!function_table.empty()) {
    std::string t;
    for (const auto &r : function_table)
      t += fmt::format("{}{},{}->{}", t.empty() ? "" : " ", r.a, r.b, r.out);
    line("function_table", t);
    if (function_is_xor) line("function_is_xor", *function_is_xor ? "yes" : "no");
  }
  line("counter_windows", std::to_string(counters.windows));
  line("counter_total_zero_count", std::to_string(counters.total_zero_count));
  line("counter_max_zero_count", std::to_string(counters.max_zero_count));
  line("resources_sensor_luts", std::to_string(resources.sensor_luts));
  line("resources_sensor_delay_elements", std::to_string(resources.sensor_delay_elements));
  line("resources_sensor_ffs", std::to_string(resources.sensor_ffs));
  line("resources_defense_slots", std::to_string(resources.defense_slots));
  if (stability) {
    line("stability_duration_min", fmt::format("{:g}", stability->duration_min));
    line("stability_windows", std::to_string(stability->windows));
    line("stability_p_zero", fmt::format("{:.6e}", stability->p_zero));
    line("stability_total_zero_count", std::to_string(stability->total_zero_count));
    line("stability_max_zero_count", std::to_string(stability->max_zero_count));
    line("stability_max_rolling_average", fmt::format("{:.6f}", stability->max_rolling_average));
    line("stability_plateau_min", fmt::format("{:.3f}", stability->plateau_min));
    line("stability_false_positives", std::to_string(stability->false_positives));
  }
  return s;
}

// --- pipeline ---------------------------------------------------------------------------

RunResult run(const Scenario &sc, Command command) {
  RunResult res;
  RunSummary &sum = res.summary;
  sum.scenario = sc.name;
  sum.command = to_string(command);
  sum.seed = sc.seed;
  sum.clock_mhz = sc.clock_mhz;
  sum.defense_mode = sc.defense.mode;

  fabric::FabricModel model = fabric::parse_netlist(sc.netlist_text);
  std::unique_ptr<sensor::Sensor> sensor;
  std::optional<fabric::SliceCoord> site;
  if (sc.sensor) {
    if (sc.sensor->params.clock_mhz != sc.clock_mhz)
      throw ConfigError("sensor clock differs from the fabric clock");
    site = sc.sensor->site;
    sensor = std::make_unique<sensor::Sensor>(sc.sensor->site, sc.sensor->params,
                                              derive(sc.seed, kTagDevice));
    sensor::instantiate(model, *sensor);
    model.finalize();
    sum.tune = sensor::tune(sensor->model(), derive(sc.seed, kTagTune));
    sensor->set_tune(sum.tune->tune);
    sum.threshold = sc.defense.threshold > 0 ? sc.defense.threshold : sum.tune->threshold;
    sensor->set_threshold(sum.threshold);
  } else if (command == Command::kTune || command == Command::kStability) {
    throw ConfigError("scenario '" + sc.name + "' has no sensor");
  }
  sc.defense.validate(model, site);
  check_capacity(model, sc.defense);
  sum.resources = report_resources(model, sc.defense);

  if (command == Command::kTune) return res;
  if (command == Command::kStability) {
    sensor::SensorParams p = sc.sensor->params;
    if (sc.stability.jitter_ps) p.jitter_ps = *sc.stability.jitter_ps;
    const sensor::SensorModel idle(p, derive(sc.seed, kTagDevice));
    sum.stability = stability_test(idle, sum.tune->tune, sum.threshold, sc.stability, sc.seed);
    sum.simulated_time_us = sc.stability.duration_min * 60e6;
    return res;
  }

  defense::DefensePolicy policy = sc.defense;
  policy.rng_seed = derive(sc.seed, kTagDefense);
  defense::Defense defense(policy);
  sim::CoSim cs(model, sc.thermal, sc.clock_mhz, sensor.get(), &defense,
                derive(sc.seed, kTagSim));
  cs.set_record_windows(sensor != nullptr);
  cs.set_stimulus(sc.stimulus);
  attacker::Rng rng(derive(sc.seed, kTagAttack));

  AttackKind kind = AttackKind::kNone;
  if (command == Command::kEop) kind = AttackKind::kEop;
  else if (command == Command::kAttack) kind = sc.attack;
  else if (sc.attack == AttackKind::kKey) kind = AttackKind::kKey;
  if (command == Command::kEop && sc.attack != AttackKind::kEop)
    throw ConfigError("scenario '" + sc.name + "' has no eop attack section");

  std::optional<std::uint64_t> dwell;
  std::uint64_t scan_start = cs.now_cycles();
  if (kind == AttackKind::kEop) {
    std::vector<std::pair<std::string, fabric::PointUm>> probes;
    for (const auto &name : sc.eop.target_ffs) {
      const auto ff = model.find_ff(name);
      if (!ff) throw ScenarioError("eop target_ff '" + name + "' not found");
      probes.emplace_back(name, model.ff_position(*ff));
    }
    if (probes.empty()) probes.emplace_back("probe", sc.eop.config.point);
    for (const auto &[name, point] : probes) {
      attacker::EopConfig cfg = sc.eop.config;
      cfg.point = point;
      res.traces.emplace_back(name, attacker::eop_probe(cs, cfg, rng));
    }
  } else if (kind == AttackKind::kFunction) {
    sum.scan = sc.scan;
    dwell = sc.scan.dwell_cycles(sc.clock_mhz);
    std::vector<fabric::PointUm> out_sites;
    for (std::size_t i : model.register_bits(sc.function.output_reg))
      out_sites.push_back(model.ff_position(i));
    if (out_sites.empty())
      throw ScenarioError("output register '" + sc.function.output_reg + "' not found");
    auto rec = attacker::recover_function(cs, sc.scan, sc.function.a_nets,
                                          sc.function.b_nets, out_sites,
                                          sc.function.vectors, sc.threshold(), rng);
    sum.function_table = rec.rows;
    bool is_xor = true;
    for (const auto &r : rec.rows) {
      std::string want;
      for (std::size_t i = 0; i < r.a.size(); ++i) want += r.a[i] != r.b[i] ? '1' : '0';
      is_xor = is_xor && want == r.out;
    }
    sum.function_is_xor = is_xor;
    sum.pixels = static_cast<std::size_t>(sc.scan.nx() * sc.scan.ny()) * rec.rows.size();
    res.function_images = std::move(rec.images);
    if (!res.function_images.empty()) res.image = res.function_images.front();
  } else {
    sum.scan = sc.scan;
    dwell = sc.scan.dwell_cycles(sc.clock_mhz);
    std::vector<fabric::PointUm> sites;
    if (kind == AttackKind::kKey) {
      const auto bits = model.register_bits(sc.key.reg);
      if (bits.size() != sc.key.expected.size())
        throw ConfigError(fmt::format("key '{}' has {} bits but expected has {}",
                                      sc.key.reg, bits.size(), sc.key.expected.size()));
      for (std::size_t i : bits) sites.push_back(model.ff_position(i));
    }
    res.image = attacker::eofm_scan(cs, sc.scan, rng);
    sum.pixels = static_cast<std::size_t>(sc.scan.nx() * sc.scan.ny());
    sum.localized = attacker::localize(*res.image, sc.threshold(), model.geometry());
    if (kind == AttackKind::kKey) {
      const auto got = attacker::recover_bits(*res.image, sites, sc.threshold());
      sum.key_expected = sc.key.expected;
      for (std::size_t i = 0; i < got.size(); ++i) {
        sum.key_recovered += got[i] ? '1' : '0';
        sum.bits_correct += sum.key_recovered[i] == sc.key.expected[i];
      }
      sum.bits_total = static_cast<int>(got.size());
    }
  }

  sum.scan_start_us = cs.time_of(scan_start).us();
  if (auto t = cs.trigger_cycle()) {
    sum.trigger_time_us = cs.time_of(*t).us();
    if (dwell && *t >= scan_start) sum.trigger_pixel = (*t - scan_start) / *dwell;
  }
  if (!defense.events().empty()) {
    const auto &ev = defense.events().front();
    sum.reconfig_latency_us = (ev.completes_at - ev.fire_time).us();
    if (dwell)
      sum.reconfig_within_dwell =
          ev.completes_at - ev.fire_time <= cs.time_of(*dwell) && ev.completes_at <= cs.now();
  }
  sum.simulated_time_us = cs.now().us();
  sum.counters = cs.counter_stats();
  res.windows = cs.windows();
  res.defense_log_csv = defense.log_csv();
  return res;
}

std::string counters_csv(const std::vector<sim::WindowRecord> &windows) {
  std::string out = "window,zero_count,max_pulse,latched\n";
  for (const auto &w : windows)
    out += fmt::format("{},{},{},{}\n", w.index, w.zero_count, w.max_pulse, w.latched ? 1 : 0);
  return out;
}

std::string traces_csv(
    const std::vector<std::pair<std::string, attacker::EopTrace>> &traces) {
  if (traces.empty()) return "time_ps\n";
  const auto &base = traces.front().second;
  for (const auto &[name, t] : traces)
    if (t.values.size() != base.values.size() || t.resolution_ps != base.resolution_ps)
      throw ContractViolation("traces_csv: traces differ in time base");
  std::string out = "time_ps";
  for (const auto &[name, t] : traces) out += "," + name;
  out += '\n';
  for (std::size_t s = 0; s < base.values.size(); ++s) {
    out += std::to_string(std::llround(static_cast<double>(s) * base.resolution_ps));
    for (const auto &[name, t] : traces) out += fmt::format(",{:.6f}", t.values[s]);
    out += '\n';
  }
  return out;
}

void write_artifacts(const RunResult &r, const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "summary.txt", r.summary.to_text());
  if (r.image) {
    write_file(dir / "image.pgm", r.image->to_pgm(attacker::unit_amplitude()));
    write_file(dir / "image.csv", r.image->to_csv());
  }
  for (std::size_t k = 0; k < r.function_images.size(); ++k)
    write_file(dir / fmt::format("image_{}.pgm", k),
               r.function_images[k].to_pgm(attacker::unit_amplitude()));
  if (!r.traces.empty()) write_file(dir / "trace.csv", traces_csv(r.traces));
  if (r.summary.stability)
    write_file(dir / "counters.csv", r.summary.stability->to_csv());
  else if (!r.windows.empty() || r.summary.tune)
    write_file(dir / "counters.csv", counters_csv(r.windows));
  if (r.summary.command != "tune" && r.summary.command != "stability")
    write_file(dir / "defense_log.csv", r.defense_log_csv);
}

std::vector<BatchOutcome> run_batch(const std::vector<BatchJob> &jobs, int threads) {
  std::vector<BatchOutcome> out(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const BatchJob &job = jobs[i];
      BatchOutcome &o = out[i];
      o.name = job.scenario.name;
      o.out_dir = job.out_dir;
      try {
        const RunResult r = run(job.scenario, job.command);
        write_artifacts(r, job.out_dir);
        if (r.summary.stability && r.summary.stability->false_positives) {
          o.exit_code = static_cast<int>(ExitCode::kStability);
          o.message = "trigger during idle run";
        }
      } catch (const Error &e) {
        o.exit_code = static_cast<int>(e.code());
        o.message = e.what();
      } catch (const std::exception &e) {
        o.exit_code = static_cast<int>(ExitCode::kInternal);
        o.message = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto &t : pool) t.join();
  return out;
}

}  // namespace probeguard::harness
