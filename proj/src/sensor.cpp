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

#include "probeguard/sensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "probeguard/error.hpp"

namespace probeguard::sensor {
namespace {

bool power_of_two(int m) {
  return m >= 1 && std::has_single_bit(static_cast<unsigned>(m));
}

double unit_uniform(Rng &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Rng keyed_stream(std::uint64_t seed, std::initializer_list<std::uint32_t> key) {
  std::vector<std::uint32_t> words = {static_cast<std::uint32_t>(seed),
                                      static_cast<std::uint32_t>(seed >> 32)};
  words.insert(words.end(), key.begin(), key.end());
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

}  // namespace

std::string to_string(const TuneValue &t) {
  std::ostringstream os;
  os << "data=" << t.data_delay << " clock=" << t.clock_delay
     << " select=" << t.lut_select;
  return os.str();
}

// --- chain encoding ----------------------------------------------------------

int chain_code_bits(int chain_length) {
  if (!power_of_two(chain_length))
    throw ContractViolation("chain length must be a power of two");
  return std::countr_zero(static_cast<unsigned>(chain_length)) + 5;
}

std::vector<int> chain_taps(std::uint32_t code, int chain_length) {
  const int bits = chain_code_bits(chain_length);
  if (code >> bits)
    throw ContractViolation("chain code " + std::to_string(code) +
                            " exceeds " + std::to_string(bits) + " bits");
  std::vector<int> taps(static_cast<std::size_t>(chain_length), 0);
  taps[0] = static_cast<int>(code & 31u);
  const std::uint32_t at_max = code >> 5;
  for (std::uint32_t i = 0; i < at_max; ++i)
    taps[i + 1] = fabric::DelayElement::kMaxTap;
  return taps;
}

double chain_delay(std::uint32_t code, int chain_length, double per_tap_ps,
                   double base_ps) {
  const std::vector<int> taps = chain_taps(code, chain_length);
  const fabric::DelayElement e(base_ps, per_tap_ps);
  double total = 0.0;
  for (int t : taps) total += e.delay_ps(t);
  return total;
}

double ro_calibration(std::uint32_t code, int chain_length, double per_tap_ps,
                      double base_ps, int stages, double stage_delay_ps) {
  if (stages < 1) throw ContractViolation("ring oscillator needs a stage");
  const double half =
      stages * stage_delay_ps + chain_delay(code, chain_length, per_tap_ps,
                                            base_ps);
  return 2.0 * half / 1000.0;
}

std::vector<RoPoint> ro_sweep(int chain_length, double per_tap_ps,
                              double base_ps, int stages,
                              double stage_delay_ps) {
  const std::uint32_t codes = 1u << chain_code_bits(chain_length);
  std::vector<RoPoint> out;
  out.reserve(codes);
  for (std::uint32_t c = 0; c < codes; ++c)
    out.push_back({c, ro_calibration(c, chain_length, per_tap_ps, base_ps,
                                     stages, stage_delay_ps)});
  return out;
}

// --- params / model ------------------------------------------------------------

std::uint32_t SensorParams::max_clock_code() const {
  return (1u << chain_code_bits(chain_length)) - 1u;
}

void SensorParams::validate() const {
  if (!(clock_mhz > 0.0)) throw ConfigError("sensor clock must be positive");
  if (!power_of_two(chain_length))
    throw ConfigError("sensor chain length must be a power of two");
  if (chain_length > 64) throw ConfigError("sensor chain length above 64");
  if (t_detect_cycles == 0) throw ConfigError("t_detect must be positive");
  if (!(t_sense_ms > 0.0)) throw ConfigError("t_sense must be positive");
  if (jitter_ps < 0.0) throw ConfigError("jitter must be non-negative");
  if (!(tap_ps > 0.0)) throw ConfigError("tap delay must be positive");
  if (lut_pin_ps.empty() ||
      lut_pin_ps.size() > static_cast<std::size_t>(fabric::kMaxLutArity))
    throw ConfigError("sensor LUT arity must be in 1..6");
  if (probe_batch == 0) throw ConfigError("probe batch must be positive");
  if (!(band_low > 0.0 && band_low < band_high && band_high <= 1.0))
    throw ConfigError("metastability band must satisfy 0 < low < high <= 1");
  if (threshold_sigmas < 0.0) throw ConfigError("threshold sigmas < 0");
  if (min_threshold > t_detect_cycles)
    throw ConfigError("minimum threshold exceeds t_detect");
  if (sense_budget_samples(t_sense_ms, clock_mhz) < t_detect_cycles)
    throw ConfigError("t_sense shorter than one t_detect window");
}

SensorModel::SensorModel(SensorParams params, std::uint64_t device_seed)
    : params_(std::move(params)) {
  params_.validate();
  Rng rng = keyed_stream(device_seed, {0x5e115e11u});
  std::normal_distribution<double> normal;
  auto element = [&] {
    const double per_tap = std::max(
        0.1 * params_.tap_ps,
        params_.tap_ps * (1.0 + params_.tap_mismatch_rel * normal(rng)));
    const double base = std::max(
        0.0, params_.element_base_ps + params_.base_mismatch_ps * normal(rng));
    return fabric::DelayElement(base, per_tap);
  };
  for (int i = 0; i < params_.chain_length; ++i) chain_.push_back(element());
  data_element_ = element();
}

void SensorModel::check(const TuneValue &t) const {
  if (t.data_delay > static_cast<std::uint32_t>(fabric::DelayElement::kMaxTap))
    throw ContractViolation("data delay code exceeds 5 bits");
  if (t.clock_delay > params_.max_clock_code())
    throw ContractViolation("clock delay code exceeds chain code width");
  if (t.lut_select >= static_cast<std::uint32_t>(params_.lut_arity()))
    throw ContractViolation("LUT select exceeds LUT arity");
}

double SensorModel::clock_arrival_ps(std::uint32_t clock_code,
                                     double factor) const {
  const std::vector<int> taps = chain_taps(clock_code, params_.chain_length);
  double total = params_.clock_route_ps * factor;
  for (std::size_t i = 0; i < taps.size(); ++i)
    total += chain_[i].delay_ps(taps[i]);
  return total;
}

double SensorModel::data_arrival_ps(std::uint32_t data_code,
                                    std::uint32_t lut_select,
                                    double factor) const {
  return data_element_.delay_ps(static_cast<int>(data_code)) +
         (params_.data_route_ps + params_.lut_pin_ps.at(lut_select)) * factor +
         params_.setup_ps;
}

double SensorModel::slack_ps(const TuneValue &t, double factor) const {
  check(t);
  return clock_arrival_ps(t.clock_delay, factor) -
         data_arrival_ps(t.data_delay, t.lut_select, factor);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double SensorModel::zero_probability(const TuneValue &t, double factor) const {
  const double slack = slack_ps(t, factor);
  if (params_.jitter_ps == 0.0)
    return slack > 0.0 ? 0.0 : (slack < 0.0 ? 1.0 : 0.5);
  return normal_cdf(-slack / params_.jitter_ps);
}

// --- counters and latch ----------------------------------------------------------

void draw_window(double p_zero, std::uint32_t length, Rng &rng,
                 std::vector<std::uint8_t> &out) {
  out.resize(length);
  for (std::uint32_t i = 0; i < length; ++i)
    out[i] = unit_uniform(rng) < p_zero ? 0 : 1;
}

SensorReadout read_counters(std::span<const std::uint8_t> samples) {
  SensorReadout r;
  r.window = static_cast<std::uint32_t>(samples.size());
  std::uint32_t run = 0;
  for (std::uint8_t s : samples) {
    if (s == 0) {
      ++r.zero_count;
      r.max_pulse_len = std::max(r.max_pulse_len, ++run);
    } else {
      run = 0;
    }
  }
  return r;
}

bool update_latch(bool &latch, const SensorReadout &readout,
                  std::uint32_t threshold) {
  if (threshold == 0 || threshold > readout.window)
    throw ContractViolation("latch threshold must be in (0, window]");
  latch = latch || readout.zero_count >= threshold;
  return latch;
}

// --- Sensor ------------------------------------------------------------------

Sensor::Sensor(fabric::SliceCoord site, SensorParams params,
               std::uint64_t device_seed)
    : site_(site), model_(std::move(params), device_seed) {}

void Sensor::set_tune(const TuneValue &t) {
  model_.check(t);
  tune_ = t;
}

void Sensor::set_threshold(std::uint32_t threshold) {
  if (threshold == 0 || threshold > params().t_detect_cycles)
    throw ContractViolation("latch threshold must be in (0, t_detect]");
  threshold_ = threshold;
}

double Sensor::zero_probability(const thermal::ThermalField &field) const {
  const double f =
      thermal::delay_factor(field.delta_t(site_), field.params().alpha_per_k);
  return model_.zero_probability(tune_, f);
}

bool Sensor::sample(const thermal::ThermalField &field, Rng &rng) const {
  return unit_uniform(rng) >= zero_probability(field);
}

SensorReadout Sensor::run_window(const thermal::ThermalField &field, Rng &rng) {
  return run_window_at(zero_probability(field), rng);
}

SensorReadout Sensor::run_window_at(double p_zero, Rng &rng) {
  draw_window(p_zero, params().t_detect_cycles, rng, window_);
  const SensorReadout r = read_counters(window_);
  if (threshold_ > 0) update_latch(latch_, r, threshold_);
  return r;
}

SensorResources Sensor::resources() const {
  return {1, params().chain_length + 1, 1};
}

void instantiate(fabric::FabricModel &model, const Sensor &sensor) {
  using namespace fabric;
  const SliceCoord site = sensor.site();
  const Geometry &g = model.geometry();
  if (!g.contains(site)) throw ScenarioError("sensor site outside grid");
  std::set<int> lut_used, ff_used;
  for (const Lut &l : model.luts())
    if (l.site == site) lut_used.insert(l.slot);
  for (const FlipFlop &f : model.ffs())
    if (f.site.slice == site) ff_used.insert(f.site.slot);
  auto free_slot = [](const std::set<int> &used, int n) {
    for (int s = 0; s < n; ++s)
      if (!used.count(s)) return s;
    return -1;
  };
  const int lut_slot = free_slot(lut_used, g.luts_per_slice);
  const int ff_slot = free_slot(ff_used, g.ffs_per_slice);
  if (lut_slot < 0 || ff_slot < 0)
    throw ScenarioError("sensor slice has no free LUT/FF slot");

  const SensorModel &m = sensor.model();
  const TuneValue t = sensor.tune();
  const NetId clk = model.add_input("sensor/clk");

  DelayCell data;
  data.name = "sensor/data_delay";
  data.element = m.data_element();
  data.element.set_tap(static_cast<int>(t.data_delay));
  data.input = clk;
  data.output = model.net("sensor/d");
  data.site = site;
  model.add_delay(data);

  const std::vector<int> taps =
      chain_taps(t.clock_delay, m.params().chain_length);
  NetId prev = clk;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    DelayCell c;
    c.name = "sensor/chain" + std::to_string(i);
    c.element = m.chain()[i];
    c.element.set_tap(taps[i]);
    c.input = prev;
    c.output = model.net("sensor/c" + std::to_string(i));
    c.site = site;
    prev = c.output;
    model.add_delay(c);
  }

  // Pass-through of the selected input; all inputs share the data net.
  Lut lut;
  lut.name = "sensor/lut";
  lut.arity = m.params().lut_arity();
  for (int i = 0; i < lut.arity; ++i) lut.inputs.push_back(data.output);
  for (unsigned idx = 0; idx < (1u << lut.arity); ++idx)
    if ((idx >> t.lut_select) & 1u) lut.init_bits |= std::uint64_t{1} << idx;
  lut.output = model.net("sensor/lut_out");
  lut.site = site;
  lut.slot = lut_slot;
  model.add_lut(lut);

  auto constant = [&](const char *name, bool v) {
    if (auto id = model.find_net(name)) return *id;
    return model.add_constant(name, v);
  };
  FlipFlop ff;
  ff.name = "sensor/ff";
  ff.d = lut.output;
  ff.q = model.net("sensor/q");
  ff.ce = constant("$1", true);
  ff.rst = constant("$0", false);
  ff.site = {site, ff_slot};
  model.add_ff(ff);
}

// --- tuning ----------------------------------------------------------------------

std::uint64_t sense_budget_samples(double t_sense_ms, double clock_mhz) {
  return static_cast<std::uint64_t>(std::llround(t_sense_ms * clock_mhz * 1e3));
}

TuneBench::TuneBench(const SensorModel &model, std::uint64_t seed,
                     double ambient_factor)
    : model_(model), seed_(seed), factor_(ambient_factor) {
  if (!(ambient_factor >= 1.0))
    throw ContractViolation("ambient delay factor must be >= 1");
}

Rng TuneBench::stream(const TuneValue &t, std::uint32_t tag) const {
  return keyed_stream(seed_, {t.data_delay, t.clock_delay, t.lut_select, tag});
}

double TuneBench::probe_rate(const TuneValue &t) const {
  const double p = model_.zero_probability(t, factor_);
  Rng rng = stream(t, 1);
  const std::uint64_t n = model_.params().probe_batch;
  std::binomial_distribution<std::uint64_t> draw(n, p);
  return static_cast<double>(draw(rng)) / static_cast<double>(n);
}

bool TuneBench::metastable(const TuneValue &t) const {
  const double r = probe_rate(t);
  return r >= model_.params().band_low && r <= model_.params().band_high;
}

Characterization TuneBench::characterize(const TuneValue &t) const {
  const SensorParams &p = model_.params();
  const double pz = model_.zero_probability(t, factor_);
  Rng rng = stream(t, 2);
  Characterization c;
  const std::uint32_t w = p.t_detect_cycles;
  c.windows = sense_budget_samples(p.t_sense_ms, p.clock_mhz) / w;
  double sum_sq = 0.0;
  auto add = [&](std::uint64_t count) {
    c.max_zero_count =
        std::max(c.max_zero_count, static_cast<std::uint32_t>(count));
    c.total_zero_count += count;
    sum_sq += static_cast<double>(count) * static_cast<double>(count);
  };
  if (pz <= 0.0) {
    // never a zero
  } else if (pz * w < 0.5 && pz < 1.0) {
    // Sparse: jump from zero to zero over the concatenated sample stream.
    std::geometric_distribution<std::uint64_t> gap(pz);
    const std::uint64_t total = c.windows * w;
    std::unordered_map<std::uint64_t, std::uint64_t> per_window;
    for (std::uint64_t pos = gap(rng); pos < total; pos += 1 + gap(rng))
      ++per_window[pos / w];
    for (const auto &[win, count] : per_window) add(count);
  } else {
    std::binomial_distribution<std::uint64_t> draw(w, pz);
    for (std::uint64_t i = 0; i < c.windows; ++i) add(draw(rng));
  }
  if (c.windows > 0) {
    const double n = static_cast<double>(c.windows);
    c.mean = static_cast<double>(c.total_zero_count) / n;
    c.stddev = std::sqrt(std::max(0.0, sum_sq / n - c.mean * c.mean));
  }
  return c;
}

bool better_tune(const TuneValue &a, const Characterization &ca,
                 const TuneValue &b, const Characterization &cb) {
  if (ca.max_zero_count != cb.max_zero_count)
    return ca.max_zero_count < cb.max_zero_count;
  if (ca.total_zero_count != cb.total_zero_count)
    return ca.total_zero_count < cb.total_zero_count;
  if (a.clock_delay != b.clock_delay) return a.clock_delay < b.clock_delay;
  if (a.data_delay != b.data_delay) return a.data_delay < b.data_delay;
  return a.lut_select < b.lut_select;
}

std::uint32_t derive_threshold(const Characterization &idle,
                               const SensorParams &params) {
  const double raw =
      std::ceil(idle.mean + params.threshold_sigmas * idle.stddev);
  std::uint32_t th = raw <= 0.0 ? 1u : static_cast<std::uint32_t>(raw);
  th = std::max({th, params.min_threshold, 1u});
  return std::min(th, params.t_detect_cycles);
}

namespace {

int explore_radius(const SensorModel &model) {
  const SensorParams &p = model.params();
  if (p.explore_radius >= 0) return p.explore_radius;
  double step = p.tap_ps;
  for (const auto &e : model.chain()) step = std::min(step, e.per_tap_ps());
  const auto [lo, hi] =
      std::minmax_element(p.lut_pin_ps.begin(), p.lut_pin_ps.end());
  // Widest select-to-select boundary offset plus the metastable band, in
  // codes, with slack for a segment boundary and route scaling.
  const double span = (*hi - *lo) * 1.05 + 6.0 * p.jitter_ps;
  return static_cast<int>(std::ceil(span / step)) + 2;
}

}  // namespace

TuneResult tune(const SensorModel &model, std::uint64_t seed,
                double ambient_factor) {
  const SensorParams &p = model.params();
  const TuneBench bench(model, seed, ambient_factor);
  const auto max_clock = static_cast<std::int64_t>(p.max_clock_code());
  const int radius = explore_radius(model);

  TuneResult result;
  std::optional<TuneValue> best;
  Characterization best_c;
  std::set<TuneValue> seen;
  for (std::uint32_t data = 0; data <= 31; ++data) {
    // Smallest clock code whose zero rate is at most band_high.
    std::int64_t lo = 0, hi = max_clock + 1;
    while (lo < hi) {
      const std::int64_t mid = lo + (hi - lo) / 2;
      ++result.probes;
      if (bench.probe_rate({data, static_cast<std::uint32_t>(mid), 0}) <=
          p.band_high)
        hi = mid;
      else
        lo = mid + 1;
    }
    const std::int64_t centre = std::min(lo, max_clock);
    for (std::int64_t c = std::max<std::int64_t>(0, centre - radius);
         c <= std::min(max_clock, centre + radius); ++c) {
      for (int sel = 0; sel < p.lut_arity(); ++sel) {
        const TuneValue t{data, static_cast<std::uint32_t>(c),
                          static_cast<std::uint32_t>(sel)};
        if (!seen.insert(t).second) continue;
        ++result.probes;
        if (!bench.metastable(t)) continue;
        const Characterization ch = bench.characterize(t);
        ++result.characterized;
        if (!best || better_tune(t, ch, *best, best_c)) {
          best = t;
          best_c = ch;
        }
      }
    }
  }
  if (!best) throw TuningFailure("no metastable tune value found");
  result.tune = *best;
  result.idle = best_c;
  result.threshold = derive_threshold(best_c, p);
  return result;
}

}  // namespace probeguard::sensor
