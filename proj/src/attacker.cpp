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

#include "probeguard/attacker.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "probeguard/error.hpp"

namespace probeguard::attacker {

namespace {

int pixel_count(double lo, double hi, double pitch) {
  return std::max(1, static_cast<int>(std::ceil((hi - lo) / pitch - 1e-9)));
}

std::uint64_t whole_cycles(double cycles, const char *what) {
  const double r = std::round(cycles);
  if (r < 1.0 || std::abs(cycles - r) > 1e-6)
    throw ConfigError(std::string(what) + " is not a whole number of clock cycles");
  return static_cast<std::uint64_t>(r);
}

thermal::LaserSpot spot_at(PointUm p, double power, double sigma) {
  thermal::LaserSpot s;
  s.center = p;
  s.power = power;
  s.sigma_um = sigma;
  s.enabled = true;
  return s;
}

}  // namespace

// --- ScanConfig --------------------------------------------------------------

int ScanConfig::nx() const {
  return pixel_count(region.x0, region.x1, pixel_pitch_um);
}
int ScanConfig::ny() const {
  return pixel_count(region.y0, region.y1, pixel_pitch_um);
}

void ScanConfig::validate(const fabric::Geometry &geometry) const {
  if (!(dwell_ms > 0.0)) throw ConfigError("scan: dwell_ms must be > 0");
  if (!(pixel_pitch_um > 0.0)) throw ConfigError("scan: pixel_pitch_um must be > 0");
  if (!(target_freq_mhz > 0.0)) throw ConfigError("scan: target_freq_mhz must be > 0");
  if (laser_power < 0.0) throw ConfigError("scan: laser_power must be >= 0");
  if (!(spot_sigma_um > 0.0)) throw ConfigError("scan: spot_sigma_um must be > 0");
  if (noise_sigma < 0.0) throw ConfigError("scan: noise_sigma must be >= 0");
  if (!(region.x1 > region.x0) || !(region.y1 > region.y0) || region.x0 < 0.0 ||
      region.y0 < 0.0 || region.x1 > geometry.width_um() ||
      region.y1 > geometry.height_um())
    throw ScenarioError(fmt::format(
        "scan region [{}, {}] x [{}, {}] um is not inside the {} x {} um fabric",
        region.x0, region.x1, region.y0, region.y1, geometry.width_um(),
        geometry.height_um()));
}

std::uint64_t ScanConfig::dwell_cycles(double clock_mhz) const {
  return whole_cycles(dwell_ms * 1e3 * clock_mhz, "scan dwell");
}

// --- EofmImage ---------------------------------------------------------------

EofmImage::EofmImage(int nx, int ny, PointUm origin, double pitch_um)
    : nx_(nx), ny_(ny), origin_(origin), pitch_(pitch_um) {
  if (nx <= 0 || ny <= 0 || !(pitch_um > 0.0))
    throw ContractViolation("EofmImage: empty grid or non-positive pitch");
  amp_.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), 0.0);
}

PointUm EofmImage::pixel_center(int i, int j) const {
  return {origin_.x + (i + 0.5) * pitch_, origin_.y + (j + 0.5) * pitch_};
}

double EofmImage::at(int i, int j) const {
  if (i < 0 || j < 0 || i >= nx_ || j >= ny_)
    throw ContractViolation("EofmImage: pixel out of range");
  return amp_[static_cast<std::size_t>(j) * nx_ + i];
}

void EofmImage::set(int i, int j, double amplitude) {
  if (i < 0 || j < 0 || i >= nx_ || j >= ny_)
    throw ContractViolation("EofmImage: pixel out of range");
  if (!(amplitude >= 0.0))
    throw ContractViolation("EofmImage: amplitudes are non-negative");
  amp_[static_cast<std::size_t>(j) * nx_ + i] = amplitude;
}

double EofmImage::amplitude_at(PointUm p) const {
  const int i = std::clamp(
      static_cast<int>(std::floor((p.x - origin_.x) / pitch_)), 0, nx_ - 1);
  const int j = std::clamp(
      static_cast<int>(std::floor((p.y - origin_.y) / pitch_)), 0, ny_ - 1);
  return at(i, j);
}

double EofmImage::max() const {
  return amp_.empty() ? 0.0 : *std::max_element(amp_.begin(), amp_.end());
}

std::string EofmImage::to_pgm(double full_scale) const {
  if (full_scale <= 0.0) full_scale = max();
  std::ostringstream os;
  os << "P2\n" << nx_ << ' ' << ny_ << "\n255\n";
  for (int j = 0; j < ny_; ++j) {
    for (int i = 0; i < nx_; ++i) {
      const double v = full_scale > 0.0 ? at(i, j) / full_scale : 0.0;
      os << (i ? " " : "") << std::lround(255.0 * std::clamp(v, 0.0, 1.0));
    }
    os << '\n';
  }
  return os.str();
}

std::string EofmImage::to_csv() const {
  std::string out = "x_um,y_um,amplitude\n";
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      const PointUm c = pixel_center(i, j);
      out += fmt::format("{:.3f},{:.3f},{:.6e}\n", c.x, c.y, at(i, j));
    }
  return out;
}

double unit_amplitude() { return 2.0 / std::numbers::pi; }
double default_threshold() { return 0.5 * unit_amplitude(); }

// --- EOFM --------------------------------------------------------------------

EofmImage eofm_scan(sim::CoSim &sim, const ScanConfig &scan, Rng &rng) {
  scan.validate(sim.model().geometry());
  const std::uint64_t dwell = scan.dwell_cycles(sim.clock_mhz());
  EofmImage image(scan.nx(), scan.ny(), {scan.region.x0, scan.region.y0},
                  scan.pixel_pitch_um);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int j = 0; j < image.ny(); ++j) {
    for (int i = 0; i < image.nx(); ++i) {
      sim.set_spot(spot_at(image.pixel_center(i, j), scan.laser_power,
                           scan.spot_sigma_um));
      sim.begin_lockin(scan.target_freq_mhz);
      sim.advance(dwell);
      std::complex<double> z = sim.lockin_phasor();
      const double re = noise(rng), im = noise(rng);
      z += scan.noise_sigma * std::complex<double>(re, im);
      image.set(i, j, std::abs(z));
    }
  }
  thermal::LaserSpot off = sim.spot();
  off.enabled = false;
  sim.set_spot(off);
  return image;
}

std::vector<SliceCoord> localize(const EofmImage &image, double threshold,
                                 const fabric::Geometry &geometry) {
  std::vector<SliceCoord> sites;
  const int nx = image.nx(), ny = image.ny();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(nx) * ny, 0);
  for (int j0 = 0; j0 < ny; ++j0) {
    for (int i0 = 0; i0 < nx; ++i0) {
      if (seen[static_cast<std::size_t>(j0) * nx + i0] ||
          image.at(i0, j0) < threshold)
        continue;
      double wx = 0.0, wy = 0.0, w = 0.0;
      std::deque<std::pair<int, int>> queue{{i0, j0}};
      seen[static_cast<std::size_t>(j0) * nx + i0] = 1;
      while (!queue.empty()) {
        const auto [i, j] = queue.front();
        queue.pop_front();
        const double a = image.at(i, j);
        const PointUm c = image.pixel_center(i, j);
        wx += a * c.x;
        wy += a * c.y;
        w += a;
        constexpr int kDi[] = {1, -1, 0, 0}, kDj[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int ni = i + kDi[k], nj = j + kDj[k];
          if (ni < 0 || nj < 0 || ni >= nx || nj >= ny) continue;
          auto &s = seen[static_cast<std::size_t>(nj) * nx + ni];
          if (s || image.at(ni, nj) < threshold) continue;
          s = 1;
          queue.emplace_back(ni, nj);
        }
      }
      sites.push_back(geometry.slice_at({wx / w, wy / w}));
    }
  }
  return sites;
}

std::vector<std::uint8_t> recover_bits(const EofmImage &image,
                                       const std::vector<PointUm> &sites,
                                       double threshold) {
  std::vector<std::uint8_t> bits;
  bits.reserve(sites.size());
  for (const PointUm &p : sites)
    bits.push_back(image.amplitude_at(p) >= threshold ? 1 : 0);
  return bits;
}

FunctionRecovery recover_function(
    sim::CoSim &sim, const ScanConfig &scan,
    const std::vector<std::string> &a_nets,
    const std::vector<std::string> &b_nets,
    const std::vector<PointUm> &output_sites,
    const std::vector<std::pair<std::string, std::string>> &vectors,
    double threshold, Rng &rng) {
  FunctionRecovery out;
  for (const auto &[a, b] : vectors) {
    if (a.size() != a_nets.size() || b.size() != b_nets.size())
      throw ConfigError("input vector '" + a + "," + b +
                        "' does not match the register width");
    for (std::size_t i = 0; i < a.size(); ++i) sim.set_constant(a_nets[i], a[i] == '1');
    for (std::size_t i = 0; i < b.size(); ++i) sim.set_constant(b_nets[i], b[i] == '1');
    EofmImage image = eofm_scan(sim, scan, rng);
    std::string bits;
    for (std::uint8_t v : recover_bits(image, output_sites, threshold))
      bits += v ? '1' : '0';
    out.rows.push_back({a, b, bits});
    out.images.push_back(std::move(image));
  }
  return out;
}

// --- EOP ---------------------------------------------------------------------

std::size_t EopConfig::samples() const {
  const double n = duration_ns * 1e3 / resolution_ps;
  const double r = std::round(n);
  if (r < 1.0 || std::abs(n - r) > 1e-6)
    throw ConfigError("eop: duration is not a whole number of samples");
  return static_cast<std::size_t>(r);
}

void EopConfig::validate(const fabric::Geometry &geometry, double clock_mhz) const {
  if (!(resolution_ps > 0.0)) throw ConfigError("eop: resolution_ps must be > 0");
  if (!(duration_ns > 0.0)) throw ConfigError("eop: duration_ns must be > 0");
  if (iterations < 1) throw ConfigError("eop: iterations must be >= 1");
  if (noise_sigma < 0.0) throw ConfigError("eop: noise_sigma must be >= 0");
  if (!(capture_radius_um > 0.0)) throw ConfigError("eop: capture_radius_um must be > 0");
  samples();
  whole_cycles(1e6 / clock_mhz / resolution_ps, "eop: clock period in samples");
  whole_cycles(duration_ns * 1e-3 * clock_mhz, "eop: duration");
  if (point.x < 0.0 || point.y < 0.0 || point.x > geometry.width_um() ||
      point.y > geometry.height_um())
    throw ContractViolation("eop: probe point outside the fabric");
}

std::string EopTrace::to_csv() const {
  std::string out = "time_ps,value\n";
  for (std::size_t s = 0; s < values.size(); ++s)
    out += fmt::format("{},{:.6f}\n", std::llround(s * resolution_ps), values[s]);
  return out;
}

EopTrace eop_probe(sim::CoSim &sim, const EopConfig &cfg, Rng &rng) {
  fabric::FabricModel &model = sim.model();
  cfg.validate(model.geometry(), sim.clock_mhz());
  const std::size_t n = cfg.samples();
  const auto per_cycle = static_cast<std::size_t>(
      std::llround(1e6 / sim.clock_mhz() / cfg.resolution_ps));
  const std::size_t cycles = n / per_cycle;

  std::uint64_t resolved_version = ~std::uint64_t{0};
  fabric::NetId probed = fabric::kNoNet;
  auto resolve = [&] {
    if (resolved_version == model.placement_version()) return;
    resolved_version = model.placement_version();
    probed = fabric::kNoNet;
    double best = cfg.capture_radius_um;
    for (std::size_t i = 0; i < model.ffs().size(); ++i) {
      const double d = fabric::distance_um(model.ff_position(i), cfg.point);
      if (d <= best) {
        best = d;
        probed = model.ffs()[i].q;
      }
    }
  };

  sim.set_spot(spot_at(cfg.point, cfg.laser_power, cfg.spot_sigma_um));
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
  EopTrace trace;
  trace.resolution_ps = cfg.resolution_ps;
  trace.iterations = cfg.iterations;
  trace.values.assign(n, 0.0);
  for (int it = 0; it < cfg.iterations; ++it) {
    sim.restart_stimulus();
    for (std::size_t c = 0; c < cycles; ++c) {
      resolve();
      const double v =
          probed != fabric::kNoNet && model.value(probed) ? 1.0 : 0.0;
      for (std::size_t s = c * per_cycle; s < (c + 1) * per_cycle; ++s)
        trace.values[s] += v + (cfg.noise_sigma > 0.0 ? noise(rng) : 0.0);
      sim.advance(1);
    }
  }
  for (double &v : trace.values) v /= cfg.iterations;
  thermal::LaserSpot off = sim.spot();
  off.enabled = false;
  sim.set_spot(off);
  return trace;
}

}  // namespace probeguard::attacker
