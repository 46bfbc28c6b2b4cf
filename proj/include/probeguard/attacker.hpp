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

// Optical adversary: lock-in raster imaging and point probing, run on the
// co-simulation clock so the laser's own heat races the defense.

#ifndef PROBEGUARD_ATTACKER_HPP_
#define PROBEGUARD_ATTACKER_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "probeguard/cosim.hpp"
#include "probeguard/geometry.hpp"

namespace probeguard::attacker {

using fabric::PointUm;
using fabric::SliceCoord;
using Rng = std::mt19937_64;

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

struct ScanConfig {
  Rect region{20.0, 50.0, 280.0, 110.0};
  double pixel_pitch_um = 5.0;
  double dwell_ms = 1.0;
  double target_freq_mhz = 1.25;
  // Echoed only; the dwell fixes the lock-in integration time.
  double bandwidth_khz = 1.0;
  double laser_power = 1.0;
  double spot_sigma_um = 8.0;
  // Per-pixel complex Gaussian noise, sigma per quadrature.
  double noise_sigma = 0.02;

  int nx() const;
  int ny() const;
  // ConfigError on a bad parameter, ScenarioError if the region leaves the
  // fabric.
  void validate(const fabric::Geometry &geometry) const;
  std::uint64_t dwell_cycles(double clock_mhz) const;
};

class EofmImage {
 public:
  EofmImage() = default;
  EofmImage(int nx, int ny, PointUm origin, double pitch_um);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double pitch_um() const { return pitch_; }
  PointUm origin() const { return origin_; }
  PointUm pixel_center(int i, int j) const;

  double at(int i, int j) const;
  void set(int i, int j, double amplitude);
  // Amplitude of the pixel whose centre is nearest to p.
  double amplitude_at(PointUm p) const;
  double max() const;
  const std::vector<double> &data() const { return amp_; }

  // full_scale <= 0 scales to the brightest pixel.
  std::string to_pgm(double full_scale = 0.0) const;
  std::string to_csv() const;

 private:
  int nx_ = 0, ny_ = 0;
  PointUm origin_;
  double pitch_ = 1.0;
  std::vector<double> amp_;
};

// Reference amplitude of one fully covered FF toggling as a square wave.
double unit_amplitude();
// recover_bits decision level: half the unit amplitude.
double default_threshold();

// Raster scan, left to right then top to bottom, one dwell per pixel.
EofmImage eofm_scan(sim::CoSim &sim, const ScanConfig &scan, Rng &rng);

std::vector<SliceCoord> localize(const EofmImage &image, double threshold,
                                 const fabric::Geometry &geometry);

std::vector<std::uint8_t> recover_bits(const EofmImage &image,
                                       const std::vector<PointUm> &sites,
                                       double threshold);

struct FunctionRow {
  std::string a, b, out;
};

struct FunctionRecovery {
  std::vector<FunctionRow> rows;
  std::vector<EofmImage> images;
};

// For each (a, b) vector: drive the a/b input nets (character i drives
// net i), rescan, and read the output sites.
FunctionRecovery recover_function(
    sim::CoSim &sim, const ScanConfig &scan,
    const std::vector<std::string> &a_nets,
    const std::vector<std::string> &b_nets,
    const std::vector<PointUm> &output_sites,
    const std::vector<std::pair<std::string, std::string>> &vectors,
    double threshold, Rng &rng);

struct EopConfig {
  PointUm point;
  double duration_ns = 80.0;
  double resolution_ps = 100.0;
  int iterations = 10000;
  double noise_sigma = 1.0;
  double capture_radius_um = 2.5;
  double laser_power = 1.0;
  double spot_sigma_um = 8.0;

  std::size_t samples() const;
  void validate(const fabric::Geometry &geometry, double clock_mhz) const;
};

struct EopTrace {
  double resolution_ps = 100.0;
  int iterations = 0;
  std::vector<double> values;

  std::string to_csv() const;
};

// Parks the laser on cfg.point and averages the probed FF output over
// `iterations` restarts of the stimulus. The probed FF is the one whose slot
// is nearest the point, within the capture radius, re-resolved every cycle.
EopTrace eop_probe(sim::CoSim &sim, const EopConfig &cfg, Rng &rng);

}  // namespace probeguard::attacker

#endif  // PROBEGUARD_ATTACKER_HPP_
