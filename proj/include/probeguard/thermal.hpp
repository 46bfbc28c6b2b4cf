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

#ifndef PROBEGUARD_THERMAL_HPP_
#define PROBEGUARD_THERMAL_HPP_

#include <string>
#include <vector>

#include "probeguard/geometry.hpp"

namespace probeguard::thermal {

using fabric::PointUm;
using fabric::SliceCoord;

// Gaussian laser spot. power is in model units: 1.0 is the reference power.
struct LaserSpot {
  PointUm center;
  double power = 1.0;
  double sigma_um = 8.0;
  bool enabled = false;
};

struct ThermalParams {
  double tau_us = 50.0;
  double alpha_per_k = 0.002;
  // Heating rate at the spot centre per unit power. The steady-state peak
  // elevation is heating_gain * power * tau (0.4 * 1 * 50 = 20 K).
  double heating_gain_k_per_us = 0.4;
};

// exp(-d^2 / (2 sigma^2)); 1 at the centre.
double unit_gaussian(double distance_um, double sigma_um);

// 1 + alpha * dT. dT must be non-negative.
double delay_factor(double delta_t_k, double alpha_per_k);

// Per-slice temperature elevation above ambient. Cells couple only to the
// spot and to ambient; there is no lateral diffusion.
class ThermalField {
 public:
  ThermalField(const fabric::Geometry &geometry, ThermalParams params);

  // Integrates dT/dt = gain * power * G(r) - dT / tau exactly over dt with the
  // spot held fixed.
  void advance(double dt_us, const LaserSpot &spot);

  double delta_t(SliceCoord c) const;
  // Elevation of one cell dt later under `spot`, without advancing.
  double predict(SliceCoord c, double dt_us, const LaserSpot &spot) const;
  // Elevation of the slice containing p.
  double delta_t_at(PointUm p) const;
  double delay_factor_at(PointUm p) const;
  double peak() const;
  double total() const;

  void set_uniform(double delta_t_k);
  void reset() { set_uniform(0.0); }

  const ThermalParams &params() const { return params_; }
  const fabric::Geometry &geometry() const { return geometry_; }
  double elapsed_us() const { return elapsed_us_; }

  // ASCII portable graymap (P2), scaled so full_scale_k maps to 255.
  std::string to_pgm(double full_scale_k) const;

 private:
  void refresh_source(const LaserSpot &spot);

  fabric::Geometry geometry_;
  ThermalParams params_;
  std::vector<double> delta_t_;
  // Heating-source profile cached for the last spot seen.
  std::vector<double> source_;
  LaserSpot cached_spot_;
  bool source_valid_ = false;
  double elapsed_us_ = 0.0;
};

}  // namespace probeguard::thermal

#endif  // PROBEGUARD_THERMAL_HPP_
