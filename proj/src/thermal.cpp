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

#include "probeguard/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "probeguard/error.hpp"

namespace probeguard::thermal {

double unit_gaussian(double distance_um, double sigma_um) {
  const double z = distance_um / sigma_um;
  return std::exp(-0.5 * z * z);
}

double delay_factor(double delta_t_k, double alpha_per_k) {
  if (delta_t_k < 0.0)
    throw ContractViolation("delay_factor: negative temperature elevation");
  return 1.0 + alpha_per_k * delta_t_k;
}

ThermalField::ThermalField(const fabric::Geometry &geometry,
                           ThermalParams params)
    : geometry_(geometry),
      params_(params),
      delta_t_(static_cast<std::size_t>(geometry.width * geometry.height),
               0.0),
      source_(delta_t_.size(), 0.0) {
  if (params_.tau_us <= 0.0)
    throw ContractViolation("ThermalField: tau must be positive");
}

void ThermalField::refresh_source(const LaserSpot &spot) {
  if (source_valid_ && spot.enabled == cached_spot_.enabled &&
      spot.center.x == cached_spot_.center.x &&
      spot.center.y == cached_spot_.center.y &&
      spot.power == cached_spot_.power &&
      spot.sigma_um == cached_spot_.sigma_um)
    return;
  if (spot.power < 0.0 || spot.sigma_um <= 0.0)
    throw ContractViolation("LaserSpot: power must be >= 0 and sigma > 0");
  for (int y = 0; y < geometry_.height; ++y) {
    for (int x = 0; x < geometry_.width; ++x) {
      const auto i = static_cast<std::size_t>(y * geometry_.width + x);
      if (!spot.enabled) {
        source_[i] = 0.0;
        continue;
      }
      const double r =
          fabric::distance_um(geometry_.slice_center({x, y}), spot.center);
      source_[i] = params_.heating_gain_k_per_us * spot.power *
                   unit_gaussian(r, spot.sigma_um);
    }
  }
  cached_spot_ = spot;
  source_valid_ = true;
}

void ThermalField::advance(double dt_us, const LaserSpot &spot) {
  if (!(dt_us > 0.0))
    throw ContractViolation("ThermalField::advance: dt must be positive");
  refresh_source(spot);
  const double decay = std::exp(-dt_us / params_.tau_us);
  const double gain = params_.tau_us * (1.0 - decay);
  for (std::size_t i = 0; i < delta_t_.size(); ++i)
    delta_t_[i] = delta_t_[i] * decay + source_[i] * gain;
  elapsed_us_ += dt_us;
}

double ThermalField::delta_t(SliceCoord c) const {
  if (!geometry_.contains(c))
    throw ContractViolation("ThermalField: slice outside grid");
  return delta_t_[static_cast<std::size_t>(c.y * geometry_.width + c.x)];
}

double ThermalField::predict(SliceCoord c, double dt_us,
                             const LaserSpot &spot) const {
  const double now = delta_t(c);
  if (dt_us <= 0.0) return now;
  double source = 0.0;
  if (spot.enabled) {
    if (spot.power < 0.0 || spot.sigma_um <= 0.0)
      throw ContractViolation("LaserSpot: power must be >= 0 and sigma > 0");
    const double r =
        fabric::distance_um(geometry_.slice_center(c), spot.center);
    source = params_.heating_gain_k_per_us * spot.power *
             unit_gaussian(r, spot.sigma_um);
  }
  const double decay = std::exp(-dt_us / params_.tau_us);
  return now * decay + source * params_.tau_us * (1.0 - decay);
}

double ThermalField::delta_t_at(PointUm p) const {
  return delta_t(geometry_.slice_at(p));
}

double ThermalField::delay_factor_at(PointUm p) const {
  return delay_factor(delta_t_at(p), params_.alpha_per_k);
}

double ThermalField::peak() const {
  return *std::max_element(delta_t_.begin(), delta_t_.end());
}

double ThermalField::total() const {
  return std::accumulate(delta_t_.begin(), delta_t_.end(), 0.0);
}

void ThermalField::set_uniform(double delta_t_k) {
  if (delta_t_k < 0.0)
    throw ContractViolation("ThermalField: negative temperature elevation");
  std::fill(delta_t_.begin(), delta_t_.end(), delta_t_k);
}

std::string ThermalField::to_pgm(double full_scale_k) const {
  std::ostringstream os;
  os << "P2\n" << geometry_.width << ' ' << geometry_.height << "\n255\n";
  for (int y = 0; y < geometry_.height; ++y) {
    for (int x = 0; x < geometry_.width; ++x) {
      double v = full_scale_k > 0.0 ? delta_t({x, y}) / full_scale_k : 0.0;
      v = std::clamp(v, 0.0, 1.0);
      os << (x ? " " : "") << static_cast<int>(std::lround(v * 255.0));
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace probeguard::thermal
