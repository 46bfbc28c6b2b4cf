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

#ifndef PROBEGUARD_GEOMETRY_HPP_
#define PROBEGUARD_GEOMETRY_HPP_

#include <cmath>
#include <compare>

namespace probeguard::fabric {

struct SliceCoord {
  int x = 0;
  int y = 0;
  auto operator<=>(const SliceCoord &) const = default;
};

// A position on the die, in micrometres.
struct PointUm {
  double x = 0.0;
  double y = 0.0;
};

inline double distance_um(PointUm a, PointUm b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// One flip-flop slot inside a slice.
struct FfSlot {
  SliceCoord slice;
  int slot = 0;
  auto operator<=>(const FfSlot &) const = default;
};

// Physical layout of the slice grid. Slice (x, y) covers
// [x*pitch, (x+1)*pitch) x [y*pitch, (y+1)*pitch). LUT slots sit in a row
// across the upper quarter line of the slice, FF slots across the lower one.
struct Geometry {
  int width = 32;
  int height = 16;
  double site_pitch_um = 10.0;
  int ffs_per_slice = 4;
  int luts_per_slice = 4;

  bool contains(SliceCoord c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height;
  }
  bool contains(FfSlot s) const {
    return contains(s.slice) && s.slot >= 0 && s.slot < ffs_per_slice;
  }
  double width_um() const { return width * site_pitch_um; }
  double height_um() const { return height * site_pitch_um; }

  PointUm slice_center(SliceCoord c) const {
    return {(c.x + 0.5) * site_pitch_um, (c.y + 0.5) * site_pitch_um};
  }
  PointUm ff_position(FfSlot s) const {
    return {(s.slice.x + (s.slot + 0.5) / ffs_per_slice) * site_pitch_um,
            (s.slice.y + 0.75) * site_pitch_um};
  }
  PointUm lut_position(SliceCoord c, int slot) const {
    return {(c.x + (slot + 0.5) / luts_per_slice) * site_pitch_um,
            (c.y + 0.25) * site_pitch_um};
  }
  // Slice whose footprint contains p, clamped to the grid.
  SliceCoord slice_at(PointUm p) const {
    int x = static_cast<int>(std::floor(p.x / site_pitch_um));
    int y = static_cast<int>(std::floor(p.y / site_pitch_um));
    x = x < 0 ? 0 : (x >= width ? width - 1 : x);
    y = y < 0 ? 0 : (y >= height ? height - 1 : y);
    return {x, y};
  }
};

}  // namespace probeguard::fabric

#endif  // PROBEGUARD_GEOMETRY_HPP_
