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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "probeguard/attacker.hpp"
#include "probeguard/error.hpp"
#include "probeguard/netlist.hpp"

namespace probeguard::attacker {
namespace {

using fabric::FabricModel;

FabricModel key_model(const std::string &key = "10110001") {
  std::string text = "input rst\n";
  for (int i = 0; i < 8; ++i) {
    const std::string s = std::to_string(i);
    text += "const k" + s + " " + key[static_cast<std::size_t>(i)] + "\n";
    text += "ff key" + s + " d=k" + s + " q=kq" + s + " rst=rst at=" +
            std::to_string(4 + 3 * i) + ",8/0 reg=key:" + s + "\n";
  }
  return fabric::parse_netlist(text);
}

std::vector<PointUm> key_sites(const FabricModel &m) {
  std::vector<PointUm> out;
  for (std::size_t i : m.register_bits("key")) out.push_back(m.ff_position(i));
  return out;
}

sim::Stimulus rst_toggle() {
  sim::Stimulus st;
  st.squares.push_back({"rst", sim::half_period_cycles(1.25, 100.0), false});
  return st;
}

// Row 8 only, short dwell.
ScanConfig row_scan() {
  ScanConfig s;
  s.region = {20.0, 80.0, 280.0, 95.0};
  s.dwell_ms = 0.064;  // 6400 cycles = 80 periods of 1.25 MHz
  return s;
}

TEST(ScanConfigTest, DimensionsAndValidation) {
  ScanConfig s;
  EXPECT_EQ(s.nx(), 52);
  EXPECT_EQ(s.ny(), 12);
  const fabric::Geometry g;
  EXPECT_NO_THROW(s.validate(g));
  EXPECT_EQ(s.dwell_cycles(100.0), 100000u);
  ScanConfig bad = s;
  bad.region.x1 = 400.0;
  EXPECT_THROW(bad.validate(g), ScenarioError);
  bad = s;
  bad.region.y0 = -1.0;
  EXPECT_THROW(bad.validate(g), ScenarioError);
  bad = s;
  bad.dwell_ms = 0.0;
  EXPECT_THROW(bad.validate(g), ConfigError);
  bad = s;
  bad.pixel_pitch_um = 0.0;
  EXPECT_THROW(bad.validate(g), ConfigError);
  bad = s;
  bad.target_freq_mhz = -1.0;
  EXPECT_THROW(bad.validate(g), ConfigError);
  bad = s;
  bad.dwell_ms = 1e-7;
  EXPECT_THROW(bad.dwell_cycles(100.0), ConfigError);
}

TEST(EofmImageTest, PgmAndCsv) {
  EofmImage im(3, 2, {0.0, 0.0}, 5.0);
  im.set(1, 0, 1.0);
  im.set(2, 1, 0.5);
  EXPECT_EQ(im.to_pgm(), "P2\n3 2\n255\n0 255 0\n0 0 128\n");
  EXPECT_EQ(im.to_pgm(2.0), "P2\n3 2\n255\n0 128 0\n0 0 64\n");
  const std::string csv = im.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x_um,y_um,amplitude");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_DOUBLE_EQ(im.amplitude_at({7.4, 1.0}), 1.0);
  EXPECT_DOUBLE_EQ(im.amplitude_at({100.0, 100.0}), 0.5);
  EXPECT_THROW(im.set(0, 0, -1.0), ContractViolation);
  EXPECT_THROW(im.at(3, 0), ContractViolation);
}

TEST(Localize, Fixtures) {
  const fabric::Geometry g;
  EofmImage dark(20, 10, {0.0, 0.0}, 5.0);
  EXPECT_TRUE(localize(dark, 0.3, g).empty());

  EofmImage one = dark;
  one.set(5, 3, 1.0);  // centre (27.5, 17.5) -> slice (2, 1)
  const auto s1 = localize(one, 0.3, g);
  ASSERT_EQ(s1.size(), 1u);
  EXPECT_EQ(s1[0], (SliceCoord{2, 1}));

  EofmImage two = dark;
  for (auto [i, j] : {std::pair{2, 2}, {3, 2}, {2, 3}, {3, 3}}) two.set(i, j, 0.8);
  for (auto [i, j] : {std::pair{14, 7}, {15, 7}}) two.set(i, j, 0.9);
  const auto s2 = localize(two, 0.3, g);
  ASSERT_EQ(s2.size(), 2u);
  EXPECT_EQ(s2[0], (SliceCoord{1, 1}));  // centroid (15, 15)
  EXPECT_EQ(s2[1], (SliceCoord{7, 3}));  // centroid (75, 37.5)
}

TEST(RecoverBits, Trivial) {
  EofmImage im(4, 1, {0.0, 0.0}, 10.0);
  for (int i = 0; i < 4; ++i) im.set(i, 0, 1.0);
  const std::vector<PointUm> sites{{5, 5}, {15, 5}, {25, 5}, {35, 5}};
  EXPECT_EQ(recover_bits(im, sites, 0.5), (std::vector<std::uint8_t>{1, 1, 1, 1}));
  im.set(1, 0, 0.2);
  EXPECT_EQ(recover_bits(im, sites, 0.5), (std::vector<std::uint8_t>{1, 0, 1, 1}));
}

TEST(EofmScan, UnprotectedKeyShowsItsOnes) {
  FabricModel m = key_model();
  sim::CoSim s(m, {}, 100.0, nullptr, nullptr, 1);
  s.set_stimulus(rst_toggle());
  Rng rng(5);
  const ScanConfig scan = row_scan();
  const EofmImage im = eofm_scan(s, scan, rng);
  EXPECT_EQ(s.now_cycles(), static_cast<std::uint64_t>(scan.nx() * scan.ny()) *
                                scan.dwell_cycles(100.0));

  const auto bits = recover_bits(im, key_sites(m), default_threshold());
  EXPECT_EQ(bits, (std::vector<std::uint8_t>{1, 0, 1, 1, 0, 0, 0, 1}));

  // Bright/dark contrast against pixels at least 3 sigma from every FF.
  double background = 0.0;
  int nb = 0;
  for (int j = 0; j < im.ny(); ++j)
    for (int i = 0; i < im.nx(); ++i) {
      const PointUm c = im.pixel_center(i, j);
      bool far = true;
      for (std::size_t f = 0; f < m.ffs().size(); ++f)
        far = far && fabric::distance_um(c, m.ff_position(f)) > 24.0;
      if (far) {
        background += im.at(i, j);
        ++nb;
      }
    }
  ASSERT_GT(nb, 0);
  background /= nb;
  for (std::size_t b : {0u, 2u, 3u, 7u})
    EXPECT_GE(im.amplitude_at(key_sites(m)[b]), 5.0 * background);

  const auto sites = localize(im, default_threshold(), m.geometry());
  std::vector<SliceCoord> want{{4, 8}, {10, 8}, {13, 8}, {25, 8}};
  EXPECT_EQ(sites, want);
}

TEST(EofmScan, StaticLogicStaysInTheNoiseFloor) {
  FabricModel m = key_model("11111111");
  sim::CoSim s(m, {}, 100.0, nullptr, nullptr, 1);
  s.set_constant("rst", false);
  Rng rng(6);
  const ScanConfig scan = row_scan();
  const EofmImage im = eofm_scan(s, scan, rng);
  // Rayleigh(sigma) tail: P(> 6 sigma) = exp(-18) per pixel.
  EXPECT_LT(im.max(), 6.0 * scan.noise_sigma);
}

TEST(EofmScan, NoiselessAmplitudeMatchesPsf) {
  FabricModel m = key_model("10000000");
  sim::CoSim s(m, {}, 100.0, nullptr, nullptr, 1);
  s.set_stimulus(rst_toggle());
  ScanConfig scan = row_scan();
  scan.noise_sigma = 0.0;
  Rng rng(1);
  const EofmImage im = eofm_scan(s, scan, rng);
  const PointUm ff = m.ff_position(0);
  for (int j = 0; j < im.ny(); ++j)
    for (int i = 0; i < im.nx(); ++i) {
      const double d = fabric::distance_um(im.pixel_center(i, j), ff);
      const double want = d >= 40.0 ? 0.0
                                   : unit_amplitude() * std::exp(-d * d / 128.0);
      EXPECT_NEAR(im.at(i, j), want, 1e-9) << i << "," << j;
    }
}

TEST(EofmScan, PsfLocalityBeyondFiveSigma) {
  FabricModel m = key_model("10000000");
  sim::CoSim s(m, {}, 100.0, nullptr, nullptr, 1);
  s.set_stimulus(rst_toggle());
  ScanConfig scan = row_scan();
  scan.noise_sigma = 0.0;
  const PointUm ff = m.ff_position(0);
  for (double d : {40.0, 41.0, 60.0}) {
    scan.region = {ff.x + d - 2.5, ff.y - 2.5, ff.x + d + 2.5, ff.y + 2.5};
    Rng rng(1);
    const EofmImage im = eofm_scan(s, scan, rng);
    EXPECT_LT(im.at(0, 0), 1e-6 * unit_amplitude()) << d;
  }
}

TEST(EofmScan, RegionOutsideFabricIsAScenarioError) {
  FabricModel m = key_model();
  sim::CoSim s(m, {}, 100.0, nullptr, nullptr, 1);
  ScanConfig scan = row_scan();
  scan.region.x1 = 321.0;
  Rng rng(1);
  EXPECT_THROW(eofm_scan(s, scan, rng), ScenarioError);
}

FabricModel xor_model() {
  std::string text = "input rst a0 a1 a2 a3 b0 b1 b2 b3\n";
  for (int i = 0; i < 4; ++i) {
    const std::string s = std::to_string(i), x = std::to_string(8 + 3 * i);
    text += "ff ra" + s + " d=a" + s + " q=qa" + s + " rst=rst at=" + x + ",4/0 reg=a:" + s + "\n";
    text += "ff rb" + s + " d=b" + s + " q=qb" + s + " rst=rst at=" + x + ",6/0 reg=b:" + s + "\n";
    text += "lut x" + s + " init=0x6 in=qa" + s + ",qb" + s + " out=xo" + s + " at=" + x + ",2/0\n";
    text += "ff rc" + s + " d=xo" + s + " q=qc" + s + " rst=rst at=" + x + ",8/0 reg=c:" + s + "\n";
  }
  return fabric::parse_netlist(text);
}

TEST(RecoverFunction, UnprotectedXorMatchesSoftware) {
  FabricModel m = xor_model();
  sim::CoSim s(m, {}, 100.0, nullptr, nullptr, 1);
  s.set_stimulus(rst_toggle());
  ScanConfig scan = row_scan();
  scan.region = {70.0, 80.0, 180.0, 90.0};
  std::vector<PointUm> out_sites;
  for (std::size_t i : m.register_bits("c")) out_sites.push_back(m.ff_position(i));
  const std::vector<std::pair<std::string, std::string>> vectors{
      {"0101", "1010"}, {"0000", "1111"}, {"1100", "1010"}, {"1111", "1111"}};
  Rng rng(3);
  const auto rec = recover_function(s, scan, {"a0", "a1", "a2", "a3"},
                                    {"b0", "b1", "b2", "b3"}, out_sites,
                                    vectors, default_threshold(), rng);
  ASSERT_EQ(rec.rows.size(), vectors.size());
  for (const auto &row : rec.rows) {
    std::string want;
    for (std::size_t i = 0; i < 4; ++i) want += row.a[i] != row.b[i] ? '1' : '0';
    EXPECT_EQ(row.out, want) << row.a << "^" << row.b;
  }
  EXPECT_EQ(rec.rows[0].out, "1111");
  Rng r2(3);
  EXPECT_THROW(recover_function(s, scan, {"a0"}, {"b0"}, out_sites, vectors,
                                0.3, r2),
               ConfigError);
}

FabricModel shift_model() {
  return fabric::parse_netlist(
      "input sin\n"
      "ff s1 d=sin q=q1 at=10,5/0 reg=sr:0\n"
      "ff s2 d=q1 q=q2 at=12,5/0 reg=sr:1\n"
      "const zero 0\n"
      "ff z d=zero q=qz at=20,5/0\n");
}

sim::Stimulus shift_pattern(const std::string &bits) {
  sim::Stimulus st;
  st.patterns.push_back({"sin", bits, 1, false});
  return st;
}

double residual_sd(const EopTrace &t, const std::vector<double> &ideal) {
  double ss = 0.0;
  for (std::size_t i = 0; i < ideal.size(); ++i)
    ss += (t.values[i] - ideal[i]) * (t.values[i] - ideal[i]);
  return std::sqrt(ss / static_cast<double>(ideal.size()));
}

TEST(Eop, ShiftRegisterTransitionsOnClockEdges) {
  const std::string bits = "01101000";
  FabricModel m = shift_model();
  sim::CoSim s(m, {}, 100.0, nullptr, nullptr, 1);
  s.set_stimulus(shift_pattern(bits));
  for (int stage = 1; stage <= 2; ++stage) {
    EopConfig cfg;
    cfg.point = m.ff_position(*m.find_ff(stage == 1 ? "s1" : "s2"));
    cfg.iterations = 400;
    cfg.noise_sigma = 1.0;
    Rng rng(10 + stage);
    const EopTrace t = eop_probe(s, cfg, rng);
    ASSERT_EQ(t.values.size(), 800u);
    // Ideal: stage k shows bits[c - k] during cycle c.
    std::vector<double> ideal(800);
    for (std::size_t i = 0; i < 800; ++i) {
      const int c = static_cast<int>(i / 100) - stage;
      ideal[i] = c >= 0 && bits[static_cast<std::size_t>(c)] == '1' ? 1.0 : 0.0;
    }
    // Per-cycle means must sit on the right side of 0.5.
    for (int c = 0; c < 8; ++c) {
      double mean = 0.0;
      for (int k = 0; k < 100; ++k) mean += t.values[c * 100 + k];
      mean /= 100.0;
      EXPECT_EQ(mean > 0.5, ideal[static_cast<std::size_t>(c) * 100] > 0.5)
          << "stage " << stage << " cycle " << c;
    }
    EXPECT_NEAR(residual_sd(t, ideal), 1.0 / std::sqrt(400.0),
                0.1 / std::sqrt(400.0));
  }
}

TEST(Eop, AveragingFollowsInverseSqrtN) {
  for (int n : {100, 10000}) {
    FabricModel m = shift_model();
    sim::CoSim s(m, {}, 100.0, nullptr, nullptr, 1);
    s.set_stimulus(shift_pattern("0"));
    EopConfig cfg;
    cfg.point = m.ff_position(*m.find_ff("z"));
    cfg.iterations = n;
    Rng rng(static_cast<std::uint64_t>(n));
    const EopTrace t = eop_probe(s, cfg, rng);
    EXPECT_EQ(t.iterations, n);
    const std::vector<double> zero(t.values.size(), 0.0);
    EXPECT_NEAR(residual_sd(t, zero), 1.0 / std::sqrt(n), 0.1 / std::sqrt(n)) << n;
    const double mean =
        std::accumulate(t.values.begin(), t.values.end(), 0.0) / t.values.size();
    EXPECT_NEAR(mean, 0.0, 5.0 / std::sqrt(n * 800.0));
  }
}

TEST(Eop, EmptyPointReadsZeroAndCsvShape) {
  FabricModel m = shift_model();
  sim::CoSim s(m, {}, 100.0, nullptr, nullptr, 1);
  EopConfig cfg;
  cfg.point = {300.0, 150.0};
  cfg.iterations = 3;
  cfg.noise_sigma = 0.0;
  cfg.duration_ns = 20.0;
  Rng rng(1);
  const EopTrace t = eop_probe(s, cfg, rng);
  EXPECT_EQ(t.values, std::vector<double>(200, 0.0));
  const std::string csv = t.to_csv();
  EXPECT_EQ(csv.substr(0, 24), "time_ps,value\n0,0.000000");
  EXPECT_NE(csv.find("\n19900,"), std::string::npos);
  cfg.resolution_ps = 300.0;
  EXPECT_THROW(eop_probe(s, cfg, rng), ConfigError);
  cfg.resolution_ps = 100.0;
  cfg.point = {-5.0, 0.0};
  EXPECT_THROW(eop_probe(s, cfg, rng), ContractViolation);
}

}  // namespace
}  // namespace probeguard::attacker
