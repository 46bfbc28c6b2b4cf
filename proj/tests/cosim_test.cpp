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

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "probeguard/cosim.hpp"
#include "probeguard/error.hpp"
#include "probeguard/netlist.hpp"

namespace probeguard::sim {
namespace {

using fabric::FabricModel;
using thermal::LaserSpot;

constexpr double kPi = std::numbers::pi;

// Input `in` sampled by one FF at slice (5,5) slot 0; a constant-1 FF at (20,5).
FabricModel toggle_model() {
  return fabric::parse_netlist(
      "input in\n"
      "ff f d=in q=fq at=5,5/0\n"
      "ff one d=1 q=oq at=20,5/0\n");
}

LaserSpot spot_on(const FabricModel &m, const std::string &ff, double sigma = 8.0) {
  LaserSpot s;
  s.center = m.ff_position(*m.find_ff(ff));
  s.sigma_um = sigma;
  s.enabled = true;
  return s;
}

Stimulus square(const std::string &net, std::uint64_t half) {
  Stimulus st;
  st.squares.push_back({net, half, false});
  return st;
}

TEST(HalfPeriod, WholeCycles) {
  EXPECT_EQ(half_period_cycles(1.25, 100.0), 40u);
  EXPECT_EQ(half_period_cycles(50.0, 100.0), 1u);
  EXPECT_THROW(half_period_cycles(3.0, 100.0), ConfigError);
  EXPECT_THROW(half_period_cycles(0.0, 100.0), ConfigError);
  EXPECT_THROW(half_period_cycles(200.0, 100.0), ConfigError);
}

TEST(Stimulus, SquareWaveSampledOneCycleLate) {
  FabricModel m = toggle_model();
  CoSim sim(m, {}, 100.0, nullptr, nullptr, 1);
  sim.set_stimulus(square("in", 3));
  const auto in = *m.find_net("in"), fq = *m.find_net("fq");
  for (std::uint64_t k = 0; k < 30; ++k) {
    EXPECT_EQ(m.value(in), (k / 3) % 2 == 1) << k;
    if (k > 0) EXPECT_EQ(m.value(fq), ((k - 1) / 3) % 2 == 1) << k;
    sim.advance(1);
  }
}

TEST(Stimulus, PatternRepeatAndHold) {
  FabricModel m = toggle_model();
  CoSim sim(m, {}, 100.0, nullptr, nullptr, 1);
  Stimulus st;
  st.patterns.push_back({"in", "1101", 2, true});
  sim.set_stimulus(st);
  const auto in = *m.find_net("in");
  const std::string bits = "1101";
  for (std::uint64_t k = 0; k < 40; ++k) {
    EXPECT_EQ(m.value(in), bits[(k / 2) % 4] == '1') << k;
    sim.advance(1);
  }

  FabricModel m2 = toggle_model();
  CoSim once(m2, {}, 100.0, nullptr, nullptr, 1);
  Stimulus st2;
  st2.patterns.push_back({"in", "010", 5, false});
  once.set_stimulus(st2);
  once.advance(12);
  EXPECT_FALSE(m2.value(*m2.find_net("in")));
  once.advance(1000);
  EXPECT_FALSE(m2.value(*m2.find_net("in")));
}

TEST(Stimulus, RejectsBadPrograms) {
  FabricModel m = toggle_model();
  CoSim sim(m, {}, 100.0, nullptr, nullptr, 1);
  EXPECT_THROW(sim.set_stimulus(square("fq", 4)), ScenarioError);
  EXPECT_THROW(sim.set_stimulus(square("nope", 4)), ScenarioError);
  Stimulus bad;
  bad.patterns.push_back({"in", "", 1, true});
  EXPECT_THROW(sim.set_stimulus(bad), ConfigError);
  bad.patterns[0].bits = "01x";
  EXPECT_THROW(sim.set_stimulus(bad), ConfigError);
  EXPECT_THROW(sim.set_constant("fq", true), ScenarioError);
}

TEST(Stimulus, RestartRealignsOrigin) {
  FabricModel m = toggle_model();
  CoSim sim(m, {}, 100.0, nullptr, nullptr, 1);
  Stimulus st;
  st.patterns.push_back({"in", "10", 7, true});
  sim.set_stimulus(st);
  sim.advance(10);
  sim.restart_stimulus();
  EXPECT_TRUE(m.value(*m.find_net("in")));
  sim.advance(6);
  EXPECT_TRUE(m.value(*m.find_net("in")));
  sim.advance(1);
  EXPECT_FALSE(m.value(*m.find_net("in")));
}

// Discrete oracle: W is piecewise constant per cycle, so the lock-in integral
// is a sum of per-cycle exact integrals of exp(-i w t).
std::complex<double> oracle_phasor(const std::vector<double> &w_per_cycle,
                                   double omega) {
  std::complex<double> z;
  for (std::size_t c = 0; c < w_per_cycle.size(); ++c) {
    const std::complex<double> e0 = std::polar(1.0, -omega * c);
    const std::complex<double> e1 = std::polar(1.0, -omega * (c + 1.0));
    z += w_per_cycle[c] * (e0 - e1) / std::complex<double>(0.0, omega);
  }
  return 2.0 * z / static_cast<double>(w_per_cycle.size());
}

TEST(LockIn, ToggledFlipFlopUnderSpotGivesTwoOverPi) {
  FabricModel m = toggle_model();
  CoSim sim(m, {}, 100.0, nullptr, nullptr, 1);
  sim.set_stimulus(square("in", 40));
  sim.set_spot(spot_on(m, "f"));
  sim.begin_lockin(1.25);
  sim.advance(100000);
  // Only the target FF is within range; weight 1 at the centre. The LUT
  // positions of slice (5,5) carry no net here.
  const double amp = std::abs(sim.lockin_phasor());
  EXPECT_NEAR(amp, 2.0 / kPi, 1e-3);

  // Exact cycle-level oracle of the same run.
  std::vector<double> w(100000);
  for (std::size_t c = 0; c < w.size(); ++c)
    w[c] = (c >= 1 && ((c - 1) / 40) % 2 == 1) ? 1.0 : 0.0;
  const auto want = oracle_phasor(w, 2 * kPi * 1.25 / 100.0);
  EXPECT_NEAR(std::abs(sim.lockin_phasor() - want), 0.0, 1e-9);
}

TEST(LockIn, StaticLogicGivesNoSignal) {
  FabricModel m = toggle_model();
  CoSim sim(m, {}, 100.0, nullptr, nullptr, 1);
  sim.set_stimulus(square("in", 40));
  sim.set_spot(spot_on(m, "one"));
  sim.advance(1);  // the FF powers up at 0 and loads its constant on the first edge
  EXPECT_GT(sim.response(), 0.99);
  sim.begin_lockin(1.25);
  sim.advance(100000);
  EXPECT_LT(std::abs(sim.lockin_phasor()), 1e-9);
}

TEST(LockIn, PsfLocality) {
  for (double offset : {0.0, 8.0, 16.0, 40.0}) {
    FabricModel m = toggle_model();
    CoSim sim(m, {}, 100.0, nullptr, nullptr, 1);
    sim.set_stimulus(square("in", 40));
    LaserSpot s = spot_on(m, "f");
    s.center.y += offset;
    sim.set_spot(s);
    sim.begin_lockin(1.25);
    sim.advance(100000);
    const double want = 2.0 / kPi * std::exp(-offset * offset / (2 * 64.0));
    EXPECT_NEAR(std::abs(sim.lockin_phasor()), want, 1e-3 + 1e-3 * want)
        << offset;
  }
  FabricModel m = toggle_model();
  CoSim sim(m, {}, 100.0, nullptr, nullptr, 1);
  sim.set_stimulus(square("in", 40));
  LaserSpot off = spot_on(m, "f");
  off.enabled = false;
  sim.set_spot(off);
  sim.begin_lockin(1.25);
  sim.advance(10000);
  EXPECT_EQ(std::abs(sim.lockin_phasor()), 0.0);
}

TEST(LockIn, LinearInTheActiveSet) {
  // Two toggling FFs in one slice against one: the amplitude adds.
  const auto run = [](const std::string &text) {
    FabricModel m = fabric::parse_netlist(text);
    CoSim sim(m, {}, 100.0, nullptr, nullptr, 1);
    sim.set_stimulus(square("in", 40));
    LaserSpot s;
    s.center = {50.0, 57.5};
    s.enabled = true;
    sim.set_spot(s);
    sim.begin_lockin(1.25);
    sim.advance(50000);
    return sim.lockin_phasor();
  };
  const auto a = run("input in\nff a d=in q=qa at=5,5/1\n");
  const auto b = run("input in\nff b d=in q=qb at=5,5/2\n");
  const auto ab = run("input in\nff a d=in q=qa at=5,5/1\nff b d=in q=qb at=5,5/2\n");
  EXPECT_NEAR(std::abs(ab - (a + b)), 0.0, 1e-12);
}

TEST(Engine, SkippingMatchesCycleByCycle) {
  FabricModel m1 = toggle_model(), m2 = toggle_model();
  CoSim fast(m1, {}, 100.0, nullptr, nullptr, 1);
  CoSim slow(m2, {}, 100.0, nullptr, nullptr, 1);
  Stimulus st = square("in", 40);
  for (CoSim *s : {&fast, &slow}) {
    s->set_stimulus(st);
    s->set_spot(spot_on(s->model(), "f"));
    s->begin_lockin(1.25);
  }
  fast.advance(20000);
  for (int i = 0; i < 20000; ++i) slow.advance(1);
  EXPECT_EQ(fast.now_cycles(), slow.now_cycles());
  EXPECT_NEAR(std::abs(fast.lockin_phasor() - slow.lockin_phasor()), 0.0, 1e-12);
  EXPECT_EQ(m1.ff_state(), m2.ff_state());
}

TEST(Engine, ThermalSyncMatchesDirectIntegration) {
  FabricModel m = toggle_model();
  CoSim sim(m, {}, 100.0, nullptr, nullptr, 1);
  const LaserSpot s = spot_on(m, "f");
  sim.set_spot(s);
  sim.advance(5000);  // 50 us
  sim.sync_thermal();
  thermal::ThermalField ref(m.geometry(), {});
  ref.advance(50.0, s);
  EXPECT_NEAR(sim.thermal().delta_t({5, 5}), ref.delta_t({5, 5}), 1e-9);
  EXPECT_NEAR(ref.delta_t({5, 5}), 20.0 * (1 - std::exp(-1.0)) *
                                       thermal::unit_gaussian(
                                           fabric::distance_um(
                                               m.geometry().slice_center({5, 5}),
                                               s.center),
                                           8.0),
              1e-9);
}

class Heated : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    tuned_ = new sensor::TuneResult(
        sensor::tune(sensor::SensorModel(sensor::SensorParams{}, 42), 42));
  }
  static void TearDownTestSuite() { delete tuned_; }

  sensor::Sensor make_sensor() const {
    sensor::Sensor s({3, 7}, sensor::SensorParams{}, 42);
    s.set_tune(tuned_->tune);
    s.set_threshold(tuned_->threshold);
    return s;
  }

  static sensor::TuneResult *tuned_;
};
sensor::TuneResult *Heated::tuned_ = nullptr;

FabricModel key_model() {
  std::string text = "input rst alarm\n";
  const std::string key = "10110001";
  for (int i = 0; i < 8; ++i) {
    const std::string s = std::to_string(i);
    text += "const k" + s + " " + key[static_cast<std::size_t>(i)] + "\n";
    text += "ff key" + s + " d=k" + s + " q=kq" + s + " rst=rst at=" +
            std::to_string(4 + 3 * i) + ",8/0 reg=key:" + s + " protect\n";
  }
  return fabric::parse_netlist(text);
}

TEST_F(Heated, QuietWithoutLaser) {
  FabricModel m = key_model();
  sensor::Sensor s = make_sensor();
  CoSim sim(m, {}, 100.0, &s, nullptr, 7);
  sim.set_record_windows(true);
  sim.advance(255 * 2000);
  EXPECT_FALSE(sim.trigger_cycle());
  EXPECT_EQ(sim.counter_stats().windows, 2000u);
  ASSERT_EQ(sim.windows().size(), 2000u);
  EXPECT_LT(sim.counter_stats().max_zero_count, tuned_->threshold);
}

TEST_F(Heated, SpotOnSensorTriggersAndFarSpotDoesNot) {
  {
    FabricModel m = key_model();
    sensor::Sensor s = make_sensor();
    CoSim sim(m, {}, 100.0, &s, nullptr, 7);
    LaserSpot spot;
    spot.center = m.geometry().slice_center({3, 7});
    spot.enabled = true;
    sim.set_spot(spot);
    sim.advance(100000);
    ASSERT_TRUE(sim.trigger_cycle());
    EXPECT_EQ(*sim.trigger_cycle() % 255, 0u);
    EXPECT_TRUE(s.latched());
  }
  {
    FabricModel m = key_model();
    sensor::Sensor s = make_sensor();
    CoSim sim(m, {}, 100.0, &s, nullptr, 7);
    LaserSpot spot;
    spot.center = m.geometry().slice_center({30, 0});
    spot.enabled = true;
    sim.set_spot(spot);
    sim.advance(100000);
    EXPECT_FALSE(sim.trigger_cycle());
  }
}

TEST_F(Heated, RelocationCompletesAfterPrLatency) {
  FabricModel m = key_model();
  sensor::Sensor s = make_sensor();
  defense::DefensePolicy policy;
  policy.mode = defense::Mode::kMtdInter;
  for (int x = 0; x < 32; ++x) policy.allowed_region.push_back({x, 11});
  defense::Defense d(policy);
  CoSim sim(m, {}, 100.0, &s, &d, 7);
  const fabric::Placement before = m.placement();
  LaserSpot spot;
  spot.center = m.geometry().slice_center({3, 7});
  spot.enabled = true;
  sim.set_spot(spot);
  sim.advance(100000);  // 1 ms dwell
  ASSERT_TRUE(sim.trigger_cycle());
  ASSERT_EQ(d.events().size(), 1u);
  const auto &ev = d.events()[0];
  EXPECT_EQ(ev.fire_time, sim.time_of(*sim.trigger_cycle()));
  EXPECT_EQ((ev.completes_at - ev.fire_time).ps(), 223'000'000);
  const fabric::Placement after = m.placement();
  EXPECT_NE(after, before);
  for (std::size_t i : m.protected_ffs()) EXPECT_EQ(after[i].slice.y, 11);
  EXPECT_FALSE(d.reconfiguring());
  EXPECT_EQ(m.read_register("key"), (std::vector<std::uint8_t>{1, 0, 1, 1, 0, 0, 0, 1}));
}

TEST_F(Heated, PlacementHeldUntilCompletion) {
  FabricModel m = key_model();
  sensor::Sensor s = make_sensor();
  defense::DefensePolicy policy;
  policy.mode = defense::Mode::kMtdInter;
  for (int x = 0; x < 32; ++x) policy.allowed_region.push_back({x, 11});
  defense::Defense d(policy);
  CoSim sim(m, {}, 100.0, &s, &d, 7);
  const fabric::Placement before = m.placement();
  LaserSpot spot;
  spot.center = m.geometry().slice_center({3, 7});
  spot.enabled = true;
  sim.set_spot(spot);
  while (!sim.trigger_cycle()) sim.advance(255);
  const std::uint64_t fire = *sim.trigger_cycle();
  sim.advance_to(fire + 22299);
  EXPECT_EQ(m.placement(), before);
  EXPECT_TRUE(d.reconfiguring());
  sim.advance_to(fire + 22300);
  EXPECT_NE(m.placement(), before);
}

}  // namespace
}  // namespace probeguard::sim
