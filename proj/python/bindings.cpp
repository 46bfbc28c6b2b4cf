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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "probeguard/defense.hpp"
#include "probeguard/error.hpp"
#include "probeguard/harness.hpp"
#include "probeguard/sensor.hpp"

namespace py = pybind11;
namespace pg = probeguard;
namespace ph = probeguard::harness;

namespace {

py::array_t<double> image_array(const pg::attacker::EofmImage &img) {
  py::array_t<double> out({img.ny(), img.nx()});
  auto v = out.mutable_unchecked<2>();
  for (int j = 0; j < img.ny(); ++j)
    for (int i = 0; i < img.nx(); ++i) v(j, i) = img.at(i, j);
  return out;
}

py::dict tune_dict(const pg::sensor::TuneResult &r) {
  py::dict d;
  d["data_delay"] = r.tune.data_delay;
  d["clock_delay"] = r.tune.clock_delay;
  d["lut_select"] = r.tune.lut_select;
  d["threshold"] = r.threshold;
  d["idle_max_zero_count"] = r.idle.max_zero_count;
  d["idle_mean"] = r.idle.mean;
  d["probes"] = r.probes;
  return d;
}

}  // namespace

PYBIND11_MODULE(_probeguard, m) {
  m.doc() = "Laser probing attacks on a simulated FPGA fabric and their countermeasures";

  auto base = py::register_exception<pg::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<pg::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<pg::ScenarioError>(m, "ScenarioError", base.ptr());
  py::register_exception<pg::TuningFailure>(m, "TuningFailure", base.ptr());
  py::register_exception<pg::CapacityError>(m, "CapacityError", base.ptr());
  py::register_exception<pg::StabilityFailure>(m, "StabilityFailure", base.ptr());
  py::register_exception<pg::ContractViolation>(m, "ContractViolation", base.ptr());

  py::class_<ph::Scenario>(m, "Scenario")
      .def_readwrite("name", &ph::Scenario::name)
      .def_readwrite("seed", &ph::Scenario::seed)
      .def_property_readonly("has_sensor", [](const ph::Scenario &s) { return s.sensor.has_value(); })
      .def_property(
          "dwell_ms", [](const ph::Scenario &s) { return s.scan.dwell_ms; },
          [](ph::Scenario &s, double v) { s.scan.dwell_ms = v; })
      .def_property(
          "scan_region_um",
          [](const ph::Scenario &s) {
            const auto &r = s.scan.region;
            return py::make_tuple(r.x0, r.y0, r.x1, r.y1);
          },
          [](ph::Scenario &s, std::tuple<double, double, double, double> r) {
            s.scan.region = {std::get<0>(r), std::get<1>(r), std::get<2>(r), std::get<3>(r)};
          })
      .def_property(
          "eop_iterations", [](const ph::Scenario &s) { return s.eop.config.iterations; },
          [](ph::Scenario &s, int v) { s.eop.config.iterations = v; })
      .def_property(
          "stability_minutes", [](const ph::Scenario &s) { return s.stability.duration_min; },
          [](ph::Scenario &s, double v) { s.stability.duration_min = v; });

  m.def("load_scenario", &ph::load_scenario, py::arg("path"));
  m.def("parse_scenario", &ph::parse_scenario, py::arg("text"), py::arg("base_dir") = ".");

  py::class_<ph::RunResult>(m, "RunResult")
      .def_property_readonly("summary", [](const ph::RunResult &r) { return r.summary.to_text(); })
      .def_property_readonly("bits_correct", [](const ph::RunResult &r) { return r.summary.bits_correct; })
      .def_property_readonly("bits_total", [](const ph::RunResult &r) { return r.summary.bits_total; })
      .def_property_readonly("key_recovered", [](const ph::RunResult &r) { return r.summary.key_recovered; })
      .def_property_readonly("trigger_time_us", [](const ph::RunResult &r) { return r.summary.trigger_time_us; })
      .def_property_readonly("reconfig_within_dwell",
                             [](const ph::RunResult &r) { return r.summary.reconfig_within_dwell; })
      .def_property_readonly("localized",
                             [](const ph::RunResult &r) {
                               std::vector<std::pair<int, int>> out;
                               for (auto c : r.summary.localized) out.emplace_back(c.x, c.y);
                               return out;
                             })
      .def_property_readonly("function_table",
                             [](const ph::RunResult &r) {
                               std::vector<std::tuple<std::string, std::string, std::string>> out;
                               for (const auto &row : r.summary.function_table)
                                 out.emplace_back(row.a, row.b, row.out);
                               return out;
                             })
      .def_property_readonly("tune",
                             [](const ph::RunResult &r) -> py::object {
                               if (!r.summary.tune) return py::none();
                               return tune_dict(*r.summary.tune);
                             })
      .def_property_readonly("image",
                             [](const ph::RunResult &r) -> py::object {
                               if (!r.image) return py::none();
                               return image_array(*r.image);
                             })
      .def_property_readonly("traces",
                             [](const ph::RunResult &r) {
                               py::dict d;
                               for (const auto &[name, t] : r.traces)
                                 d[py::str(name)] = py::array_t<double>(
                                     static_cast<py::ssize_t>(t.values.size()), t.values.data());
                               return d;
                             })
      .def_property_readonly("stability",
                             [](const ph::RunResult &r) -> py::object {
                               if (!r.summary.stability) return py::none();
                               const auto &s = *r.summary.stability;
                               py::dict d;
                               d["windows"] = s.windows;
                               d["max_zero_count"] = s.max_zero_count;
                               d["max_rolling_average"] = s.max_rolling_average;
                               d["plateau_min"] = s.plateau_min;
                               d["false_positives"] = s.false_positives;
                               return d;
                             })
      .def_property_readonly("defense_log", [](const ph::RunResult &r) { return r.defense_log_csv; });

  m.def(
      "run",
      [](const ph::Scenario &sc, const std::string &command) {
        const ph::Command c = ph::parse_command(command);
        py::gil_scoped_release release;
        return ph::run(sc, c);
      },
      py::arg("scenario"), py::arg("command") = "attack");
  m.def("write_artifacts", &ph::write_artifacts, py::arg("result"), py::arg("out_dir"));

  m.def("chain_delay", &pg::sensor::chain_delay, py::arg("code"), py::arg("chain_length"),
        py::arg("per_tap_ps"), py::arg("base_ps"));
  m.def("chain_taps", &pg::sensor::chain_taps, py::arg("code"), py::arg("chain_length"));
  m.def(
      "tune",
      [](std::uint64_t seed, int chain_length, double jitter_ps) {
        pg::sensor::SensorParams p;
        p.chain_length = chain_length;
        p.jitter_ps = jitter_ps;
        const pg::sensor::SensorModel model(p, seed);
        return tune_dict(pg::sensor::tune(model, seed));
      },
      py::arg("seed"), py::arg("chain_length") = 8, py::arg("jitter_ps") = 15.0);
  m.def(
      "permute_intra",
      [](std::size_t n, std::uint64_t seed) {
        pg::defense::Rng rng(seed);
        return pg::defense::permute_intra(n, rng).mapping();
      },
      py::arg("n"), py::arg("seed"));
}
