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

#include "probeguard/netlist.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "probeguard/error.hpp"

namespace probeguard::fabric {
namespace {

struct Line {
  int number = 0;
  std::vector<std::string> words;
};

class Parser {
 public:
  explicit Parser(std::string_view text) { tokenize(text); }

  FabricModel build() {
    Geometry g;
    for (const Line &l : lines_) {
      line_ = l.number;
      const std::string &kw = l.words[0];
      if (kw == "grid") {
        expect_args(l, 3);
        g.width = to_int(l.words[1]);
        g.height = to_int(l.words[2]);
      } else if (kw == "pitch_um") {
        expect_args(l, 2);
        g.site_pitch_um = to_double(l.words[1]);
      } else if (kw == "slots") {
        expect_args(l, 3);
        g.ffs_per_slice = to_int(l.words[1]);
        g.luts_per_slice = to_int(l.words[2]);
      }
    }
    FabricModel model(g);
    for (const Line &l : lines_) {
      line_ = l.number;
      const std::string &kw = l.words[0];
      if (kw == "grid" || kw == "pitch_um" || kw == "slots") continue;
      try {
        build_line(model, l);
      } catch (const ContractViolation &e) {
        fail(e.what());
      }
    }
    model.finalize();
    return model;
  }

 private:
  void build_line(FabricModel &model, const Line &l) {
    const std::string &kw = l.words[0];
    if (kw == "input") {
      if (l.words.size() < 2) fail("input needs at least one net");
      for (std::size_t i = 1; i < l.words.size(); ++i)
        model.add_input(l.words[i]);
    } else if (kw == "const") {
      expect_args(l, 3);
      model.add_constant(l.words[1], to_bit(l.words[2]));
    } else if (kw == "net") {
      parse_net(model, l);
    } else if (kw == "ff") {
      parse_ff(model, l);
    } else if (kw == "lut") {
      parse_lut(model, l);
    } else if (kw == "delay") {
      parse_delay(model, l);
    } else {
      fail("unknown directive '" + kw + "'");
    }
  }

  void tokenize(std::string_view text) {
    int number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view raw = text.substr(pos, end - pos);
      ++number;
      if (auto hash = raw.find('#'); hash != std::string_view::npos)
        raw = raw.substr(0, hash);
      std::istringstream is{std::string(raw)};
      Line line{number, {}};
      for (std::string w; is >> w;) line.words.push_back(w);
      if (!line.words.empty()) lines_.push_back(std::move(line));
      pos = end + 1;
    }
  }

  [[noreturn]] void fail(const std::string &msg) const {
    throw ConfigError("netlist line " + std::to_string(line_) + ": " + msg);
  }

  void expect_args(const Line &l, std::size_t n) const {
    if (l.words.size() != n)
      fail("'" + l.words[0] + "' expects " + std::to_string(n - 1) +
           " argument(s)");
  }

  int to_int(const std::string &s) const {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      fail("expected integer, got '" + s + "'");
    return v;
  }

  double to_double(const std::string &s) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception &) {
      fail("expected number, got '" + s + "'");
    }
  }

  bool to_bit(const std::string &s) const {
    if (s == "0") return false;
    if (s == "1") return true;
    fail("expected 0 or 1, got '" + s + "'");
  }

  std::uint64_t to_init(const std::string &s) const {
    int base = 10;
    std::string digits = s;
    if (s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0) {
      base = 16;
      digits = s.substr(2);
    } else if (s.rfind("0b", 0) == 0) {
      base = 2;
      digits = s.substr(2);
    }
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(),
                                   v, base);
    if (digits.empty() || ec != std::errc() ||
        p != digits.data() + digits.size())
      fail("bad LUT init '" + s + "'");
    return v;
  }

  // key=value attributes after the cell name; bare words become flags.
  std::map<std::string, std::string> attributes(const Line &l,
                                                std::size_t first) const {
    std::map<std::string, std::string> out;
    for (std::size_t i = first; i < l.words.size(); ++i) {
      const std::string &w = l.words[i];
      const auto eq = w.find('=');
      const std::string key = eq == std::string::npos ? w : w.substr(0, eq);
      const std::string val = eq == std::string::npos ? "" : w.substr(eq + 1);
      if (!out.emplace(key, val).second) fail("duplicate attribute " + key);
    }
    return out;
  }

  const std::string &required(const std::map<std::string, std::string> &a,
                              const std::string &key) const {
    auto it = a.find(key);
    if (it == a.end() || it->second.empty())
      fail("missing attribute '" + key + "'");
    return it->second;
  }

  std::vector<std::string> split(const std::string &s, char sep) const {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
      const auto next = s.find(sep, pos);
      out.push_back(s.substr(pos, next - pos));
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    return out;
  }

  // "x,y" or "x,y/slot".
  std::pair<SliceCoord, int> to_site(const std::string &s) const {
    int slot = 0;
    std::string xy = s;
    if (auto slash = s.find('/'); slash != std::string::npos) {
      slot = to_int(s.substr(slash + 1));
      xy = s.substr(0, slash);
    }
    auto parts = split(xy, ',');
    if (parts.size() != 2) fail("bad site '" + s + "', expected x,y[/slot]");
    return {{to_int(parts[0]), to_int(parts[1])}, slot};
  }

  // Literal 0/1 become shared constant nets.
  NetId net_or_literal(FabricModel &m, const std::string &s) {
    if (s == "0" || s == "1") {
      const std::string name = s == "1" ? "$1" : "$0";
      if (!m.find_net(name)) m.add_constant(name, s == "1");
      return *m.find_net(name);
    }
    return m.net(s);
  }

  void check_known(const std::map<std::string, std::string> &a,
                   std::initializer_list<const char *> allowed) const {
    for (const auto &[k, v] : a) {
      bool ok = false;
      for (const char *name : allowed) ok = ok || k == name;
      if (!ok) fail("unknown attribute '" + k + "'");
    }
  }

  void parse_net(FabricModel &m, const Line &l) {
    if (l.words.size() < 3) fail("net needs a name and delay_ps=");
    auto a = attributes(l, 2);
    check_known(a, {"delay_ps", "centroid_um"});
    std::optional<PointUm> centroid;
    if (auto it = a.find("centroid_um"); it != a.end()) {
      auto parts = split(it->second, ',');
      if (parts.size() != 2) fail("centroid_um expects x,y");
      centroid = PointUm{to_double(parts[0]), to_double(parts[1])};
    }
    m.set_net_delay(m.net(l.words[1]), to_double(required(a, "delay_ps")),
                    centroid);
  }

  void parse_ff(FabricModel &m, const Line &l) {
    if (l.words.size() < 2) fail("ff needs a name");
    auto a = attributes(l, 2);
    check_known(a, {"d", "q", "ce", "rst", "at", "reg", "init", "protect"});
    FlipFlop f;
    f.name = l.words[1];
    f.d = net_or_literal(m, required(a, "d"));
    f.q = m.net(required(a, "q"));
    f.ce = net_or_literal(m, a.count("ce") ? a.at("ce") : "1");
    f.rst = net_or_literal(m, a.count("rst") ? a.at("rst") : "0");
    auto [slice, slot] = to_site(required(a, "at"));
    f.site = {slice, slot};
    if (auto it = a.find("reg"); it != a.end()) {
      auto parts = split(it->second, ':');
      if (parts.size() != 2) fail("reg expects name:bit");
      f.reg = parts[0];
      f.bit = to_int(parts[1]);
    }
    if (auto it = a.find("init"); it != a.end()) f.state = to_bit(it->second);
    f.protected_bit = a.count("protect") != 0;
    m.add_ff(std::move(f));
  }

  void parse_lut(FabricModel &m, const Line &l) {
    if (l.words.size() < 2) fail("lut needs a name");
    auto a = attributes(l, 2);
    check_known(a, {"init", "in", "out", "at"});
    Lut lut;
    lut.name = l.words[1];
    for (const std::string &n : split(required(a, "in"), ','))
      lut.inputs.push_back(net_or_literal(m, n));
    lut.arity = static_cast<int>(lut.inputs.size());
    lut.init_bits = to_init(required(a, "init"));
    lut.output = m.net(required(a, "out"));
    auto [slice, slot] = to_site(required(a, "at"));
    lut.site = slice;
    lut.slot = slot;
    m.add_lut(std::move(lut));
  }

  void parse_delay(FabricModel &m, const Line &l) {
    if (l.words.size() < 2) fail("delay needs a name");
    auto a = attributes(l, 2);
    check_known(a, {"in", "out", "at", "tap", "base_ps", "per_tap_ps"});
    DelayCell d;
    d.name = l.words[1];
    d.input = net_or_literal(m, required(a, "in"));
    d.output = m.net(required(a, "out"));
    d.site = to_site(required(a, "at")).first;
    const double base = a.count("base_ps") ? to_double(a.at("base_ps")) : 400.0;
    const double step =
        a.count("per_tap_ps") ? to_double(a.at("per_tap_ps")) : 78.0;
    const int tap = a.count("tap") ? to_int(a.at("tap")) : 0;
    d.element = DelayElement(base, step, tap);
    m.add_delay(std::move(d));
  }

  std::vector<Line> lines_;
  int line_ = 0;
};

}  // namespace

FabricModel parse_netlist(std::string_view text) {
  return Parser(text).build();
}

FabricModel load_netlist(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open netlist '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_netlist(ss.str());
}

}  // namespace probeguard::fabric
