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

// Line-oriented netlist + placement description. See docs/netlist.md for the
// grammar.

#ifndef PROBEGUARD_NETLIST_HPP_
#define PROBEGUARD_NETLIST_HPP_

#include <string>
#include <string_view>

#include "probeguard/fabric.hpp"

namespace probeguard::fabric {

// Parses and finalizes a fabric. Throws ConfigError with a line number on
// syntax errors and ScenarioError on structural ones.
FabricModel parse_netlist(std::string_view text);
FabricModel load_netlist(const std::string &path);

}  // namespace probeguard::fabric

#endif  // PROBEGUARD_NETLIST_HPP_
