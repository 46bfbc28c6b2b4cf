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

#ifndef PROBEGUARD_ERROR_HPP_
#define PROBEGUARD_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace probeguard {

// Process exit status for each error class surfaced by the CLI.
enum class ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kTuning = 3,
  kCapacity = 4,
  kScenario = 5,
  kStability = 6,
  kContract = 7,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &what, ExitCode code = ExitCode::kInternal)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// A caller broke an operation's precondition (wrong arity, bad code width...).
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string &what)
      : Error(what, ExitCode::kContract) {}
};

// Malformed scenario file or netlist.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string &what)
      : Error(what, ExitCode::kConfig) {}
};

// Well-formed input that cannot be simulated (cycles, out-of-fabric scans).
class ScenarioError : public Error {
 public:
  explicit ScenarioError(const std::string &what)
      : Error(what, ExitCode::kScenario) {}
};

class TuningFailure : public Error {
 public:
  explicit TuningFailure(const std::string &what)
      : Error(what, ExitCode::kTuning) {}
};

// Not enough free flip-flop slots in the relocation region.
class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string &what)
      : Error(what, ExitCode::kCapacity) {}
};

// The sensor fired while the laser was off.
class StabilityFailure : public Error {
 public:
  explicit StabilityFailure(const std::string &what)
      : Error(what, ExitCode::kStability) {}
};

}  // namespace probeguard

#endif  // PROBEGUARD_ERROR_HPP_
