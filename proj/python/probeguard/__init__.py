# Copyright 2026 The probeguard Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python front end for the probeguard simulator."""

from probeguard._probeguard import (
    CapacityError,
    ConfigError,
    ContractViolation,
    Error,
    RunResult,
    Scenario,
    ScenarioError,
    StabilityFailure,
    TuningFailure,
    chain_delay,
    chain_taps,
    load_scenario,
    parse_scenario,
    permute_intra,
    run,
    tune,
    write_artifacts,
)

__all__ = [
    "CapacityError",
    "ConfigError",
    "ContractViolation",
    "Error",
    "RunResult",
    "Scenario",
    "ScenarioError",
    "StabilityFailure",
    "TuningFailure",
    "chain_delay",
    "chain_taps",
    "load_scenario",
    "parse_scenario",
    "permute_intra",
    "run",
    "tune",
    "write_artifacts",
]
