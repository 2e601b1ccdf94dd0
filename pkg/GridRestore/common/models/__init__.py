# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

from typing import ParamSpec, TypeVar

from ._config import BenchmarkConfig, ConstraintNorms, EvalConfig, RewardConfig, RunConfig, ScenarioConfig, TrainConfig
from ._enums import Algorithm, DeltaMode, FeasibilityMode, IslandStatus, SwitchState, UpdateOrder, get_enum
from ._feeder import Branch, Bus, Der, FeederGraph, IslandSet, Load, MicrogridRegion, Switch
from ._state import PQ, BranchFlow, DispatchPlan, IslandResult, Observation, PowerFlowResult, ScenarioSpec, StepInfo, ViolationReport

__all__ = [
    "PQ",
    "Algorithm",
    "BenchmarkConfig",
    "Branch",
    "BranchFlow",
    "Bus",
    "ConstraintNorms",
    "DeltaMode",
    "Der",
    "DispatchPlan",
    "EvalConfig",
    "FeasibilityMode",
    "FeederGraph",
    "IslandResult",
    "IslandSet",
    "IslandStatus",
    "Load",
    "MicrogridRegion",
    "Observation",
    "P",
    "PowerFlowResult",
    "RewardConfig",
    "RunConfig",
    "ScenarioConfig",
    "ScenarioSpec",
    "StepInfo",
    "Switch",
    "SwitchState",
    "T",
    "TrainConfig",
    "UpdateOrder",
    "ViolationReport",
    "get_enum",
]

P = ParamSpec("P")
T = TypeVar("T")
