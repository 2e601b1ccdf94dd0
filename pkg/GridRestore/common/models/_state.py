# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
from collections.abc import Mapping
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import NamedTuple, NewType

import numpy as np

from ._enums import IslandStatus, SwitchState
from ._feeder import IslandSet

__all__ = [
    "BranchFlow",
    "DispatchPlan",
    "IslandResult",
    "Observation",
    "PQ",
    "PowerFlowResult",
    "ScenarioSpec",
    "StepInfo",
    "ViolationReport",
]

Observation = NewType("Observation", np.ndarray)


class PQ(NamedTuple):
    p_kw: float
    q_kvar: float


class BranchFlow(NamedTuple):
    p_kw: float
    q_kvar: float
    s_kva: float


@dataclass(frozen=True, slots=True)
class DispatchPlan:
    """DER调度方案

    der_setpoints 为钳位后的定出力DER设定值, requested 为钳位前的比例分配值
    island_slack 的值为DER id或源节点id(平衡节点)
    """

    der_setpoints: Mapping[str, PQ]
    island_slack: Mapping[int, str]
    requested: Mapping[str, PQ] = field(default_factory=dict)
    der_scale: float = 1.0

    def slack_of(self, island_index: int) -> str | None:
        return self.island_slack.get(island_index)


@dataclass(frozen=True, slots=True)
class IslandResult:
    """单个孤岛的潮流结果(solve_island的部分结果)"""

    status: IslandStatus
    v_pu: Mapping[str, float]
    flows: Mapping[str, BranchFlow]
    p_loss_kw: float
    q_loss_kvar: float
    served: Mapping[str, float]
    slack_id: str | None
    slack_required: PQ  # 平衡节点需要承担的注入
    iterations: int
    max_mismatch_pu: float


@dataclass(frozen=True, slots=True)
class PowerFlowResult:
    converged: bool
    v_pu: Mapping[str, float]
    flows: Mapping[str, BranchFlow]
    p_loss_kw: float
    served: Mapping[str, float]
    energized: frozenset[str]
    iterations: int
    der_output: Mapping[str, PQ] = field(default_factory=dict)  # 钳位后的实际出力
    der_required: Mapping[str, PQ] = field(default_factory=dict)  # 平衡DER所需出力(钳位前)
    source_injection_kw: float = 0.0
    island_status: tuple[tuple[IslandSet, IslandStatus], ...] = ()
    loading: Mapping[str, float] = field(default_factory=dict)  # s/s_max
    plan: DispatchPlan = field(default_factory=lambda: DispatchPlan(MappingProxyType({}), MappingProxyType({})), repr=False, compare=False)

    @property
    def served_kw(self) -> float:
        return sum(self.served.values())

    @property
    def der_total_kw(self) -> float:
        return sum(pq.p_kw for pq in self.der_output.values())

    def islands_with(self, status: IslandStatus) -> list[IslandSet]:
        return [island for island, island_status in self.island_status if island_status is status]


@dataclass(frozen=True, slots=True)
class ViolationReport:
    c1_kw: float = 0.0
    c2_pu: float = 0.0
    c3_kw: float = 0.0
    c4_kva: float = 0.0
    c5_kw: float = 0.0
    c6_kw: float = 0.0
    xi: float = 0.0

    @property
    def fields(self) -> tuple[float, float, float, float, float, float]:
        return (self.c1_kw, self.c2_pu, self.c3_kw, self.c4_kva, self.c5_kw, self.c6_kw)

    @property
    def feasible(self) -> bool:
        return self.xi == 0.0


@dataclass(frozen=True, slots=True)
class ScenarioSpec:
    """一个回合的随机场景"""

    seed: int
    faulted_branch_ids: frozenset[str]
    priority_assignment: Mapping[str, int]
    der_scale: float
    initial_switch_states: Mapping[str, SwitchState]

    def __post_init__(self) -> None:
        object.__setattr__(self, "priority_assignment", MappingProxyType(dict(self.priority_assignment)))
        object.__setattr__(self, "initial_switch_states", MappingProxyType(dict(self.initial_switch_states)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScenarioSpec):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.faulted_branch_ids == other.faulted_branch_ids
            and dict(self.priority_assignment) == dict(other.priority_assignment)
            and self.der_scale == other.der_scale
            and dict(self.initial_switch_states) == dict(other.initial_switch_states)
        )

    def __hash__(self) -> int:
        return hash((self.seed, self.faulted_branch_ids, tuple(sorted(self.priority_assignment.items())), self.der_scale))

    def cache_key(self) -> str:
        faulted = ",".join(sorted(self.faulted_branch_ids))
        priorities = ",".join(f"{k}={v}" for k, v in sorted(self.priority_assignment.items()))
        return f"{faulted}|{priorities}|{self.der_scale!r}"


@dataclass(frozen=True, slots=True)
class StepInfo:
    report: ViolationReport
    xi: float  # 含锁定惩罚的ξ
    restored_kw: float
    weighted_kw: float
    weighted_fraction: float
    p_loss_kw: float
    lock_violations: int
    t: int
    result: PowerFlowResult | None = field(default=None, repr=False)
