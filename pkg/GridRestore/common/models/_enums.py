# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

from enum import Enum
from typing import Any, TypeVar

__all__ = ["Algorithm", "DeltaMode", "FeasibilityMode", "IslandStatus", "SwitchState", "UpdateOrder", "get_enum"]


class SwitchState(Enum):
    OPEN = "Open"
    CLOSED = "Closed"

    @property
    def closed(self) -> bool:
        return self is SwitchState.CLOSED

    @property
    def toggled(self) -> "SwitchState":
        return SwitchState.OPEN if self is SwitchState.CLOSED else SwitchState.CLOSED


class IslandStatus(Enum):
    ENERGIZED = "energized"
    DEAD = "dead"  # 无电源、无DER
    NOT_RADIAL = "not_radial"
    NO_CONVERGENCE = "no_convergence"

    @property
    def served(self) -> bool:
        return self is IslandStatus.ENERGIZED


class Algorithm(Enum):
    HAPPO = "happo"
    INDEPENDENT_PPO = "independent-ppo"
    RANDOM = "random"
    GREEDY = "greedy"

    @property
    def learns(self) -> bool:
        return self in (Algorithm.HAPPO, Algorithm.INDEPENDENT_PPO)


class FeasibilityMode(Enum):
    STRICT = "strict"
    PENALTY_FREE_BEST = "penalty-free-best"


class UpdateOrder(Enum):
    FIXED = "fixed"
    RANDOM = "random"


class DeltaMode(Enum):
    WEIGHTED_FRACTION = "weighted_fraction"
    WEIGHTED_KW = "weighted_kw"
    RAW_KW = "raw_kw"


E = TypeVar("E", bound=Enum)


def get_enum(enum: type[E], value: Any) -> E:
    """按值或名称获取枚举成员"""
    if isinstance(value, enum):
        return value
    try:
        return enum(value)
    except ValueError:
        if isinstance(value, str) and value.upper() in enum.__members__:
            return enum.__members__[value.upper()]
        raise
