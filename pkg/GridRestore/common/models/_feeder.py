# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
import hashlib
import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any

from ._enums import SwitchState

__all__ = ["Branch", "Bus", "Der", "FeederGraph", "IslandSet", "Load", "MicrogridRegion", "Switch"]

IslandSet = frozenset[str]


@dataclass(frozen=True, slots=True)
class Bus:
    id: str
    base_kv: float
    is_source: bool = False


@dataclass(frozen=True, slots=True)
class Branch:
    id: str
    from_bus: str
    to_bus: str
    r_pu: float
    x_pu: float
    s_max_pu: float
    switch_id: str | None = None

    @property
    def z_pu(self) -> complex:
        return complex(self.r_pu, self.x_pu)


@dataclass(frozen=True, slots=True)
class Switch:
    id: str
    branch_id: str
    state: SwitchState
    owner_microgrid: int


@dataclass(frozen=True, slots=True)
class Load:
    id: str
    bus_id: str
    p_demand_kw: float
    q_demand_kvar: float
    priority: int


@dataclass(frozen=True, slots=True)
class Der:
    id: str
    bus_id: str
    p_min_kw: float
    p_max_kw: float
    q_min_kvar: float
    q_max_kvar: float
    owner_microgrid: int


@dataclass(frozen=True, slots=True)
class MicrogridRegion:
    index: int
    bus_ids: tuple[str, ...]
    switch_ids: tuple[str, ...]  # 𝒬_i,顺序即该智能体的本地开关编号
    load_ids: tuple[str, ...]
    der_ids: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class FeederGraph:
    """馈线静态网络 G=(N,E)

    加载后不可变,可在多个并行的环境实例之间只读共享
    """

    s_base_kva: float
    p_gen_cap_kw: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    switches: tuple[Switch, ...]
    loads: tuple[Load, ...]
    ders: tuple[Der, ...]
    microgrids: tuple[MicrogridRegion, ...]

    bus_map: Mapping[str, Bus] = field(init=False, repr=False, compare=False)
    branch_map: Mapping[str, Branch] = field(init=False, repr=False, compare=False)
    switch_map: Mapping[str, Switch] = field(init=False, repr=False, compare=False)
    load_map: Mapping[str, Load] = field(init=False, repr=False, compare=False)
    der_map: Mapping[str, Der] = field(init=False, repr=False, compare=False)
    region_of_bus: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        # 重复id由校验阶段报告,这里只建立查找表
        object.__setattr__(self, "bus_map", MappingProxyType({bus.id: bus for bus in self.buses}))
        object.__setattr__(self, "branch_map", MappingProxyType({branch.id: branch for branch in self.branches}))
        object.__setattr__(self, "switch_map", MappingProxyType({switch.id: switch for switch in self.switches}))
        object.__setattr__(self, "load_map", MappingProxyType({load.id: load for load in self.loads}))
        object.__setattr__(self, "der_map", MappingProxyType({der.id: der for der in self.ders}))
        object.__setattr__(
            self,
            "region_of_bus",
            MappingProxyType({bus_id: region.index for region in self.microgrids for bus_id in region.bus_ids}),
        )

    @property
    def bus_ids(self) -> tuple[str, ...]:
        return tuple(bus.id for bus in self.buses)

    @property
    def switch_ids(self) -> tuple[str, ...]:
        return tuple(switch.id for switch in self.switches)

    @property
    def source_bus_ids(self) -> frozenset[str]:
        return frozenset(bus.id for bus in self.buses if bus.is_source)

    @property
    def total_demand_kw(self) -> float:
        return sum(load.p_demand_kw for load in self.loads)

    def all_closed(self) -> dict[str, SwitchState]:
        return dict.fromkeys(self.switch_ids, SwitchState.CLOSED)

    def all_open(self) -> dict[str, SwitchState]:
        return dict.fromkeys(self.switch_ids, SwitchState.OPEN)

    def to_dict(self) -> dict[str, Any]:
        """转换为馈线文件结构(字段名与文件中的键一致)"""
        return {
            "s_base_kva": self.s_base_kva,
            "p_gen_cap_kw": self.p_gen_cap_kw,
            "buses": [{"id": b.id, "base_kv": b.base_kv, "is_source": b.is_source} for b in self.buses],
            "branches": [
                {
                    "id": br.id,
                    "from_bus": br.from_bus,
                    "to_bus": br.to_bus,
                    "r_pu": br.r_pu,
                    "x_pu": br.x_pu,
                    "s_max_pu": br.s_max_pu,
                    "switch_id": br.switch_id,
                }
                for br in self.branches
            ],
            "switches": [
                {"id": sw.id, "branch_id": sw.branch_id, "state": sw.state.value, "owner_microgrid": sw.owner_microgrid} for sw in self.switches
            ],
            "loads": [
                {"id": ld.id, "bus_id": ld.bus_id, "p_demand_kw": ld.p_demand_kw, "q_demand_kvar": ld.q_demand_kvar, "priority": ld.priority}
                for ld in self.loads
            ],
            "ders": [
                {
                    "id": d.id,
                    "bus_id": d.bus_id,
                    "p_min_kw": d.p_min_kw,
                    "p_max_kw": d.p_max_kw,
                    "q_min_kvar": d.q_min_kvar,
                    "q_max_kvar": d.q_max_kvar,
                    "owner_microgrid": d.owner_microgrid,
                }
                for d in self.ders
            ],
            "microgrids": [
                {
                    "index": mg.index,
                    "bus_ids": list(mg.bus_ids),
                    "switch_ids": list(mg.switch_ids),
                    "load_ids": list(mg.load_ids),
                    "der_ids": list(mg.der_ids),
                }
                for mg in self.microgrids
            ],
        }

    def fingerprint(self) -> str:
        """规范化JSON的sha256,用于缓存键与检查点匹配"""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
