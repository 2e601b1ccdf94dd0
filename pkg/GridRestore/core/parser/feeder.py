# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""馈线文件解析与校验

馈线文件为UTF-8编码的JSON文档,顶层键: s_base_kva, p_gen_cap_kw, buses, branches, switches, loads, ders, microgrids
未知键视为格式错误(严格模式)
"""

import json
from collections import Counter
from collections.abc import Iterable
from pathlib import Path

import pydantic
from pydantic import BaseModel, ConfigDict

from GridRestore.common.exceptions import ParseError, ValidationError
from GridRestore.common.logger import logger
from GridRestore.common.models import Branch, Bus, Der, FeederGraph, Load, MicrogridRegion, Switch, SwitchState
from GridRestore.core.topology import connected_components


class _Schema(BaseModel):
    model_config = ConfigDict(extra="forbid")


class _BusSchema(_Schema):
    id: str
    base_kv: float
    is_source: bool = False


class _BranchSchema(_Schema):
    id: str
    from_bus: str
    to_bus: str
    r_pu: float
    x_pu: float
    s_max_pu: float
    switch_id: str | None = None


class _SwitchSchema(_Schema):
    id: str
    branch_id: str
    state: SwitchState = SwitchState.OPEN
    owner_microgrid: int


class _LoadSchema(_Schema):
    id: str
    bus_id: str
    p_demand_kw: float
    q_demand_kvar: float = 0.0
    priority: int = 1


class _DerSchema(_Schema):
    id: str
    bus_id: str
    p_min_kw: float = 0.0
    p_max_kw: float
    q_min_kvar: float = 0.0
    q_max_kvar: float = 0.0
    owner_microgrid: int


class _MicrogridSchema(_Schema):
    index: int
    bus_ids: list[str]
    switch_ids: list[str]
    load_ids: list[str]
    der_ids: list[str] = []


class _FeederSchema(_Schema):
    s_base_kva: float
    p_gen_cap_kw: float = 2400.0
    buses: list[_BusSchema]
    branches: list[_BranchSchema]
    switches: list[_SwitchSchema] = []
    loads: list[_LoadSchema] = []
    ders: list[_DerSchema] = []
    microgrids: list[_MicrogridSchema] = []


def _format_pydantic_error(error: pydantic.ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def _check_unique(kind: str, ids: Iterable[str]) -> None:
    duplicated = [item for item, count in Counter(ids).items() if count > 1]
    if duplicated:
        msg = f"重复的{kind} id: {duplicated[0]}"
        raise ValidationError(msg, element=duplicated[0])


def parse_feeder(data: object) -> FeederGraph:
    """将已解码的馈线文档转换为FeederGraph并校验全部不变量"""
    try:
        schema = _FeederSchema.model_validate(data)
    except pydantic.ValidationError as e:
        msg = f"馈线文件格式错误: {_format_pydantic_error(e)}"
        raise ParseError(msg) from e

    graph = FeederGraph(
        s_base_kva=schema.s_base_kva,
        p_gen_cap_kw=schema.p_gen_cap_kw,
        buses=tuple(Bus(b.id, b.base_kv, b.is_source) for b in schema.buses),
        branches=tuple(Branch(br.id, br.from_bus, br.to_bus, br.r_pu, br.x_pu, br.s_max_pu, br.switch_id) for br in schema.branches),
        switches=tuple(Switch(sw.id, sw.branch_id, sw.state, sw.owner_microgrid) for sw in schema.switches),
        loads=tuple(Load(ld.id, ld.bus_id, ld.p_demand_kw, ld.q_demand_kvar, ld.priority) for ld in schema.loads),
        ders=tuple(Der(d.id, d.bus_id, d.p_min_kw, d.p_max_kw, d.q_min_kvar, d.q_max_kvar, d.owner_microgrid) for d in schema.ders),
        microgrids=tuple(
            MicrogridRegion(mg.index, tuple(mg.bus_ids), tuple(mg.switch_ids), tuple(mg.load_ids), tuple(mg.der_ids)) for mg in schema.microgrids
        ),
    )
    validate_feeder(graph)
    return graph


def load_feeder(path: str | Path) -> FeederGraph:
    """读取并校验馈线文件

    :param path: 馈线文件路径
    :return: 校验通过的FeederGraph
    :raises ParseError: 文件无法读取/解析或含未知键
    :raises ValidationError: 违反不变量,信息中包含出错元素
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        msg = f"无法读取馈线文件 {path}: {e}"
        raise ParseError(msg) from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        msg = f"馈线文件不是合法的JSON ({path}): {e}"
        raise ParseError(msg) from e

    graph = parse_feeder(data)
    logger.info(
        f"已加载馈线 {path.name}: {len(graph.buses)} 母线, {len(graph.branches)} 支路, {len(graph.switches)} 开关, "
        f"{len(graph.loads)} 负荷, {len(graph.ders)} DER, {len(graph.microgrids)} 微电网",
    )
    return graph


def validate_feeder(graph: FeederGraph) -> None:  # noqa: C901, PLR0912
    """校验元素级不变量、全闭合连通性以及(存在分区时的)微电网分区"""
    if graph.s_base_kva <= 0:
        msg = f"s_base_kva 必须为正数: {graph.s_base_kva}"
        raise ValidationError(msg, element="s_base_kva")
    if graph.p_gen_cap_kw <= 0:
        msg = f"p_gen_cap_kw 必须为正数: {graph.p_gen_cap_kw}"
        raise ValidationError(msg, element="p_gen_cap_kw")

    _check_unique("母线", (bus.id for bus in graph.buses))
    _check_unique("支路", (branch.id for branch in graph.branches))
    _check_unique("开关", (switch.id for switch in graph.switches))
    _check_unique("负荷", (load.id for load in graph.loads))
    _check_unique("DER", (der.id for der in graph.ders))
    if not graph.buses:
        msg = "馈线至少需要一条母线"
        raise ValidationError(msg)

    region_indices = {region.index for region in graph.microgrids}

    for bus in graph.buses:
        if bus.base_kv <= 0:
            msg = f"母线 {bus.id} 的 base_kv 必须为正数"
            raise ValidationError(msg, element=bus.id)

    for branch in graph.branches:
        if branch.from_bus == branch.to_bus:
            msg = f"支路 {branch.id} 的两端为同一母线 {branch.from_bus}"
            raise ValidationError(msg, element=branch.id)
        for end in (branch.from_bus, branch.to_bus):
            if end not in graph.bus_map:
                msg = f"支路 {branch.id} 引用了不存在的母线 {end}"
                raise ValidationError(msg, element=branch.id)
        if branch.r_pu < 0 or branch.x_pu < 0 or (branch.r_pu == 0 and branch.x_pu == 0):
            msg = f"支路 {branch.id} 的阻抗非法 (r={branch.r_pu}, x={branch.x_pu})"
            raise ValidationError(msg, element=branch.id)
        if branch.s_max_pu <= 0:
            msg = f"支路 {branch.id} 的 s_max_pu 必须为正数"
            raise ValidationError(msg, element=branch.id)
        if branch.switch_id is not None:
            switch = graph.switch_map.get(branch.switch_id)
            if switch is None or switch.branch_id != branch.id:
                msg = f"支路 {branch.id} 的开关 {branch.switch_id} 不存在或未指向该支路"
                raise ValidationError(msg, element=branch.id)

    for switch in graph.switches:
        branch = graph.branch_map.get(switch.branch_id)
        if branch is None or branch.switch_id != switch.id:
            msg = f"开关 {switch.id} 必须且只能对应一条支路 (branch_id={switch.branch_id})"
            raise ValidationError(msg, element=switch.id)
        if region_indices and switch.owner_microgrid not in region_indices:
            msg = f"开关 {switch.id} 的 owner_microgrid {switch.owner_microgrid} 不存在"
            raise ValidationError(msg, element=switch.id)

    for load in graph.loads:
        if load.bus_id not in graph.bus_map:
            msg = f"负荷 {load.id} 引用了不存在的母线 {load.bus_id}"
            raise ValidationError(msg, element=load.id)
        if load.p_demand_kw < 0:
            msg = f"负荷 {load.id} 的 p_demand_kw 不能为负"
            raise ValidationError(msg, element=load.id)
        if not 1 <= load.priority <= 10:
            msg = f"负荷 {load.id} 的优先级 {load.priority} 不在 1..10 内"
            raise ValidationError(msg, element=load.id)

    for der in graph.ders:
        if der.bus_id not in graph.bus_map:
            msg = f"DER {der.id} 引用了不存在的母线 {der.bus_id}"
            raise ValidationError(msg, element=der.id)
        if der.p_min_kw < 0 or der.p_min_kw > der.p_max_kw or der.q_min_kvar > der.q_max_kvar:
            msg = f"DER {der.id} 的出力上下限非法"
            raise ValidationError(msg, element=der.id)
        if region_indices and der.owner_microgrid not in region_indices:
            msg = f"DER {der.id} 的 owner_microgrid {der.owner_microgrid} 不存在"
            raise ValidationError(msg, element=der.id)

    if len(connected_components(graph, graph.all_closed())) != 1:
        msg = "全部开关闭合时馈线不连通"
        raise ValidationError(msg, element="topology")

    if graph.microgrids:
        validate_partition(graph)


def validate_partition(graph: FeederGraph) -> None:  # noqa: C901
    """确认微电网区域划分母线集合,且开关归属互不相交

    :raises ValidationError: element 为出错区域的编号
    """
    _check_unique("微电网", (str(region.index) for region in graph.microgrids))
    seen_buses: dict[str, int] = {}
    seen_switches: dict[str, int] = {}

    for region in graph.microgrids:
        if not region.switch_ids:
            msg = f"微电网 {region.index} 没有任何开关"
            raise ValidationError(msg, element=region.index)
        if not region.load_ids:
            msg = f"微电网 {region.index} 没有任何负荷"
            raise ValidationError(msg, element=region.index)
        for bus_id in region.bus_ids:
            if bus_id not in graph.bus_map:
                msg = f"微电网 {region.index} 引用了不存在的母线 {bus_id}"
                raise ValidationError(msg, element=region.index)
            if bus_id in seen_buses:
                msg = f"母线 {bus_id} 同时属于微电网 {seen_buses[bus_id]} 和 {region.index}"
                raise ValidationError(msg, element=region.index)
            seen_buses[bus_id] = region.index
        for switch_id in region.switch_ids:
            switch = graph.switch_map.get(switch_id)
            if switch is None:
                msg = f"微电网 {region.index} 引用了不存在的开关 {switch_id}"
                raise ValidationError(msg, element=region.index)
            if switch_id in seen_switches:
                msg = f"开关 {switch_id} 同时属于微电网 {seen_switches[switch_id]} 和 {region.index}"
                raise ValidationError(msg, element=region.index)
            if switch.owner_microgrid != region.index:
                msg = f"开关 {switch_id} 的 owner_microgrid 与微电网 {region.index} 不一致"
                raise ValidationError(msg, element=region.index)
            seen_switches[switch_id] = region.index
        region_buses = set(region.bus_ids)
        for load_id in region.load_ids:
            load = graph.load_map.get(load_id)
            if load is None or load.bus_id not in region_buses:
                msg = f"微电网 {region.index} 的负荷 {load_id} 不存在或不在该区域的母线上"
                raise ValidationError(msg, element=region.index)
        for der_id in region.der_ids:
            der = graph.der_map.get(der_id)
            if der is None or der.bus_id not in region_buses or der.owner_microgrid != region.index:
                msg = f"微电网 {region.index} 的DER {der_id} 不存在、不在该区域或归属不一致"
                raise ValidationError(msg, element=region.index)

    uncovered = [bus.id for bus in graph.buses if bus.id not in seen_buses]
    if uncovered:
        msg = f"母线 {uncovered[0]} 不属于任何微电网"
        raise ValidationError(msg, element=uncovered[0])
    unowned = [switch.id for switch in graph.switches if switch.id not in seen_switches]
    if unowned:
        msg = f"开关 {unowned[0]} 未列入其所属微电网"
        raise ValidationError(msg, element=unowned[0])
