# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""单相平衡等值潮流计算

每个带电孤岛以前推回代法求解:
- 平衡节点电压固定为 1.0∠0
- 负荷为恒功率(PQ)模型,带电即全额供电
- 含环路的孤岛与不收敛的孤岛一律视为失电,并分别记录日志
"""

import cmath
from collections import deque
from collections.abc import Mapping, Sequence
from types import MappingProxyType

from GridRestore.common.exceptions import NoConvergenceError, NotRadialError
from GridRestore.common.logger import logger
from GridRestore.common.models import (
    PQ,
    Branch,
    BranchFlow,
    DispatchPlan,
    FeederGraph,
    IslandResult,
    IslandSet,
    IslandStatus,
    PowerFlowResult,
    SwitchState,
)

from .topology import closed_branches, connected_components, find_cycle_branch

TOL_PU = 1e-8
MAX_ITERATIONS = 100

_ZERO_FLOW = BranchFlow(0.0, 0.0, 0.0)


def _clamp(value: float, lower: float, upper: float) -> float:
    return min(max(value, lower), upper)


def dispatch_ders(graph: FeederGraph, islands: Sequence[IslandSet], der_scale: float = 1.0) -> DispatchPlan:
    """为每个孤岛指定平衡节点与定出力DER的设定值

    - 含源节点的孤岛: 源节点为平衡节点(无论是否有DER)
    - 否则 p_max 最大的DER为平衡节点(相同时取文件中靠前者)
    - 其余DER按容量比例出力: p = p_max·min(1, D/C),D为孤岛负荷,C为孤岛DER总容量
    - 既无源节点也无DER的孤岛没有平衡节点(失电)
    """
    setpoints: dict[str, PQ] = {}
    requested: dict[str, PQ] = {}
    island_slack: dict[int, str] = {}

    for index, island in enumerate(islands):
        ders = [der for der in graph.ders if der.bus_id in island]
        sources = [bus.id for bus in graph.buses if bus.is_source and bus.id in island]

        if sources:
            slack = sources[0]
        elif ders:
            slack = max(ders, key=lambda der: der.p_max_kw).id  # max 在并列时返回第一个
        else:
            continue
        island_slack[index] = slack

        demand = sum(load.p_demand_kw for load in graph.loads if load.bus_id in island)
        capacity = sum(der.p_max_kw * der_scale for der in ders)
        ratio = min(1.0, demand / capacity) if capacity > 0 else 0.0
        for der in ders:
            if der.id == slack:
                continue
            p_max, p_min = der.p_max_kw * der_scale, der.p_min_kw * der_scale
            requested[der.id] = PQ(p_max * ratio, 0.0)
            setpoints[der.id] = PQ(_clamp(p_max * ratio, p_min, p_max), _clamp(0.0, der.q_min_kvar, der.q_max_kvar))

    return DispatchPlan(
        der_setpoints=MappingProxyType(setpoints),
        island_slack=MappingProxyType(island_slack),
        requested=MappingProxyType(requested),
        der_scale=der_scale,
    )


def _slack_bus(graph: FeederGraph, slack_id: str) -> str:
    der = graph.der_map.get(slack_id)
    return der.bus_id if der is not None else slack_id


def _find_slack(graph: FeederGraph, island: IslandSet, plan: DispatchPlan) -> str | None:
    for slack_id in plan.island_slack.values():
        if _slack_bus(graph, slack_id) in island:
            return slack_id
    return None


def _dead_island(graph: FeederGraph, island: IslandSet, branches: Sequence[Branch], status: IslandStatus) -> IslandResult:
    return IslandResult(
        status=status,
        v_pu=MappingProxyType(dict.fromkeys(sorted(island), 0.0)),
        flows=MappingProxyType(dict.fromkeys((branch.id for branch in branches), _ZERO_FLOW)),
        p_loss_kw=0.0,
        q_loss_kvar=0.0,
        served=MappingProxyType({load.id: 0.0 for load in graph.loads if load.bus_id in island}),
        slack_id=None,
        slack_required=PQ(0.0, 0.0),
        iterations=0,
        max_mismatch_pu=0.0,
    )


def solve_island(  # noqa: C901, PLR0915
    graph: FeederGraph,
    island: IslandSet,
    plan: DispatchPlan,
    switch_states: Mapping[str, SwitchState],
    tol_pu: float = TOL_PU,
    max_iterations: int = MAX_ITERATIONS,
) -> IslandResult:
    """前推回代求解单个孤岛

    :raises NotRadialError: 孤岛在当前开关状态下含环路
    :raises NoConvergenceError: 达到迭代上限仍未收敛,或电压崩溃
    """
    branches = closed_branches(graph, switch_states, island)
    cycle = find_cycle_branch(branches)
    if cycle is not None:
        msg = f"孤岛含环路(支路 {cycle.id} 闭合成环)"
        raise NotRadialError(msg, island=island)

    slack_id = _find_slack(graph, island, plan)
    if slack_id is None:
        return _dead_island(graph, island, branches, IslandStatus.DEAD)
    root = _slack_bus(graph, slack_id)
    s_base = graph.s_base_kva

    # 各母线净负荷(标幺值) = 负荷 - 定出力DER注入
    s_net: dict[str, complex] = dict.fromkeys((bus_id for bus_id in graph.bus_ids if bus_id in island), 0j)
    for load in graph.loads:
        if load.bus_id in island:
            s_net[load.bus_id] += complex(load.p_demand_kw, load.q_demand_kvar) / s_base
    for der_id, setpoint in plan.der_setpoints.items():
        der = graph.der_map[der_id]
        if der.bus_id in island and der_id != slack_id:
            s_net[der.bus_id] -= complex(setpoint.p_kw, setpoint.q_kvar) / s_base

    # 以平衡节点为根建立广度优先树
    adjacency: dict[str, list[Branch]] = {bus_id: [] for bus_id in island}
    for branch in branches:
        adjacency[branch.from_bus].append(branch)
        adjacency[branch.to_bus].append(branch)
    order = [root]
    parent_branch: dict[str, Branch] = {}
    parent: dict[str, str] = {}
    queue = deque([root])
    visited = {root}
    while queue:
        bus_id = queue.popleft()
        for branch in adjacency[bus_id]:
            child = branch.to_bus if branch.from_bus == bus_id else branch.from_bus
            if child in visited:
                continue
            visited.add(child)
            parent[child] = bus_id
            parent_branch[child] = branch
            order.append(child)
            queue.append(child)

    v: dict[str, complex] = dict.fromkeys(order, 1.0 + 0j)
    current: dict[str, complex] = {}  # 流入各非根母线的支路电流
    mismatch = float("inf")
    iterations = 0

    def backward_sweep() -> dict[str, complex]:
        injection = {bus_id: (s_net[bus_id] / v[bus_id]).conjugate() for bus_id in order}
        branch_current = dict.fromkeys(order[1:], 0j)
        for bus_id in reversed(order[1:]):
            branch_current[bus_id] += injection[bus_id]
            up = parent[bus_id]
            if up != root:
                branch_current[up] += branch_current[bus_id]
        return branch_current

    while iterations < max_iterations:
        iterations += 1
        current = backward_sweep()
        v_old = v.copy()
        for bus_id in order[1:]:
            v[bus_id] = v[parent[bus_id]] - parent_branch[bus_id].z_pu * current[bus_id]
        if any(abs(v[bus_id]) < 1e-6 or cmath.isnan(v[bus_id]) for bus_id in order):
            msg = f"孤岛电压崩溃(第 {iterations} 次迭代)"
            raise NoConvergenceError(msg, island=island)
        mismatch = max(
            (abs(v[bus_id] * s_net[bus_id] / v_old[bus_id] - s_net[bus_id]) for bus_id in order[1:]),
            default=0.0,
        )
        if mismatch < tol_pu:
            break
    else:
        msg = f"前推回代 {max_iterations} 次迭代未收敛 (失配 {mismatch:.3e} pu)"
        raise NoConvergenceError(msg, island=island)

    current = backward_sweep()
    flows: dict[str, BranchFlow] = {}
    p_loss = q_loss = 0.0
    for bus_id in order[1:]:
        branch = parent_branch[bus_id]
        j = current[bus_id]
        loss = branch.z_pu * abs(j) ** 2
        s_recv = v[bus_id] * j.conjugate()
        s_send = s_recv + loss
        p_loss += loss.real
        q_loss += loss.imag
        # 以 from_bus -> to_bus 为正方向,在 from_bus 端计量
        directed = s_send if branch.from_bus == parent[bus_id] else -s_recv
        flows[branch.id] = BranchFlow(directed.real * s_base, directed.imag * s_base, max(abs(s_send), abs(s_recv)) * s_base)

    slack_required = sum(s_net.values(), 0j) + complex(p_loss, q_loss)
    return IslandResult(
        status=IslandStatus.ENERGIZED,
        v_pu=MappingProxyType({bus_id: abs(v[bus_id]) for bus_id in sorted(island)}),
        flows=MappingProxyType(flows),
        p_loss_kw=p_loss * s_base,
        q_loss_kvar=q_loss * s_base,
        served=MappingProxyType({load.id: load.p_demand_kw for load in graph.loads if load.bus_id in island}),
        slack_id=slack_id,
        slack_required=PQ(slack_required.real * s_base, slack_required.imag * s_base),
        iterations=iterations,
        max_mismatch_pu=mismatch,
    )


def solve_system(  # noqa: C901
    graph: FeederGraph,
    switch_states: Mapping[str, SwitchState],
    der_scale: float = 1.0,
) -> PowerFlowResult:
    """对所有孤岛求解潮流并合并结果

    单个孤岛的失败只会使该孤岛失电,不会中断调用方
    """
    islands = connected_components(graph, switch_states)
    plan = dispatch_ders(graph, islands, der_scale)

    v_pu: dict[str, float] = {}
    flows: dict[str, BranchFlow] = dict.fromkeys((branch.id for branch in graph.branches), _ZERO_FLOW)
    served: dict[str, float] = dict.fromkeys((load.id for load in graph.loads), 0.0)
    der_output: dict[str, PQ] = dict.fromkeys((der.id for der in graph.ders), PQ(0.0, 0.0))
    der_required: dict[str, PQ] = dict.fromkeys((der.id for der in graph.ders), PQ(0.0, 0.0))
    island_status: list[tuple[IslandSet, IslandStatus]] = []
    energized: set[str] = set()
    p_loss_kw = 0.0
    source_injection_kw = 0.0
    iterations = 0
    converged = True

    for island in islands:
        try:
            result = solve_island(graph, island, plan, switch_states)
        except NotRadialError as e:
            logger.debug(f"孤岛 {sorted(island)} 非辐射状,按失电处理: {e}")
            result = _dead_island(graph, island, closed_branches(graph, switch_states, island), IslandStatus.NOT_RADIAL)
        except NoConvergenceError as e:
            logger.debug(f"孤岛 {sorted(island)} 潮流不收敛,按失电处理: {e}")
            result = _dead_island(graph, island, closed_branches(graph, switch_states, island), IslandStatus.NO_CONVERGENCE)
            converged = False

        island_status.append((island, result.status))
        v_pu.update(result.v_pu)
        flows.update(result.flows)
        served.update(result.served)
        if result.status is not IslandStatus.ENERGIZED:
            continue

        energized.update(island)
        p_loss_kw += result.p_loss_kw
        iterations = max(iterations, result.iterations)
        for der in graph.ders:
            if der.bus_id not in island:
                continue
            if der.id == result.slack_id:
                required = result.slack_required
                der_required[der.id] = required
                der_output[der.id] = PQ(
                    _clamp(required.p_kw, der.p_min_kw * der_scale, der.p_max_kw * der_scale),
                    _clamp(required.q_kvar, der.q_min_kvar, der.q_max_kvar),
                )
            else:
                der_required[der.id] = der_output[der.id] = plan.der_setpoints[der.id]
        if result.slack_id is not None and result.slack_id not in graph.der_map:
            source_injection_kw += result.slack_required.p_kw

    loading = {
        branch.id: flows[branch.id].s_kva / (branch.s_max_pu * graph.s_base_kva) for branch in graph.branches
    }
    return PowerFlowResult(
        converged=converged,
        v_pu=MappingProxyType({bus_id: v_pu[bus_id] for bus_id in graph.bus_ids}),
        flows=MappingProxyType(flows),
        p_loss_kw=p_loss_kw,
        served=MappingProxyType(served),
        energized=frozenset(energized),
        iterations=iterations,
        der_output=MappingProxyType(der_output),
        der_required=MappingProxyType(der_required),
        source_injection_kw=source_injection_kw,
        island_status=tuple(island_status),
        loading=MappingProxyType(loading),
        plan=plan,
    )
