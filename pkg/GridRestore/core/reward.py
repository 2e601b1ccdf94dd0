# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""约束 C1-C6 的违反量、聚合违反量 ξ 与共享奖励

- C1 功率平衡: 供电负荷 + 网损 不超过 可用发电(含源节点注入)
- C2 电压: 仅统计带电母线
- C3 DER出力上下限
- C4 支路热稳定
- C5 全网DER出力上限 p_gen_cap_kw(源节点不计入)
- C6 区域内供电负荷不超过本区域可用DER容量(含源节点的区域不检查)
"""

from collections.abc import Mapping

from GridRestore.common.models import DeltaMode, DispatchPlan, FeederGraph, PowerFlowResult, RewardConfig, ViolationReport

# 功率平衡的数值容差(kW),低于该值的C1残差来自浮点舍入
BALANCE_TOL_KW = 1e-6


def constraint_norms(graph: FeederGraph, config: RewardConfig) -> tuple[float, float, float, float, float, float]:
    """各约束的归一化常数,配置中给出的值优先"""
    total_p_max = sum(der.p_max_kw for der in graph.ders)
    total_s_max = sum(branch.s_max_pu for branch in graph.branches) * graph.s_base_kva
    defaults = (
        graph.p_gen_cap_kw,
        1.0,
        total_p_max if total_p_max > 0 else 1.0,
        total_s_max if total_s_max > 0 else 1.0,
        graph.p_gen_cap_kw,
        graph.p_gen_cap_kw,
    )
    overrides = config.constraint_norms
    return tuple(  # type: ignore[return-value]
        default if override is None else override
        for default, override in zip(
            defaults,
            (overrides.c1, overrides.c2, overrides.c3, overrides.c4, overrides.c5, overrides.c6),
            strict=True,
        )
    )


def _overshoot(value: float, lower: float, upper: float) -> float:
    return max(0.0, value - upper) + max(0.0, lower - value)


def evaluate_constraints(graph: FeederGraph, result: PowerFlowResult, plan: DispatchPlan, config: RewardConfig) -> ViolationReport:
    """计算C1-C6违反量(原生单位)与 ξ = Σ 违反量/归一化常数"""
    der_scale = plan.der_scale
    der_total = result.der_total_kw

    c1 = result.served_kw + result.p_loss_kw - (der_total + result.source_injection_kw)
    c1 = c1 if c1 > BALANCE_TOL_KW else 0.0

    c2 = 0.0
    for bus_id in graph.bus_ids:
        if bus_id not in result.energized:
            continue
        c2 += _overshoot(result.v_pu[bus_id], config.v_min_pu, config.v_max_pu)

    c3 = 0.0
    for der in graph.ders:
        if der.bus_id not in result.energized:
            continue
        required = result.der_required.get(der.id)
        if required is None:
            continue
        c3 += _overshoot(required.p_kw, der.p_min_kw * der_scale, der.p_max_kw * der_scale)
        c3 += _overshoot(required.q_kvar, der.q_min_kvar, der.q_max_kvar)

    c4 = 0.0
    for branch in graph.branches:
        c4 += max(0.0, result.flows[branch.id].s_kva - branch.s_max_pu * graph.s_base_kva)

    c5 = max(0.0, der_total - graph.p_gen_cap_kw)

    c6 = 0.0
    sources = graph.source_bus_ids
    for region in graph.microgrids:
        if sources.intersection(region.bus_ids):
            continue
        local_load = sum(result.served[load_id] for load_id in region.load_ids)
        local_gen = sum(graph.der_map[der_id].p_max_kw * der_scale for der_id in region.der_ids)
        c6 += max(0.0, local_load - local_gen)

    fields = (c1, c2, c3, c4, c5, c6)
    norms = constraint_norms(graph, config)
    xi = sum(value / norm for value, norm in zip(fields, norms, strict=True))
    return ViolationReport(c1_kw=c1, c2_pu=c2, c3_kw=c3, c4_kva=c4, c5_kw=c5, c6_kw=c6, xi=xi)


def weighted_restored(graph: FeederGraph, result: PowerFlowResult, priorities: Mapping[str, int] | None = None) -> tuple[float, float]:
    """优先级加权的恢复功率 J = Σ c_k P_k 及其占 Σ c_k p_demand_k 的比例

    :param priorities: 场景中的负荷优先级,缺省使用馈线文件中的值
    """
    weighted_kw = 0.0
    weighted_demand = 0.0
    for load in graph.loads:
        priority = priorities.get(load.id, load.priority) if priorities is not None else load.priority
        weighted_kw += priority * result.served[load.id]
        weighted_demand += priority * load.p_demand_kw
    if weighted_demand <= 0:
        return weighted_kw, 0.0
    return weighted_kw, weighted_kw / weighted_demand


def restoration_level(graph: FeederGraph, result: PowerFlowResult, config: RewardConfig, priorities: Mapping[str, int] | None = None) -> float:
    """按 delta_mode 取用于计算奖励增量的恢复量"""
    match config.delta_mode:
        case DeltaMode.WEIGHTED_FRACTION:
            return weighted_restored(graph, result, priorities)[1]
        case DeltaMode.WEIGHTED_KW:
            return weighted_restored(graph, result, priorities)[0]
        case DeltaMode.RAW_KW:
            return result.served_kw


def step_reward(
    prev_weighted: float,
    curr_weighted: float,
    p_loss_kw: float,
    report: ViolationReport,
    config: RewardConfig,
    p_gen_cap_kw: float = 2400.0,
    lock_xi: float = 0.0,
) -> float:
    """r = α·Δ恢复量 - β·网损/p_gen_cap - λ·ξ

    :param lock_xi: 环境附加到 ξ 上的开关锁定惩罚
    """
    return (
        config.alpha * (curr_weighted - prev_weighted)
        - config.beta * (p_loss_kw / p_gen_cap_kw)
        - config.lambda_pen * (report.xi + lock_xi)
    )
