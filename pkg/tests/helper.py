# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
"""测试用的小型馈线构造函数(返回馈线文件结构的dict)"""

from typing import Any

import numpy as np


def two_bus_data(r_pu: float = 0.01, x_pu: float = 0.01, p_kw: float = 100.0, q_kvar: float = 50.0, s_base_kva: float = 1000.0) -> dict[str, Any]:
    """源节点b1经一条线路向b2上的负荷供电"""
    return {
        "s_base_kva": s_base_kva,
        "buses": [{"id": "b1", "base_kv": 12.47, "is_source": True}, {"id": "b2", "base_kv": 12.47}],
        "branches": [{"id": "br1", "from_bus": "b1", "to_bus": "b2", "r_pu": r_pu, "x_pu": x_pu, "s_max_pu": 1.0}],
        "loads": [{"id": "L1", "bus_id": "b2", "p_demand_kw": p_kw, "q_demand_kvar": q_kvar}],
    }


def random_radial_data(rng: np.random.Generator, n_buses: int) -> dict[str, Any]:
    """以源节点b0为根的随机辐射状孤岛"""
    buses = [{"id": f"b{i}", "base_kv": 12.47, "is_source": i == 0} for i in range(n_buses)]
    branches = []
    loads = []
    for i in range(1, n_buses):
        parent = int(rng.integers(0, i))
        # 随机决定支路方向,潮流计算不应依赖文件中的方向
        ends = (f"b{parent}", f"b{i}") if rng.random() < 0.5 else (f"b{i}", f"b{parent}")
        branches.append({
            "id": f"br{i}",
            "from_bus": ends[0],
            "to_bus": ends[1],
            "r_pu": float(rng.uniform(0.001, 0.02)),
            "x_pu": float(rng.uniform(0.001, 0.03)),
            "s_max_pu": 1.0,
        })
        loads.append({"id": f"L{i}", "bus_id": f"b{i}", "p_demand_kw": float(rng.uniform(0.0, 150.0)), "q_demand_kvar": float(rng.uniform(0.0, 60.0))})
    return {"s_base_kva": 1000.0, "buses": buses, "branches": branches, "loads": loads}


def chain_one_region_data() -> dict[str, Any]:
    """b1(G1) -S1- b2(L1) -S2- b3(L2),单个微电网;只有两个开关都闭合才能全部恢复"""
    return {
        "s_base_kva": 1000.0,
        "buses": [{"id": f"b{i}", "base_kv": 12.47} for i in (1, 2, 3)],
        "branches": [
            {"id": "br1", "from_bus": "b1", "to_bus": "b2", "r_pu": 0.01, "x_pu": 0.02, "s_max_pu": 1.0, "switch_id": "S1"},
            {"id": "br2", "from_bus": "b2", "to_bus": "b3", "r_pu": 0.01, "x_pu": 0.02, "s_max_pu": 1.0, "switch_id": "S2"},
        ],
        "switches": [
            {"id": "S1", "branch_id": "br1", "state": "Open", "owner_microgrid": 0},
            {"id": "S2", "branch_id": "br2", "state": "Open", "owner_microgrid": 0},
        ],
        "loads": [
            {"id": "L1", "bus_id": "b2", "p_demand_kw": 100.0, "q_demand_kvar": 30.0},
            {"id": "L2", "bus_id": "b3", "p_demand_kw": 100.0, "q_demand_kvar": 30.0},
        ],
        "ders": [{"id": "G1", "bus_id": "b1", "p_max_kw": 500.0, "q_min_kvar": -250.0, "q_max_kvar": 250.0, "owner_microgrid": 0}],
        "microgrids": [{"index": 0, "bus_ids": ["b1", "b2", "b3"], "switch_ids": ["S1", "S2"], "load_ids": ["L1", "L2"], "der_ids": ["G1"]}],
    }
