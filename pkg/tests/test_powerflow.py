# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
"""Tests for GridRestore.core.powerflow."""

from collections import deque
from typing import Any

import numpy as np
import pytest

from GridRestore.common.exceptions import NotRadialError
from GridRestore.common.models import FeederGraph, IslandStatus, SwitchState
from GridRestore.core.parser.feeder import parse_feeder
from GridRestore.core.powerflow import dispatch_ders, solve_island, solve_system
from GridRestore.core.topology import connected_components
from tests.helper import random_radial_data, two_bus_data


def _gauss_two_bus(z: complex, s: complex, iterations: int = 500) -> complex:
    v = 1.0 + 0j
    for _ in range(iterations):
        v = 1.0 - z * (s / v).conjugate()
    return v


def _zbus_oracle(data: dict[str, Any]) -> dict[str, float]:
    """以路径阻抗矩阵做不动点迭代: V = 1 - Z·conj(S/V)"""
    s_base = data["s_base_kva"]
    root = next(bus["id"] for bus in data["buses"] if bus.get("is_source"))
    neighbours: dict[str, list[tuple[str, complex]]] = {bus["id"]: [] for bus in data["buses"]}
    for branch in data["branches"]:
        z = complex(branch["r_pu"], branch["x_pu"])
        neighbours[branch["from_bus"]].append((branch["to_bus"], z))
        neighbours[branch["to_bus"]].append((branch["from_bus"], z))

    # 每条母线到根节点的路径(支路阻抗序列,按支路标识)
    paths: dict[str, dict[tuple[str, str], complex]] = {root: {}}
    queue = deque([root])
    while queue:
        bus = queue.popleft()
        for other, z in neighbours[bus]:
            if other not in paths:
                paths[other] = {**paths[bus], (bus, other): z}
                queue.append(other)

    buses = [bus["id"] for bus in data["buses"] if bus["id"] != root]
    z_matrix = np.array(
        [[sum(z for key, z in paths[a].items() if key in paths[b]) for b in buses] for a in buses],
        dtype=np.complex128,
    )
    s = np.zeros(len(buses), dtype=np.complex128)
    for load in data["loads"]:
        s[buses.index(load["bus_id"])] += complex(load["p_demand_kw"], load["q_demand_kvar"]) / s_base
    v = np.ones(len(buses), dtype=np.complex128)
    for _ in range(2000):
        v_new = 1.0 - z_matrix @ np.conj(s / v)
        if np.max(np.abs(v_new - v)) < 1e-15:
            v = v_new
            break
        v = v_new
    return {root: 1.0, **{bus: float(abs(value)) for bus, value in zip(buses, v, strict=True)}}


class TestSolveIsland:
    def test_two_bus_against_gauss(self) -> None:
        graph = parse_feeder(two_bus_data(r_pu=0.01, x_pu=0.01, p_kw=100.0, q_kvar=50.0))
        result = solve_system(graph, {})
        s = complex(100.0, 50.0) / 1000.0
        v2 = _gauss_two_bus(complex(0.01, 0.01), s)
        current = abs((s / v2).conjugate())
        assert result.v_pu["b1"] == 1.0
        assert result.v_pu["b2"] == pytest.approx(abs(v2), abs=1e-9)
        assert result.p_loss_kw == pytest.approx(0.01 * current**2 * 1000.0, rel=1e-7)
        assert result.converged

    def test_random_radial_islands(self) -> None:
        rng = np.random.default_rng(12345)
        for _ in range(100):
            data = random_radial_data(rng, int(rng.integers(2, 7)))
            graph = parse_feeder(data)
            result = solve_system(graph, {})
            expected = _zbus_oracle(data)
            for bus_id, v in expected.items():
                assert abs(result.v_pu[bus_id] - v) < 1e-6
            balance = result.source_injection_kw - result.served_kw - result.p_loss_kw
            assert abs(balance) < 1e-6 * graph.s_base_kva

    def test_voltage_drops_away_from_source(self) -> None:
        rng = np.random.default_rng(808)
        for _ in range(50):
            data = random_radial_data(rng, int(rng.integers(2, 8)))
            result = solve_system(parse_feeder(data), {})
            for branch in data["branches"]:
                # 随机辐射网中父节点编号总小于子节点
                parent, child = sorted((branch["from_bus"], branch["to_bus"]), key=lambda bus_id: int(bus_id[1:]))
                assert result.v_pu[child] <= result.v_pu[parent] + 1e-12

    def test_loop_raises_not_radial(self, toy34: FeederGraph) -> None:
        states = toy34.all_closed()
        island = connected_components(toy34, states)[0]
        plan = dispatch_ders(toy34, [island])
        with pytest.raises(NotRadialError) as info:
            solve_island(toy34, island, plan, states)
        assert info.value.island == island

    def test_island_without_generation_is_dead(self, toy4: FeederGraph) -> None:
        states = toy4.all_open()
        islands = connected_components(toy4, states)
        plan = dispatch_ders(toy4, islands)
        dead = next(island for island in islands if island == frozenset({"b2", "b3"}))
        result = solve_island(toy4, dead, plan, states)
        assert result.status is IslandStatus.DEAD
        assert dict(result.served) == {"L1": 0.0, "L2": 0.0}
        assert set(result.v_pu.values()) == {0.0}


class TestDispatch:
    def test_largest_der_is_slack(self, toy4: FeederGraph) -> None:
        islands = connected_components(toy4, toy4.all_closed())
        plan = dispatch_ders(toy4, islands)
        assert plan.slack_of(0) == "G1"
        # 250 kW 负荷 / 500 kW 总容量
        assert plan.der_setpoints["G2"].p_kw == pytest.approx(100.0)
        assert "G1" not in plan.der_setpoints

    def test_source_bus_is_slack(self) -> None:
        graph = parse_feeder(two_bus_data())
        plan = dispatch_ders(graph, connected_components(graph, {}))
        assert plan.slack_of(0) == "b1"

    def test_der_scale(self, toy4: FeederGraph) -> None:
        islands = connected_components(toy4, toy4.all_closed())
        plan = dispatch_ders(toy4, islands, der_scale=0.5)
        assert plan.der_setpoints["G2"].p_kw == pytest.approx(100.0)
        assert plan.der_scale == 0.5

    def test_island_without_der_has_no_slack(self, toy4: FeederGraph) -> None:
        islands = connected_components(toy4, toy4.all_open())
        plan = dispatch_ders(toy4, islands)
        assert [plan.slack_of(i) for i in range(len(islands))] == ["G1", None, "G2"]


class TestSolveSystem:
    def test_toy13_all_closed_serves_everything(self, toy13: FeederGraph) -> None:
        result = solve_system(toy13, toy13.all_closed())
        assert result.served_kw == pytest.approx(toy13.total_demand_kw)
        assert result.energized == frozenset(toy13.bus_ids)
        assert all(0.95 <= v <= 1.05 for v in result.v_pu.values())
        assert tuple(result.v_pu) == toy13.bus_ids

    def test_toy13_isolated_island_unserved(self, toy13: FeederGraph) -> None:
        states = toy13.all_closed()
        states["S5"] = SwitchState.OPEN
        states["S6"] = SwitchState.OPEN
        result = solve_system(toy13, states)
        for load_id in ("L5", "L6", "L7", "L8", "L9"):
            assert result.served[load_id] == 0.0
        for load_id in ("L1", "L2", "L3", "L4"):
            assert result.served[load_id] == toy13.load_map[load_id].p_demand_kw
        assert result.islands_with(IslandStatus.DEAD) == [frozenset({"b8", "b9", "b10", "b11", "b12"})]

    def test_der_only_island(self, toy4: FeederGraph) -> None:
        states = toy4.all_open()
        states["S1"] = SwitchState.CLOSED
        result = solve_system(toy4, states)
        assert result.served_kw == pytest.approx(250.0)
        assert result.p_loss_kw > 0
        assert result.der_output["G1"].p_kw == pytest.approx(250.0 + result.p_loss_kw)
        assert result.der_output["G2"].p_kw == pytest.approx(0.0, abs=1e-12)
        # from_bus 端计量,正方向 b1 -> b2
        assert result.flows["br1"].p_kw == pytest.approx(result.der_output["G1"].p_kw)
        assert result.flows["br2"].p_kw > 0
        assert result.flows["br3"].s_kva == 0.0

    def test_conservation_with_ders(self, toy13: FeederGraph) -> None:
        result = solve_system(toy13, toy13.all_closed())
        assert result.der_total_kw == pytest.approx(result.served_kw + result.p_loss_kw, abs=1e-6)

    def test_loop_island_is_de_energized(self, toy34: FeederGraph) -> None:
        result = solve_system(toy34, toy34.all_closed())
        assert result.served_kw == 0.0
        assert result.der_total_kw == 0.0
        assert [status for _, status in result.island_status] == [IslandStatus.NOT_RADIAL]

    def test_non_convergence_is_de_energized(self) -> None:
        graph = parse_feeder(two_bus_data(r_pu=0.5, x_pu=0.5, p_kw=2000.0, q_kvar=0.0))
        result = solve_system(graph, {})
        assert not result.converged
        assert result.served_kw == 0.0
        assert result.islands_with(IslandStatus.NO_CONVERGENCE) == [frozenset({"b1", "b2"})]

    def test_loading(self, toy4: FeederGraph) -> None:
        states = toy4.all_open()
        states["S1"] = SwitchState.CLOSED
        result = solve_system(toy4, states)
        assert result.loading["br1"] == pytest.approx(result.flows["br1"].s_kva / 1000.0)
        assert result.loading["br3"] == 0.0
