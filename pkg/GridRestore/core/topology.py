# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""拓扑分析: 并查集、孤岛划分与辐射状检查"""

from collections.abc import Hashable, Iterable, Mapping

from GridRestore.common.exceptions import FeederError
from GridRestore.common.models import Branch, FeederGraph, IslandSet, SwitchState


class UnionFind:
    """并查集(路径压缩 + 按秩合并)"""

    def __init__(self, elements: Iterable[Hashable] = ()) -> None:
        self.parent: dict[Hashable, Hashable] = {}
        self.rank: dict[Hashable, int] = {}
        for element in elements:
            self.add(element)

    def add(self, element: Hashable) -> None:
        if element not in self.parent:
            self.parent[element] = element
            self.rank[element] = 0

    def find(self, element: Hashable) -> Hashable:
        root = element
        while self.parent[root] != root:
            root = self.parent[root]
        # 路径压缩
        while self.parent[element] != root:
            self.parent[element], element = root, self.parent[element]
        return root

    def union(self, element1: Hashable, element2: Hashable) -> bool:
        """合并两个集合,若两者已在同一集合中返回False"""
        root1, root2 = self.find(element1), self.find(element2)
        if root1 == root2:
            return False
        if self.rank[root1] < self.rank[root2]:
            root1, root2 = root2, root1
        self.parent[root2] = root1
        if self.rank[root1] == self.rank[root2]:
            self.rank[root1] += 1
        return True


def is_branch_closed(branch: Branch, switch_states: Mapping[str, SwitchState]) -> bool:
    """无开关支路始终存在;带开关支路仅在开关闭合时存在"""
    return branch.switch_id is None or switch_states[branch.switch_id] is SwitchState.CLOSED


def closed_branches(graph: FeederGraph, switch_states: Mapping[str, SwitchState], buses: IslandSet | None = None) -> list[Branch]:
    """当前开关状态下存在的支路(可限定在给定母线集合内),按文件顺序"""
    return [
        branch
        for branch in graph.branches
        if is_branch_closed(branch, switch_states) and (buses is None or (branch.from_bus in buses and branch.to_bus in buses))
    ]


def connected_components(graph: FeederGraph, switch_states: Mapping[str, SwitchState]) -> list[IslandSet]:
    """计算当前开关状态下的孤岛划分

    返回值按各孤岛首个母线在文件中的顺序排列,保证确定性
    """
    missing = [switch_id for switch_id in graph.switch_ids if switch_id not in switch_states]
    if missing:
        msg = f"开关状态缺少开关: {', '.join(missing)}"
        raise FeederError(msg)

    uf = UnionFind(graph.bus_ids)
    for branch in closed_branches(graph, switch_states):
        uf.union(branch.from_bus, branch.to_bus)

    groups: dict[Hashable, list[str]] = {}
    for bus_id in graph.bus_ids:
        groups.setdefault(uf.find(bus_id), []).append(bus_id)
    return [frozenset(members) for members in groups.values()]


def find_cycle_branch(branches: Iterable[Branch]) -> Branch | None:
    """返回第一条使图成环的支路,辐射状时返回None"""
    uf = UnionFind()
    for branch in branches:
        uf.add(branch.from_bus)
        uf.add(branch.to_bus)
        if not uf.union(branch.from_bus, branch.to_bus):
            return branch
    return None


def count_loops(graph: FeederGraph, switch_states: Mapping[str, SwitchState]) -> int:
    """独立环路数 = 支路数 - 母线数 + 连通分量数"""
    branches = closed_branches(graph, switch_states)
    return len(branches) - len(graph.buses) + len(connected_components(graph, switch_states))
