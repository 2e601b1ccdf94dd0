# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""多智能体恢复环境

每个微电网区域对应一个智能体,动作编码:
    0 = 不操作; 2j+1 = 断开本地开关j; 2j+2 = 闭合本地开关j
回合固定 T 步,不提前终止;对故障开关的操作视为不操作并在 ξ 上附加锁定惩罚
成环或不收敛的孤岛不带电,因此只含断开动作的一步仅在上一状态没有这类孤岛时才不会扩大带电母线集合
"""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from GridRestore.common.exceptions import ConfigError, EpisodeFinishedError, OutOfBoundsActionError
from GridRestore.common.logger import logger
from GridRestore.common.models import (
    FeederGraph,
    MicrogridRegion,
    Observation,
    PowerFlowResult,
    RewardConfig,
    ScenarioConfig,
    ScenarioSpec,
    StepInfo,
    SwitchState,
    ViolationReport,
)

from .powerflow import solve_system
from .reward import evaluate_constraints, restoration_level, step_reward, weighted_restored

SEED_UPPER = 2**31 - 1


def sample_scenario(graph: FeederGraph, seed: int, config: ScenarioConfig) -> ScenarioSpec:
    """根据种子生成一个随机场景

    - 故障数在 [fault_count_min, fault_count_max] 内均匀取整数
    - 故障支路从带开关的支路中无放回均匀抽取
    - 各负荷优先级在 1..10 上独立均匀抽取
    - DER缩放系数在 [der_scale_min, der_scale_max] 上均匀抽取
    """
    switchable = sorted(branch.id for branch in graph.branches if branch.switch_id is not None)
    if config.fault_count_max > len(switchable):
        msg = f"故障数上限 {config.fault_count_max} 超过可操作开关数 {len(switchable)}"
        raise ConfigError(msg)

    rng = np.random.default_rng(seed)
    count = int(rng.integers(config.fault_count_min, config.fault_count_max + 1))
    faulted = frozenset(str(branch_id) for branch_id in rng.choice(switchable, size=count, replace=False)) if count else frozenset()
    priorities = rng.integers(1, 11, size=len(graph.loads))
    if config.der_scale_max > config.der_scale_min:
        der_scale = float(rng.uniform(config.der_scale_min, config.der_scale_max))
    else:
        der_scale = float(config.der_scale_min)

    return ScenarioSpec(
        seed=seed,
        faulted_branch_ids=faulted,
        priority_assignment={load.id: int(priority) for load, priority in zip(graph.loads, priorities, strict=True)},
        der_scale=der_scale,
        initial_switch_states=graph.all_open(),
    )


def build_global_state(observations: Sequence[np.ndarray], info: StepInfo, horizon: int) -> np.ndarray:
    """全局状态 = 按智能体编号拼接的观测 + [全局恢复比例, ξ, t/T]"""
    progress = info.t / horizon if horizon > 0 else 0.0
    return np.concatenate([*observations, np.array([info.weighted_fraction, info.xi, progress], dtype=np.float64)])


@dataclass(frozen=True, slots=True)
class AgentLayout:
    """单个智能体的观测布局(整个运行期间固定)"""

    region: MicrogridRegion
    bus_ids: tuple[str, ...]
    switch_ids: tuple[str, ...]
    der_ids: tuple[str, ...]
    load_ids: tuple[str, ...]
    branch_ids: tuple[str, ...]  # from_bus 在本区域内的支路

    @property
    def obs_dim(self) -> int:
        return len(self.bus_ids) + 2 * len(self.switch_ids) + len(self.der_ids) + len(self.load_ids) + len(self.branch_ids) + 2

    @property
    def action_dim(self) -> int:
        return 2 * len(self.switch_ids) + 1


@dataclass(frozen=True, slots=True)
class _Evaluation:
    switch_states: dict[str, SwitchState]
    result: PowerFlowResult
    report: ViolationReport
    level: float
    reward: float
    info: StepInfo


class RestorationEnv:
    """单线程、有状态的恢复环境;并行训练时每个种子各持一个实例"""

    def __init__(
        self,
        graph: FeederGraph,
        scenario_config: ScenarioConfig | None = None,
        reward_config: RewardConfig | None = None,
        seed: int | None = None,
    ) -> None:
        if not graph.microgrids:
            msg = "恢复环境至少需要一个微电网区域"
            raise ConfigError(msg)
        self.graph = graph
        self.scenario_config = scenario_config or ScenarioConfig()
        self.reward_config = reward_config or RewardConfig()
        self.rng = np.random.default_rng(seed)
        self.horizon = self.scenario_config.horizon if self.scenario_config.horizon is not None else 2 * len(graph.switches)

        self.layouts: tuple[AgentLayout, ...] = tuple(
            AgentLayout(
                region=region,
                bus_ids=region.bus_ids,
                switch_ids=region.switch_ids,
                der_ids=region.der_ids,
                load_ids=region.load_ids,
                branch_ids=tuple(branch.id for branch in graph.branches if graph.region_of_bus.get(branch.from_bus) == region.index),
            )
            for region in sorted(graph.microgrids, key=lambda region: region.index)
        )

        self.spec: ScenarioSpec | None = None
        self.switch_states: dict[str, SwitchState] = graph.all_open()
        self.locked: frozenset[str] = frozenset()
        self.t = 0
        self.result: PowerFlowResult | None = None
        self.info: StepInfo | None = None
        self.level = 0.0

    @property
    def n_agents(self) -> int:
        return len(self.layouts)

    @property
    def obs_dims(self) -> tuple[int, ...]:
        return tuple(layout.obs_dim for layout in self.layouts)

    @property
    def action_dims(self) -> tuple[int, ...]:
        return tuple(layout.action_dim for layout in self.layouts)

    @property
    def state_dim(self) -> int:
        return sum(self.obs_dims) + 3

    @property
    def done(self) -> bool:
        return self.t >= self.horizon

    def sample_spec(self) -> ScenarioSpec:
        """用环境自身的随机数生成器抽取下一个场景"""
        return sample_scenario(self.graph, int(self.rng.integers(SEED_UPPER)), self.scenario_config)

    def reset(self, spec: ScenarioSpec | None = None) -> tuple[list[Observation], np.ndarray]:
        """开始新回合: 可操作开关全部断开,故障支路上的开关锁定"""
        spec = spec if spec is not None else self.sample_spec()
        self.spec = spec
        self.locked = frozenset(switch.id for switch in self.graph.switches if switch.branch_id in spec.faulted_branch_ids)
        self.switch_states = dict(spec.initial_switch_states)
        for switch_id in self.locked:
            self.switch_states[switch_id] = SwitchState.OPEN
        self.t = 0

        evaluation = self._evaluate(spec, self.switch_states, lock_violations=0, prev_level=0.0, t=0)
        self._commit(evaluation)
        observations = self.observations()
        return observations, build_global_state(observations, evaluation.info, self.horizon)

    def step(self, joint_action: Sequence[int]) -> tuple[list[Observation], np.ndarray, float, bool, StepInfo]:
        """同时执行所有智能体的动作并推进一步"""
        spec, _, _ = self._current()
        if self.done:
            msg = f"回合已在 t={self.t} 结束"
            raise EpisodeFinishedError(msg)

        states, lock_violations = self._apply(joint_action)
        evaluation = self._evaluate(spec, states, lock_violations, self.level, self.t + 1)
        self.t += 1
        self._commit(evaluation)
        observations = self.observations()
        return observations, build_global_state(observations, evaluation.info, self.horizon), evaluation.reward, self.done, evaluation.info

    def simulate(self, joint_action: Sequence[int]) -> tuple[float, StepInfo]:
        """评估联合动作的单步奖励而不改变环境状态"""
        spec, _, _ = self._current()
        states, lock_violations = self._apply(joint_action)
        evaluation = self._evaluate(spec, states, lock_violations, self.level, self.t + 1)
        return evaluation.reward, evaluation.info

    def _apply(self, joint_action: Sequence[int]) -> tuple[dict[str, SwitchState], int]:
        if len(joint_action) != self.n_agents:
            msg = f"联合动作长度 {len(joint_action)} 与智能体数 {self.n_agents} 不一致"
            raise OutOfBoundsActionError(msg)

        states = dict(self.switch_states)
        lock_violations = 0
        for agent, (layout, action) in enumerate(zip(self.layouts, joint_action, strict=True)):
            action = int(action)  # noqa: PLW2901
            if not 0 <= action < layout.action_dim:
                msg = f"智能体 {agent} 的动作 {action} 越界 (动作数 {layout.action_dim})"
                raise OutOfBoundsActionError(msg)
            if action == 0:
                continue
            switch_id = layout.switch_ids[(action - 1) // 2]
            if switch_id in self.locked:
                lock_violations += 1
                logger.debug(f"智能体 {agent} 试图操作故障开关 {switch_id},按不操作处理")
                continue
            states[switch_id] = SwitchState.CLOSED if (action - 1) % 2 else SwitchState.OPEN
        return states, lock_violations

    def _current(self) -> tuple[ScenarioSpec, PowerFlowResult, StepInfo]:
        if self.spec is None or self.result is None or self.info is None:
            msg = "环境尚未reset()"
            raise EpisodeFinishedError(msg)
        return self.spec, self.result, self.info

    @property
    def last_info(self) -> StepInfo:
        """最近一次 reset/step 的指标"""
        return self._current()[2]

    def _evaluate(self, spec: ScenarioSpec, states: Mapping[str, SwitchState], lock_violations: int, prev_level: float, t: int) -> _Evaluation:
        graph, config = self.graph, self.reward_config
        result = solve_system(graph, states, spec.der_scale)
        report = evaluate_constraints(graph, result, result.plan, config)
        lock_xi = self.scenario_config.lock_penalty * lock_violations
        level = restoration_level(graph, result, config, spec.priority_assignment)
        reward = step_reward(prev_level, level, result.p_loss_kw, report, config, graph.p_gen_cap_kw, lock_xi)
        weighted_kw, weighted_fraction = weighted_restored(graph, result, spec.priority_assignment)
        info = StepInfo(
            report=report,
            xi=report.xi + lock_xi,
            restored_kw=result.served_kw,
            weighted_kw=weighted_kw,
            weighted_fraction=weighted_fraction,
            p_loss_kw=result.p_loss_kw,
            lock_violations=lock_violations,
            t=t,
            result=result,
        )
        return _Evaluation(dict(states), result, report, level, reward, info)

    def _commit(self, evaluation: _Evaluation) -> None:
        self.switch_states = evaluation.switch_states
        self.result = evaluation.result
        self.info = evaluation.info
        self.level = evaluation.level

    def observations(self) -> list[Observation]:
        """按当前状态构建每个智能体的观测向量"""
        spec, result, info = self._current()
        graph, der_scale = self.graph, spec.der_scale
        observations: list[Observation] = []
        for layout in self.layouts:
            values: list[float] = [result.v_pu[bus_id] for bus_id in layout.bus_ids]
            values.extend(1.0 if self.switch_states[switch_id] is SwitchState.CLOSED else 0.0 for switch_id in layout.switch_ids)
            values.extend(1.0 if switch_id in self.locked else 0.0 for switch_id in layout.switch_ids)
            for der_id in layout.der_ids:
                p_max = graph.der_map[der_id].p_max_kw * der_scale
                values.append(result.der_output[der_id].p_kw / p_max if p_max > 0 else 0.0)
            for load_id in layout.load_ids:
                load = graph.load_map[load_id]
                if load.p_demand_kw > 0:
                    values.append(result.served[load_id] / load.p_demand_kw)
                else:
                    values.append(1.0 if load.bus_id in result.energized else 0.0)
            values.extend(result.loading[branch_id] for branch_id in layout.branch_ids)
            values.extend((info.weighted_fraction, info.xi))
            observations.append(Observation(np.asarray(values, dtype=np.float64)))
        return observations

    def global_state(self) -> np.ndarray:
        return build_global_state(self.observations(), self.last_info, self.horizon)

    def switch_bits(self) -> tuple[int, ...]:
        """当前开关状态的0/1向量(按文件顺序)"""
        return tuple(1 if self.switch_states[switch_id] is SwitchState.CLOSED else 0 for switch_id in self.graph.switch_ids)
