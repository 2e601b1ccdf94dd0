# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""最优性参照与对比策略

- exhaustive_oracle: 穷举所有可操作开关组合,求最大加权恢复功率 J*
- random_policy / greedy_policy: 随机与单步贪心的下限基线
- independent_ppo: 去掉顺序冻结、改用局部价值网络的PPO
- evaluate_policy: 在标准场景集上评估训练好的策略
- check_oracle_dominance: 满足全部约束的终态不得超过 strict 模式的 J*
"""

import itertools
import time
from collections.abc import Sequence
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np

from GridRestore.common.data.cache import cached_call
from GridRestore.common.exceptions import OracleDominanceError, TooLargeError
from GridRestore.common.logger import logger
from GridRestore.common.models import (
    Algorithm,
    FeasibilityMode,
    FeederGraph,
    RewardConfig,
    RunConfig,
    ScenarioSpec,
    StepInfo,
    SwitchState,
)
from GridRestore.common.thread import run_jobs

from .agents import Actor
from .env import RestorationEnv
from .happo import EnvFactory, SeedRun, train
from .powerflow import solve_system
from .reward import evaluate_constraints, restoration_level, weighted_restored

MAX_ORACLE_SWITCHES = 20


@dataclass(frozen=True, slots=True)
class OracleResult:
    mode: FeasibilityMode
    best_switch_states: dict[str, SwitchState]
    best_bits: tuple[int, ...]  # 按文件顺序的可操作开关闭合位
    operable_switch_ids: tuple[str, ...]
    best_weighted_kw: float  # J*
    best_fraction: float
    best_xi: float
    best_feasible: bool
    configs_evaluated: int
    ties: int
    elapsed_s: float

    @property
    def configs_per_second(self) -> float:
        return self.configs_evaluated / self.elapsed_s if self.elapsed_s > 0 else float("inf")


@dataclass(frozen=True, slots=True)
class _Candidate:
    bits: tuple[int, ...]
    weighted_kw: float
    fraction: float
    xi: float
    score: float


def _switch_states(graph: FeederGraph, operable: Sequence[str], bits: Sequence[int]) -> dict[str, SwitchState]:
    states = graph.all_open()
    for switch_id, bit in zip(operable, bits, strict=True):
        states[switch_id] = SwitchState.CLOSED if bit else SwitchState.OPEN
    return states


def _evaluate_configs(
    graph: FeederGraph,
    spec: ScenarioSpec,
    operable: Sequence[str],
    configs: Sequence[tuple[int, ...]],
    mode: FeasibilityMode,
    reward_config: RewardConfig,
) -> list[_Candidate]:
    candidates = []
    for bits in configs:
        result = solve_system(graph, _switch_states(graph, operable, bits), spec.der_scale)
        report = evaluate_constraints(graph, result, result.plan, reward_config)
        weighted_kw, fraction = weighted_restored(graph, result, spec.priority_assignment)
        match mode:
            case FeasibilityMode.STRICT:
                score = weighted_kw
            case FeasibilityMode.PENALTY_FREE_BEST:
                score = restoration_level(graph, result, reward_config, spec.priority_assignment) - reward_config.lambda_pen * report.xi
        candidates.append(_Candidate(bits, weighted_kw, fraction, report.xi, score))
    return candidates


def operable_switches(graph: FeederGraph, spec: ScenarioSpec) -> tuple[str, ...]:
    """不在故障支路上的开关(文件顺序)"""
    return tuple(switch.id for switch in graph.switches if switch.branch_id not in spec.faulted_branch_ids)


def _exhaustive_oracle(
    graph: FeederGraph,
    spec: ScenarioSpec,
    mode: FeasibilityMode,
    reward_config: RewardConfig,
    workers: int,
) -> OracleResult:
    started = time.perf_counter()
    operable = operable_switches(graph, spec)
    configs = list(itertools.product((0, 1), repeat=len(operable)))
    chunks = [configs[i::workers] for i in range(workers)]
    jobs = [partial(_evaluate_configs, graph, spec, operable, chunk, mode, reward_config) for chunk in chunks if chunk]
    candidates = [candidate for chunk in run_jobs(jobs, workers) for candidate in chunk]

    # 收集完毕后再归约,结果与评估顺序无关
    admissible = [c for c in candidates if mode is not FeasibilityMode.STRICT or c.xi == 0.0]
    if admissible:
        best_score = max(c.score for c in admissible)
        winners = sorted((c for c in admissible if c.score == best_score), key=lambda c: c.bits)
        best, ties = winners[0], len(winners)
        feasible = best.xi == 0.0
    else:
        logger.warning(f"场景 {spec.seed}: 没有满足全部约束的开关组合")
        best = _Candidate((0,) * len(operable), 0.0, 0.0, 0.0, 0.0)
        ties, feasible = 0, False

    return OracleResult(
        mode=mode,
        best_switch_states=_switch_states(graph, operable, best.bits),
        best_bits=best.bits,
        operable_switch_ids=operable,
        best_weighted_kw=best.weighted_kw,
        best_fraction=best.fraction,
        best_xi=best.xi,
        best_feasible=feasible,
        configs_evaluated=len(candidates),
        ties=ties,
        elapsed_s=time.perf_counter() - started,
    )


def exhaustive_oracle(
    graph: FeederGraph,
    spec: ScenarioSpec,
    feasibility: FeasibilityMode = FeasibilityMode.STRICT,
    reward_config: RewardConfig | None = None,
    use_cache: bool = True,
    workers: int = 1,
) -> OracleResult:
    """枚举全部 2^n 种终态开关组合,返回最优组合

    strict 模式只接受 ξ = 0 的组合并最大化 J;
    penalty-free-best 模式最大化 恢复量 - λ·ξ(恢复量按 delta_mode 计算)
    同分时取闭合位向量字典序最小者

    :raises TooLargeError: 可操作开关超过 MAX_ORACLE_SWITCHES 个
    """
    reward_config = reward_config or RewardConfig()
    operable = operable_switches(graph, spec)
    if len(operable) > MAX_ORACLE_SWITCHES:
        msg = f"可操作开关 {len(operable)} 个,超过穷举上限 {MAX_ORACLE_SWITCHES}"
        raise TooLargeError(msg)

    workers = max(1, workers)
    if not use_cache:
        return _exhaustive_oracle(graph, spec, feasibility, reward_config, workers)
    key = (graph.fingerprint(), spec.cache_key(), feasibility.value, reward_config.model_dump_json())
    result, hit = cached_call(_exhaustive_oracle, key, graph, spec, feasibility, reward_config, workers)
    if hit:
        logger.debug(f"场景 {spec.seed} 的穷举结果来自缓存")
    return result


@dataclass(frozen=True, slots=True)
class EpisodeSummary:
    episodes: int
    fractions: tuple[float, ...]
    weighted_kw: tuple[float, ...]
    restored_kw: tuple[float, ...]
    xi: tuple[float, ...]
    traces: tuple[tuple[tuple[int, ...], ...], ...]
    decision_ms: tuple[float, ...] = ()  # 每回合每步的平均决策耗时

    @property
    def mean_fraction(self) -> float:
        return float(np.mean(self.fractions)) if self.fractions else 0.0

    @property
    def std_fraction(self) -> float:
        return float(np.std(self.fractions)) if self.fractions else 0.0

    @property
    def max_fraction(self) -> float:
        return max(self.fractions, default=0.0)

    @property
    def mean_weighted_kw(self) -> float:
        return float(np.mean(self.weighted_kw)) if self.weighted_kw else 0.0

    @property
    def mean_decision_ms(self) -> float:
        return float(np.mean(self.decision_ms)) if self.decision_ms else 0.0


def _summarize(finals: Sequence[StepInfo], traces: Sequence[tuple[tuple[int, ...], ...]], decision_s: Sequence[float]) -> EpisodeSummary:
    return EpisodeSummary(
        episodes=len(finals),
        fractions=tuple(info.weighted_fraction for info in finals),
        weighted_kw=tuple(info.weighted_kw for info in finals),
        restored_kw=tuple(info.restored_kw for info in finals),
        xi=tuple(info.xi for info in finals),
        traces=tuple(traces),
        decision_ms=tuple(1000.0 * seconds / len(trace) if trace else 0.0 for seconds, trace in zip(decision_s, traces, strict=True)),
    )


def random_policy(env: RestorationEnv, episodes: int, rng: np.random.Generator, spec: ScenarioSpec | None = None) -> EpisodeSummary:
    """各智能体均匀随机选动作

    :param spec: 固定场景;缺省时每回合由环境抽取场景
    """
    finals: list[StepInfo] = []
    traces = []
    decision_s = []
    for _ in range(episodes):
        env.reset(spec)
        trace = []
        elapsed = 0.0
        while not env.done:
            started = time.perf_counter()
            joint = tuple(int(rng.integers(dim)) for dim in env.action_dims)
            elapsed += time.perf_counter() - started
            env.step(joint)
            trace.append(joint)
        finals.append(env.last_info)
        traces.append(tuple(trace))
        decision_s.append(elapsed)
    return _summarize(finals, traces, decision_s)


def greedy_action(env: RestorationEnv) -> tuple[int, ...]:
    """每个智能体在其余智能体不操作时逐一试算自身动作,取单步奖励最高者(同分取编号最小)"""
    joint = [0] * env.n_agents
    for agent, dim in enumerate(env.action_dims):
        best_action, best_reward = 0, -np.inf
        for action in range(dim):
            trial = [0] * env.n_agents
            trial[agent] = action
            reward, _ = env.simulate(trial)
            if reward > best_reward:
                best_action, best_reward = action, reward
        joint[agent] = best_action
    return tuple(joint)


def greedy_policy(env: RestorationEnv, spec: ScenarioSpec | None = None) -> EpisodeSummary:
    """单步贪心策略跑一个回合(确定性)"""
    env.reset(spec)
    trace = []
    elapsed = 0.0
    while not env.done:
        started = time.perf_counter()
        joint = greedy_action(env)
        elapsed += time.perf_counter() - started
        env.step(joint)
        trace.append(joint)
    return _summarize([env.last_info], [tuple(trace)], [elapsed])


def independent_ppo(env_factory: EnvFactory, run_config: RunConfig, seeds: Sequence[int], out_dir: Path, fingerprint: str) -> list[SeedRun]:
    """与 train 接口一致,各智能体同时更新并使用局部价值网络"""
    return train(env_factory, run_config, seeds, out_dir, fingerprint, Algorithm.INDEPENDENT_PPO)


EVAL_COLUMNS = ["scenario_seed", "restored_frac", "weighted_restored_kw", "restored_kw", "xi", "latency_ms", "actions"]


@dataclass(frozen=True, slots=True)
class EvalRow:
    scenario_seed: int
    restored_frac: float
    weighted_restored_kw: float
    restored_kw: float
    xi: float
    latency_ms: float  # 每步联合动作的平均决策耗时
    actions: tuple[tuple[int, ...], ...]

    def to_dict(self) -> dict[str, float | int | str]:
        return {
            "scenario_seed": self.scenario_seed,
            "restored_frac": self.restored_frac,
            "weighted_restored_kw": self.weighted_restored_kw,
            "restored_kw": self.restored_kw,
            "xi": self.xi,
            "latency_ms": self.latency_ms,
            "actions": format_trace(self.actions),
        }


def format_trace(trace: Sequence[Sequence[int]]) -> str:
    """动作轨迹: 步之间以空格分隔,同一步内各智能体以 - 分隔"""
    return " ".join("-".join(str(action) for action in joint) for joint in trace)


def check_oracle_dominance(info: StepInfo, oracle: OracleResult, tol_kw: float = 1e-6) -> None:
    """终态满足全部约束时,其加权恢复功率不得超过 strict 模式的 J*

    违反约束的终态以及 penalty-free-best 模式的结果不参与比较

    :raises OracleDominanceError: 策略结果超过 J*
    """
    if oracle.mode is not FeasibilityMode.STRICT or info.report.xi != 0.0:
        return
    if info.weighted_kw > oracle.best_weighted_kw + tol_kw:
        msg = f"加权恢复功率 {info.weighted_kw:.6f} kW 超过穷举最优解 J* = {oracle.best_weighted_kw:.6f} kW"
        raise OracleDominanceError(msg)


def evaluate_policy(
    env: RestorationEnv,
    actors: Sequence[Actor],
    specs: Sequence[ScenarioSpec],
    greedy: bool = True,
    rng: np.random.Generator | None = None,
    oracles: Sequence[OracleResult] | None = None,
) -> list[EvalRow]:
    """每个场景跑一个回合,greedy 时取argmax动作,否则按策略采样

    :param oracles: 与 specs 一一对应的穷举结果,给出时逐场景检查终态不超过 J*
    :raises OracleDominanceError: 某场景的终态超过 J*
    """
    if not greedy and rng is None:
        rng = np.random.default_rng()
    if oracles is not None and len(oracles) != len(specs):
        msg = f"穷举结果数 {len(oracles)} 与场景数 {len(specs)} 不一致"
        raise ValueError(msg)
    rows = []
    for index, spec in enumerate(specs):
        observations, _ = env.reset(spec)
        trace: list[tuple[int, ...]] = []
        decision_s = 0.0
        while not env.done:
            started = time.perf_counter()
            joint = tuple(actor.act(obs, rng, greedy=greedy)[0] for actor, obs in zip(actors, observations, strict=True))
            decision_s += time.perf_counter() - started
            observations, _, _, _, _ = env.step(joint)
            trace.append(joint)
        info = env.last_info
        if oracles is not None:
            check_oracle_dominance(info, oracles[index])
        rows.append(
            EvalRow(
                scenario_seed=spec.seed,
                restored_frac=info.weighted_fraction,
                weighted_restored_kw=info.weighted_kw,
                restored_kw=info.restored_kw,
                xi=info.xi,
                latency_ms=1000.0 * decision_s / len(trace) if trace else 0.0,
                actions=tuple(trace),
            ),
        )
    return rows
