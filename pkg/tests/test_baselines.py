# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
"""Tests for GridRestore.core.baselines."""

import dataclasses

import numpy as np
import pytest

from GridRestore.common.exceptions import OracleDominanceError, TooLargeError
from GridRestore.common.models import FeasibilityMode, FeederGraph, RewardConfig, ScenarioConfig, ScenarioSpec, SwitchState, TrainConfig
from GridRestore.core import baselines
from GridRestore.core.baselines import (
    EVAL_COLUMNS,
    EpisodeSummary,
    check_oracle_dominance,
    evaluate_policy,
    exhaustive_oracle,
    format_trace,
    greedy_action,
    greedy_policy,
    operable_switches,
    random_policy,
)
from GridRestore.core.env import RestorationEnv, sample_scenario
from GridRestore.core.happo import Trainer
from GridRestore.core.parser.feeder import parse_feeder
from GridRestore.core.powerflow import solve_system
from GridRestore.core.reward import evaluate_constraints
from tests.helper import chain_one_region_data


def _spec(graph: FeederGraph, faulted: frozenset[str] = frozenset(), seed: int = 0) -> ScenarioSpec:
    return ScenarioSpec(
        seed=seed,
        faulted_branch_ids=faulted,
        priority_assignment={load.id: 1 for load in graph.loads},
        der_scale=1.0,
        initial_switch_states=graph.all_open(),
    )


class TestExhaustiveOracle:
    def test_toy4_strict(self, toy4: FeederGraph) -> None:
        result = exhaustive_oracle(toy4, _spec(toy4), use_cache=False)
        assert result.configs_evaluated == 4
        assert result.operable_switch_ids == ("S1", "S2")
        assert result.best_weighted_kw == pytest.approx(250.0)
        assert result.best_fraction == pytest.approx(1.0)
        # (1,0) 与 (1,1) 同分,取字典序较小者
        assert result.best_bits == (1, 0)
        assert result.ties == 2
        assert result.best_feasible
        assert result.best_switch_states == {"S1": SwitchState.CLOSED, "S2": SwitchState.OPEN}

    def test_toy4_penalty_free_best(self, toy4: FeederGraph) -> None:
        result = exhaustive_oracle(toy4, _spec(toy4), FeasibilityMode.PENALTY_FREE_BEST, use_cache=False)
        assert result.mode is FeasibilityMode.PENALTY_FREE_BEST
        assert result.best_bits == (1, 0)
        assert result.best_xi == 0.0

    def test_chain_needs_both_switches(self) -> None:
        graph = parse_feeder(chain_one_region_data())
        result = exhaustive_oracle(graph, _spec(graph), use_cache=False)
        assert result.best_bits == (1, 1)
        assert result.ties == 1
        assert result.best_weighted_kw == pytest.approx(200.0)

    def test_all_switches_faulted(self, toy4: FeederGraph) -> None:
        result = exhaustive_oracle(toy4, _spec(toy4, frozenset({"br1", "br3"})), use_cache=False)
        assert result.configs_evaluated == 1
        assert result.operable_switch_ids == ()
        assert result.best_weighted_kw == 0.0
        assert result.best_feasible

    def test_faulted_switch_is_not_operable(self, toy4: FeederGraph) -> None:
        spec = _spec(toy4, frozenset({"br1"}))
        assert operable_switches(toy4, spec) == ("S2",)
        result = exhaustive_oracle(toy4, spec, use_cache=False)
        # 只闭合S2时G2过载,最优为全部断开
        assert result.best_bits == (0,)
        assert result.best_weighted_kw == 0.0

    def test_too_large(self, toy4: FeederGraph, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setattr(baselines, "MAX_ORACLE_SWITCHES", 1)
        with pytest.raises(TooLargeError):
            exhaustive_oracle(toy4, _spec(toy4), use_cache=False)

    def test_parallel_matches_serial(self, toy13: FeederGraph) -> None:
        spec = sample_scenario(toy13, 4, ScenarioConfig(fault_count_max=1))
        serial = exhaustive_oracle(toy13, spec, use_cache=False)
        parallel = exhaustive_oracle(toy13, spec, use_cache=False, workers=3)
        assert serial.configs_evaluated == parallel.configs_evaluated
        assert (serial.best_bits, serial.best_weighted_kw, serial.ties) == (parallel.best_bits, parallel.best_weighted_kw, parallel.ties)

    def test_toy13_full_restoration(self, toy13: FeederGraph) -> None:
        result = exhaustive_oracle(toy13, _spec(toy13), use_cache=False)
        assert result.configs_evaluated == 64
        assert result.best_fraction == pytest.approx(1.0)
        assert result.best_bits == (1, 1, 0, 1, 1, 1)

    def test_fleet_cap_decides_optimum(self, toy13_capped: FeederGraph) -> None:
        spec = _spec(toy13_capped)
        everything = solve_system(toy13_capped, toy13_capped.all_closed())
        assert evaluate_constraints(toy13_capped, everything, everything.plan, RewardConfig()).c5_kw > 0.0

        result = exhaustive_oracle(toy13_capped, spec, use_cache=False)
        # 区域1全部负荷 + L1 + L4,G1 与 G2/G3 分成两个孤岛
        assert result.best_bits == (1, 0, 0, 1, 1, 1)
        assert result.best_weighted_kw == pytest.approx(560.0)
        assert result.best_fraction == pytest.approx(560.0 / 740.0)
        assert result.best_feasible

    def test_cached(self, toy4: FeederGraph) -> None:
        spec = _spec(toy4, seed=123)
        first = exhaustive_oracle(toy4, spec)
        second = exhaustive_oracle(toy4, spec)
        assert (first.best_bits, first.best_weighted_kw, first.elapsed_s) == (second.best_bits, second.best_weighted_kw, second.elapsed_s)


class TestRandomPolicy:
    def test_reproducible(self, toy4: FeederGraph) -> None:
        first = random_policy(RestorationEnv(toy4, seed=1), 5, np.random.default_rng(3))
        second = random_policy(RestorationEnv(toy4, seed=1), 5, np.random.default_rng(3))
        assert first.traces == second.traces
        assert first.fractions == second.fractions
        assert first.episodes == 5
        assert all(len(trace) == 4 for trace in first.traces)

    def test_zero_horizon(self, toy4: FeederGraph) -> None:
        env = RestorationEnv(toy4, ScenarioConfig(horizon=0), seed=1)
        summary = random_policy(env, 3, np.random.default_rng(0), _spec(toy4))
        assert summary.fractions == (0.0, 0.0, 0.0)
        assert summary.traces == ((), (), ())
        assert summary.mean_decision_ms == 0.0


class TestGreedyPolicy:
    def test_chain_closes_switches_in_order(self) -> None:
        graph = parse_feeder(chain_one_region_data())
        summary = greedy_policy(RestorationEnv(graph, seed=0), _spec(graph))
        assert summary.traces == (((2,), (4,), (0,), (0,)),)
        assert summary.fractions == pytest.approx((1.0,))

    def test_toy4_first_step(self, toy4_env: RestorationEnv) -> None:
        toy4_env.reset(_spec(toy4_env.graph))
        assert greedy_action(toy4_env) == (2, 2)
        summary = greedy_policy(toy4_env, _spec(toy4_env.graph))
        assert summary.fractions == pytest.approx((1.0,))
        assert summary.xi == (0.0,)

    def test_all_faulted_stays_idle(self, toy4_env: RestorationEnv) -> None:
        summary = greedy_policy(toy4_env, _spec(toy4_env.graph, frozenset({"br1", "br3"})))
        assert summary.traces == (((0, 0),) * 4,)


class TestEvaluatePolicy:
    def test_rows(self, toy4: FeederGraph) -> None:
        trainer = Trainer(RestorationEnv(toy4, seed=2), TrainConfig(hidden_dims=(8,), rollout_length=8), seed=2)
        env = RestorationEnv(toy4, seed=0)
        specs = [sample_scenario(toy4, seed, env.scenario_config) for seed in (1, 2, 3)]
        rows = evaluate_policy(env, trainer.actors, specs)
        again = evaluate_policy(env, trainer.actors, specs)
        assert [row.scenario_seed for row in rows] == [1, 2, 3]
        assert [row.actions for row in rows] == [row.actions for row in again]
        assert all(len(row.actions) == 4 for row in rows)
        assert all(row.latency_ms >= 0 for row in rows)
        assert list(rows[0].to_dict()) == EVAL_COLUMNS

    def test_oracle_dominance_checked(self, toy4: FeederGraph) -> None:
        trainer = Trainer(RestorationEnv(toy4, seed=2), TrainConfig(hidden_dims=(8,), rollout_length=8), seed=2)
        env = RestorationEnv(toy4, seed=0)
        specs = [_spec(toy4, frozenset({"br1", "br3"}))]
        oracle = exhaustive_oracle(toy4, specs[0], use_cache=False)
        rows = evaluate_policy(env, trainer.actors, specs, oracles=[oracle])
        assert rows[0].weighted_restored_kw == 0.0
        with pytest.raises(OracleDominanceError):
            evaluate_policy(env, trainer.actors, specs, oracles=[dataclasses.replace(oracle, best_weighted_kw=-1.0)])
        with pytest.raises(ValueError, match="不一致"):
            evaluate_policy(env, trainer.actors, specs, oracles=[])

    def test_format_trace(self) -> None:
        assert format_trace([(2, 0), (0, 4)]) == "2-0 0-4"
        assert format_trace([]) == ""


class TestOracleDominance:
    def test_optimal_final_state_passes(self, toy4_env: RestorationEnv) -> None:
        spec = _spec(toy4_env.graph)
        oracle = exhaustive_oracle(toy4_env.graph, spec, use_cache=False)
        toy4_env.reset(spec)
        toy4_env.step((2, 0))
        info = toy4_env.last_info
        assert info.report.xi == 0.0
        assert info.weighted_kw == pytest.approx(oracle.best_weighted_kw)
        check_oracle_dominance(info, oracle)
        with pytest.raises(OracleDominanceError, match="J\*"):
            check_oracle_dominance(info, dataclasses.replace(oracle, best_weighted_kw=oracle.best_weighted_kw - 1.0))

    def test_infeasible_or_relaxed_not_compared(self, toy4_env: RestorationEnv) -> None:
        spec = _spec(toy4_env.graph)
        oracle = exhaustive_oracle(toy4_env.graph, spec, use_cache=False)
        toy4_env.reset(spec)
        toy4_env.step((2, 0))
        relaxed = dataclasses.replace(oracle, mode=FeasibilityMode.PENALTY_FREE_BEST, best_weighted_kw=0.0)
        check_oracle_dominance(toy4_env.last_info, relaxed)

        toy4_env.reset(spec)
        toy4_env.step((0, 2))
        info = toy4_env.last_info
        # 只闭合S2时G2过载
        assert info.report.xi > 0.0
        check_oracle_dominance(info, dataclasses.replace(oracle, best_weighted_kw=0.0))


class TestEpisodeSummary:
    def test_statistics(self) -> None:
        summary = EpisodeSummary(
            episodes=2,
            fractions=(0.5, 1.0),
            weighted_kw=(100.0, 200.0),
            restored_kw=(100.0, 200.0),
            xi=(0.0, 0.0),
            traces=((), ()),
        )
        assert summary.mean_fraction == pytest.approx(0.75)
        assert summary.std_fraction == pytest.approx(0.25)
        assert summary.max_fraction == 1.0
        assert summary.mean_weighted_kw == pytest.approx(150.0)
