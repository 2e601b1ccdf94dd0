# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""命令行入口: train / eval / oracle / benchmark / validate

退出码: 0 成功; 1 馈线、配置或检查点错误; 2 其他错误
"""

import json
import os
import shutil
import sys
from argparse import Namespace
from collections.abc import Mapping, Sequence
from functools import partial
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import pydantic

from GridRestore.common.args import args as cli_args
from GridRestore.common.exceptions import CheckpointError, ConfigError, FeederError, TooLargeError
from GridRestore.common.logger import logger
from GridRestore.common.models import (
    Algorithm,
    FeasibilityMode,
    FeederGraph,
    RewardConfig,
    RunConfig,
    ScenarioConfig,
    ScenarioSpec,
    get_enum,
)
from GridRestore.common.paths import resolve_feeder_path
from GridRestore.common.version import code_version
from GridRestore.core.baselines import (
    EVAL_COLUMNS,
    OracleResult,
    check_oracle_dominance,
    evaluate_policy,
    exhaustive_oracle,
    greedy_policy,
    independent_ppo,
    random_policy,
)
from GridRestore.core.checkpoint import build_actors, check_compatible, load_checkpoint
from GridRestore.core.env import RestorationEnv, sample_scenario
from GridRestore.core.happo import SeedRun, train
from GridRestore.core.parser.feeder import load_feeder
from GridRestore.core.topology import count_loops

SEED_ENV = "GRIDRESTORE_SEED"
SUMMARY_METRICS = ("cum_reward", "mean_reward", "restored_frac", "weighted_restored_kw", "restored_kw", "restored_cap_pct", "xi_mean", "critic_loss")
BENCHMARK_COLUMNS = ["algorithm", "restored_frac_mean", "restored_frac_std", "oracle_gap_pct"]
TIMING_COLUMNS = ["train_wallclock_s", "eval_latency_ms"]


def _format_validation_error(error: pydantic.ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def load_run_config(
    path: str | Path,
    overrides: Mapping[tuple[str, ...], Any] | None = None,
    seeds: Sequence[int] | None = None,
    environ: Mapping[str, str] | None = None,
) -> tuple[RunConfig, Path]:
    """读取运行配置并应用覆盖项

    优先级: 环境变量 GRIDRESTORE_SEED > 命令行参数 > 配置文件 > 模型默认值
    返回 (配置, 配置文件所在目录)

    :raises ConfigError: 文件无法读取或内容不合法
    """
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        msg = f"无法读取运行配置 {path}: {e}"
        raise ConfigError(msg) from e
    if not isinstance(data, dict):
        msg = f"运行配置 {path} 的顶层必须是对象"
        raise ConfigError(msg)

    for keys, value in (overrides or {}).items():
        node = data
        for key in keys[:-1]:
            child = node.setdefault(key, {})
            if not isinstance(child, dict):
                msg = f"配置项 {'.'.join(keys)} 的上级 {key} 不是对象"
                raise ConfigError(msg)
            node = child
        node[keys[-1]] = value
    if seeds is not None:
        data["seeds"] = list(seeds)

    environ = os.environ if environ is None else environ
    if (seed := environ.get(SEED_ENV)) is not None and seed.strip():
        try:
            data["seeds"] = [int(seed)]
        except ValueError as e:
            msg = f"环境变量 {SEED_ENV} 不是整数: {seed!r}"
            raise ConfigError(msg) from e

    try:
        return RunConfig.model_validate(data), path.resolve().parent
    except pydantic.ValidationError as e:
        msg = f"运行配置 {path} 不合法: {_format_validation_error(e)}"
        raise ConfigError(msg) from e


def load_graph(feeder: str | Path, base_dir: Path | None = None) -> FeederGraph:
    """按名称或路径读取馈线(读取时已完成全部校验)"""
    return load_feeder(resolve_feeder_path(feeder, base_dir))


def pin_feeder_path(run_config: RunConfig, base_dir: Path) -> tuple[RunConfig, Path]:
    """把馈线解析为绝对路径写回配置,检查点中的配置因此不依赖当前目录"""
    feeder_path = resolve_feeder_path(run_config.feeder, base_dir).resolve()
    return run_config.model_copy(update={"feeder": str(feeder_path)}), feeder_path


def make_env(graph: FeederGraph, run_config: RunConfig, seed: int) -> RestorationEnv:
    return RestorationEnv(graph, run_config.scenario, run_config.reward, seed)


def canonical_specs(graph: FeederGraph, config: ScenarioConfig, seeds: Sequence[int]) -> list[ScenarioSpec]:
    """标准场景集: 场景种子 -> 场景"""
    return [sample_scenario(graph, seed, config) for seed in seeds]


def prepare_output(out_dir: Path, force: bool) -> None:
    """已有非空输出目录时需要 --force 才会清空重建"""
    if out_dir.exists() and any(out_dir.iterdir()):
        if not force:
            msg = f"输出目录 {out_dir} 已存在且非空,使用 --force 覆盖"
            raise ConfigError(msg)
        logger.warning(f"覆盖已有输出目录 {out_dir}")
        shutil.rmtree(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)


def write_resolved_config(out_dir: Path, run_config: RunConfig, feeder_path: Path, fingerprint: str) -> Path:
    path = out_dir / "resolved-config.json"
    data = {
        "code_version": code_version(),
        "seeds": list(run_config.seeds),
        "feeder_path": str(feeder_path),
        "feeder_fingerprint": fingerprint,
        "config": run_config.model_dump(mode="json"),
    }
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return path


def summarize_runs(runs: Sequence[SeedRun]) -> pd.DataFrame:
    """各种子最终迭代指标的 均值/标准差/样本数"""
    finals = pd.DataFrame([{name: getattr(run.history[-1], name) for name in SUMMARY_METRICS} for run in runs if run.history])
    rows = []
    for name in SUMMARY_METRICS:
        values = finals[name].to_numpy(dtype=np.float64) if name in finals else np.array([])
        rows.append({
            "metric": name,
            "mean": float(values.mean()) if len(values) else float("nan"),
            "std": float(values.std()) if len(values) else float("nan"),
            "n": len(values),
        })
    return pd.DataFrame(rows, columns=["metric", "mean", "std", "n"])


def _train_algorithm(graph: FeederGraph, run_config: RunConfig, out_dir: Path, fingerprint: str, algorithm: Algorithm) -> list[SeedRun]:
    env_factory = partial(make_env, graph, run_config)
    if algorithm is Algorithm.INDEPENDENT_PPO:
        return independent_ppo(env_factory, run_config, run_config.seeds, out_dir, fingerprint)
    return train(env_factory, run_config, run_config.seeds, out_dir, fingerprint, algorithm)


def cmd_train(namespace: Namespace, overrides: Mapping[tuple[str, ...], Any]) -> int:
    run_config, base_dir = load_run_config(namespace.config, overrides, namespace.seeds)
    if not run_config.algorithm.learns:
        msg = f"train 只支持 happo 与 independent-ppo,配置中为 {run_config.algorithm.value}"
        raise ConfigError(msg)
    run_config, feeder_path = pin_feeder_path(run_config, base_dir)
    graph = load_graph(feeder_path)
    fingerprint = graph.fingerprint()

    out_dir = Path(namespace.out) if namespace.out else run_config.output_path()
    prepare_output(out_dir, namespace.force)
    write_resolved_config(out_dir, run_config, feeder_path, fingerprint)
    logger.info(f"开始训练 {run_config.algorithm.value}: 馈线 {feeder_path.stem}, 种子 {list(run_config.seeds)}, 输出 {out_dir}")

    runs = _train_algorithm(graph, run_config, out_dir, fingerprint, run_config.algorithm)
    summary = summarize_runs(runs)
    summary.to_csv(out_dir / "summary.csv", index=False)
    for row in summary.itertuples():
        if row.metric == "restored_frac":
            logger.info(f"最终恢复比例: {row.mean:.4f} ± {row.std:.4f} (n={row.n})")
    return 0


def cmd_eval(namespace: Namespace) -> int:
    checkpoint = load_checkpoint(namespace.checkpoint)
    run_config = checkpoint.run_config
    feeder = namespace.feeder or (run_config.feeder if run_config is not None else None)
    if feeder is None:
        msg = "检查点中没有运行配置,请用 --feeder 指定馈线"
        raise ConfigError(msg)
    graph = load_graph(feeder)
    scenario_config = run_config.scenario if run_config is not None else ScenarioConfig()
    reward_config = run_config.reward if run_config is not None else RewardConfig()
    env = RestorationEnv(graph, scenario_config, reward_config)
    check_compatible(checkpoint, env, graph.fingerprint())

    seeds = namespace.scenarios or namespace.seed_range
    if seeds is None:
        seeds = run_config.eval.scenarios if run_config is not None else (1, 2, 3, 4, 5)
    specs = canonical_specs(graph, scenario_config, seeds)
    rows = evaluate_policy(env, build_actors(checkpoint), specs, greedy=namespace.greedy, rng=np.random.default_rng(namespace.sample_seed))

    table = pd.DataFrame([row.to_dict() for row in rows], columns=EVAL_COLUMNS)
    if namespace.out:
        out = Path(namespace.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(out, index=False)
    else:
        table.to_csv(sys.stdout, index=False)
    logger.info(f"评估 {len(rows)} 个场景,平均恢复比例 {table['restored_frac'].mean():.4f}")
    return 0


def oracle_report(result: OracleResult, feeder: str, spec: ScenarioSpec) -> dict[str, Any]:
    return {
        "mode": result.mode.value,
        "feeder": feeder,
        "scenario_seed": spec.seed,
        "faulted_branches": sorted(spec.faulted_branch_ids),
        "j_star_kw": result.best_weighted_kw,
        "fraction": result.best_fraction,
        "xi": result.best_xi,
        "feasible": result.best_feasible,
        "operable_switches": list(result.operable_switch_ids),
        "best_bits": "".join(str(bit) for bit in result.best_bits),
        "ties": result.ties,
        "configs_evaluated": result.configs_evaluated,
        "configs_per_second": round(result.configs_per_second, 3) if result.elapsed_s > 0 else None,
    }


def cmd_oracle(namespace: Namespace, overrides: Mapping[tuple[str, ...], Any]) -> int:
    if namespace.config is not None:
        run_config, base_dir = load_run_config(namespace.config, overrides)
        scenario_config, reward_config = run_config.scenario, run_config.reward
    elif overrides:
        msg = "配置覆盖项需要同时指定 --config"
        raise ConfigError(msg)
    else:
        base_dir, scenario_config, reward_config = None, ScenarioConfig(), RewardConfig()
    graph = load_graph(namespace.feeder, base_dir)
    spec = sample_scenario(graph, namespace.seed, scenario_config)
    mode = get_enum(FeasibilityMode, namespace.mode)
    result = exhaustive_oracle(graph, spec, mode, reward_config, use_cache=namespace.use_cache, workers=namespace.workers)
    print(json.dumps(oracle_report(result, str(namespace.feeder), spec), ensure_ascii=False, indent=2))
    return 0


def _oracle_targets(graph: FeederGraph, specs: Sequence[ScenarioSpec], reward_config: RewardConfig) -> list[OracleResult] | None:
    try:
        return [exhaustive_oracle(graph, spec, FeasibilityMode.STRICT, reward_config) for spec in specs]
    except TooLargeError as e:
        logger.warning(f"无法计算最优解,oracle_gap_pct 留空: {e}")
        return None


def _gap_pct(weighted_kw: Sequence[float], oracles: Sequence[OracleResult] | None) -> float:
    """相对 J* 的平均缺口(%),J* 为0的场景缺口记为0"""
    if oracles is None:
        return float("nan")
    targets = [oracle.best_weighted_kw for oracle in oracles]
    gaps = [100.0 * (1.0 - kw / target) if target > 0 else 0.0 for kw, target in zip(weighted_kw, targets, strict=True)]
    return float(np.mean(gaps))


def benchmark_row(
    algorithm: Algorithm,
    per_seed_fracs: Sequence[float],
    per_seed_gaps: Sequence[float],
    train_wallclock_s: float,
    latency_ms: float,
) -> dict[str, Any]:
    fracs = np.asarray(per_seed_fracs, dtype=np.float64)
    return {
        "algorithm": algorithm.value,
        "restored_frac_mean": float(fracs.mean()),
        "restored_frac_std": float(fracs.std()),
        "oracle_gap_pct": float(np.mean(per_seed_gaps)),
        "train_wallclock_s": train_wallclock_s,
        "eval_latency_ms": latency_ms,
    }


def cmd_benchmark(namespace: Namespace, overrides: Mapping[tuple[str, ...], Any]) -> int:
    run_config, base_dir = load_run_config(namespace.config, overrides, namespace.seeds)
    run_config, feeder_path = pin_feeder_path(run_config, base_dir)
    graph = load_graph(feeder_path)
    fingerprint = graph.fingerprint()
    out_dir = Path(namespace.out) if namespace.out else run_config.output_path()
    prepare_output(out_dir, namespace.force)
    write_resolved_config(out_dir, run_config, feeder_path, fingerprint)

    specs = canonical_specs(graph, run_config.scenario, run_config.eval.scenarios)
    oracles = _oracle_targets(graph, specs, run_config.reward)
    rows = []
    for algorithm in run_config.benchmark.algorithms:
        logger.info(f"基准测试: {algorithm.value}")
        match algorithm:
            case Algorithm.HAPPO | Algorithm.INDEPENDENT_PPO:
                runs = _train_algorithm(graph, run_config, out_dir / algorithm.value, fingerprint, algorithm)
                fracs, gaps, latencies = [], [], []
                for run in runs:
                    eval_rows = evaluate_policy(make_env(graph, run_config, run.seed), run.trainer.actors, specs, greedy=True, oracles=oracles)
                    fracs.append(float(np.mean([row.restored_frac for row in eval_rows])))
                    gaps.append(_gap_pct([row.weighted_restored_kw for row in eval_rows], oracles))
                    latencies.extend(row.latency_ms for row in eval_rows)
                wallclock = float(np.mean([run.train_wallclock_s for run in runs]))
                rows.append(benchmark_row(algorithm, fracs, gaps, wallclock, float(np.mean(latencies))))
            case Algorithm.RANDOM:
                fracs, gaps, latencies = [], [], []
                for seed in run_config.seeds:
                    env, rng = make_env(graph, run_config, seed), np.random.default_rng(seed)
                    summaries = [random_policy(env, run_config.eval.random_episodes, rng, spec) for spec in specs]
                    fracs.append(float(np.mean([summary.mean_fraction for summary in summaries])))
                    gaps.append(_gap_pct([summary.mean_weighted_kw for summary in summaries], oracles))
                    latencies.extend(summary.mean_decision_ms for summary in summaries)
                rows.append(benchmark_row(algorithm, fracs, gaps, 0.0, float(np.mean(latencies))))
            case Algorithm.GREEDY:
                # 贪心策略是确定性的,各种子结果相同
                env = make_env(graph, run_config, run_config.seeds[0])
                summaries = []
                for index, spec in enumerate(specs):
                    summaries.append(greedy_policy(env, spec))
                    if oracles is not None:
                        check_oracle_dominance(env.last_info, oracles[index])
                frac = float(np.mean([summary.mean_fraction for summary in summaries]))
                gap = _gap_pct([summary.mean_weighted_kw for summary in summaries], oracles)
                latency = float(np.mean([summary.mean_decision_ms for summary in summaries]))
                rows.append(benchmark_row(algorithm, [frac] * len(run_config.seeds), [gap], 0.0, latency))

    # 耗时总是写入 benchmark_timing.csv,仅在 record_wallclock 时并入 benchmark.csv
    columns = BENCHMARK_COLUMNS + TIMING_COLUMNS if run_config.record_wallclock else BENCHMARK_COLUMNS
    table = pd.DataFrame(rows, columns=columns)
    table.to_csv(out_dir / "benchmark.csv", index=False)
    pd.DataFrame(rows, columns=["algorithm", *TIMING_COLUMNS]).to_csv(out_dir / "benchmark_timing.csv", index=False)
    for row in table.itertuples():
        logger.info(f"{row.algorithm}: 恢复比例 {row.restored_frac_mean:.4f} ± {row.restored_frac_std:.4f}, 最优缺口 {row.oracle_gap_pct:.2f}%")
    return 0


def cmd_validate(namespace: Namespace) -> int:
    graph = load_graph(namespace.feeder)
    lines = [
        f"feeder: {resolve_feeder_path(namespace.feeder)}",
        f"buses: {len(graph.buses)}",
        f"branches: {len(graph.branches)}",
        f"switches: {len(graph.switches)}",
        f"loads: {len(graph.loads)}",
        f"ders: {len(graph.ders)}",
        f"microgrids: {len(graph.microgrids)}",
        f"partition: {'ok' if graph.microgrids else 'n/a'}",
        f"loops_all_closed: {count_loops(graph, graph.all_closed())}",
        f"fingerprint: {graph.fingerprint()}",
    ]
    print("\n".join(lines))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    try:
        namespace, overrides = cli_args.parse(argv)
        if namespace.log_level:
            logger.set_level(namespace.log_level)
    except (ConfigError, ValueError) as e:
        logger.error(str(e))
        return 1

    try:
        match namespace.command:
            case "train":
                return cmd_train(namespace, overrides)
            case "eval":
                return cmd_eval(namespace)
            case "oracle":
                return cmd_oracle(namespace, overrides)
            case "benchmark":
                return cmd_benchmark(namespace, overrides)
            case "validate":
                return cmd_validate(namespace)
            case _:
                logger.error(f"未知子命令: {namespace.command}")
                return 2
    except (FeederError, ConfigError, CheckpointError) as e:
        logger.error(str(e))
        return 1
    except KeyboardInterrupt:
        logger.warning("已中断")
        return 2
    except Exception as e:
        logger.exception(f"运行失败: {e}")
        return 2


def run() -> None:
    sys.exit(main())
