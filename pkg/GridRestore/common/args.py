# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""命令行参数

子命令之后的 `--<节>.<键> <值>` 形式参数作为运行配置覆盖项,值按JSON解析,解析失败时按字符串处理
"""

import argparse
import json
from collections.abc import Sequence
from typing import Any, NoReturn

from .exceptions import ConfigError
from .version import __version__

SUBCOMMANDS = ("train", "eval", "oracle", "benchmark", "validate")


def parse_seed_list(value: str) -> tuple[int, ...]:
    """"1,2,3" -> (1, 2, 3)"""
    try:
        seeds = tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError as e:
        msg = f"无效的种子列表: {value!r}"
        raise argparse.ArgumentTypeError(msg) from e
    if not seeds:
        msg = "种子列表不能为空"
        raise argparse.ArgumentTypeError(msg)
    return seeds


def parse_seed_range(value: str) -> tuple[int, ...]:
    """"1:50" -> 1..50(含两端)"""
    start, sep, stop = value.partition(":")
    try:
        first, last = int(start), int(stop)
    except ValueError as e:
        msg = f"无效的种子范围: {value!r} (格式为 起始:结束)"
        raise argparse.ArgumentTypeError(msg) from e
    if not sep or last < first:
        msg = f"无效的种子范围: {value!r}"
        raise argparse.ArgumentTypeError(msg)
    return tuple(range(first, last + 1))


def parse_overrides(tokens: Sequence[str]) -> dict[tuple[str, ...], Any]:
    """解析 `--section.key value` 与 `--section.key=value` 形式的覆盖项

    :raises ConfigError: 出现无法识别的参数
    """
    overrides: dict[tuple[str, ...], Any] = {}
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if not token.startswith("--") or "." not in token:
            msg = f"无法识别的参数: {token}"
            raise ConfigError(msg)
        name, sep, raw = token[2:].partition("=")
        if not sep:
            if i + 1 >= len(tokens):
                msg = f"参数 {token} 缺少取值"
                raise ConfigError(msg)
            raw = tokens[i + 1]
            i += 1
        i += 1
        path = tuple(name.replace("-", "_").split("."))
        if any(not part for part in path):
            msg = f"无效的配置路径: {name}"
            raise ConfigError(msg)
        try:
            overrides[path] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[path] = raw
    return overrides


class _Parser(argparse.ArgumentParser):
    """参数错误时抛出ConfigError(退出码1),不直接退出进程"""

    def error(self, message: str) -> NoReturn:
        msg = f"{self.prog}: {message}"
        raise ConfigError(msg)


class Args:
    def __init__(self) -> None:
        self.parser = self._build_parser()

    @staticmethod
    def _build_parser() -> argparse.ArgumentParser:
        parser = _Parser(prog="gridrestore", description="配电网故障恢复的多智能体强化学习引擎")
        parser.add_argument("--version", action="version", version=f"GridRestore {__version__}")
        parser.add_argument("--log-level", dest="log_level", default=None, help="日志级别 (DEBUG/INFO/WARNING/ERROR)")
        subparsers = parser.add_subparsers(dest="command", required=True)

        train = subparsers.add_parser("train", help="按运行配置训练(每个种子一个目录)")
        train.add_argument("--config", required=True, help="运行配置文件(JSON)")
        train.add_argument("--seeds", type=parse_seed_list, default=None, help="覆盖种子列表,如 1,2,3")
        train.add_argument("--out", default=None, help="输出目录(默认取配置中的 output_dir)")
        train.add_argument("--force", action="store_true", help="允许覆盖已有输出目录")

        evaluate = subparsers.add_parser("eval", help="在场景集上评估检查点")
        evaluate.add_argument("--checkpoint", required=True, help="检查点文件(.npz)")
        scenarios = evaluate.add_mutually_exclusive_group()
        scenarios.add_argument("--scenarios", type=parse_seed_list, default=None, help="场景种子列表,如 1,2")
        scenarios.add_argument("--seed-range", dest="seed_range", type=parse_seed_range, default=None, help="场景种子范围,如 1:50")
        evaluate.add_argument("--greedy", action="store_true", help="取argmax动作而不是采样")
        evaluate.add_argument("--feeder", default=None, help="馈线名称或路径(默认取检查点中的配置)")
        evaluate.add_argument("--sample-seed", dest="sample_seed", type=int, default=0, help="采样评估的随机种子")
        evaluate.add_argument("--out", default=None, help="输出CSV文件(默认输出到标准输出)")

        oracle = subparsers.add_parser("oracle", help="穷举求某个场景的最优开关组合")
        oracle.add_argument("--feeder", required=True, help="馈线名称或路径")
        oracle.add_argument("--seed", type=int, required=True, help="场景种子")
        oracle.add_argument("--mode", choices=["strict", "penalty-free-best"], default="strict")
        oracle.add_argument("--config", default=None, help="运行配置文件(提供场景与奖励配置)")
        oracle.add_argument("--workers", type=int, default=1)
        oracle.add_argument("--no-cache", dest="use_cache", action="store_false", help="不读写穷举结果缓存")

        benchmark = subparsers.add_parser("benchmark", help="训练并比较各算法")
        benchmark.add_argument("--config", required=True, help="运行配置文件(JSON)")
        benchmark.add_argument("--seeds", type=parse_seed_list, default=None)
        benchmark.add_argument("--out", default=None)
        benchmark.add_argument("--force", action="store_true")

        validate = subparsers.add_parser("validate", help="检查馈线文件")
        validate.add_argument("--feeder", required=True, help="馈线名称或路径")
        return parser

    def parse(self, argv: Sequence[str] | None = None) -> tuple[argparse.Namespace, dict[tuple[str, ...], Any]]:
        """返回 (参数, 配置覆盖项)

        :raises ConfigError: 存在无法识别的参数,或对不接受覆盖项的子命令给出了覆盖项
        """
        namespace, rest = self.parser.parse_known_args(argv)
        overrides = parse_overrides(rest)
        if overrides and namespace.command not in ("train", "benchmark", "oracle"):
            msg = f"子命令 {namespace.command} 不接受配置覆盖项"
            raise ConfigError(msg)
        return namespace, overrides


args = Args()
