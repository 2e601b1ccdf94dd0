# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
from collections.abc import Mapping
from typing import Any


class GridRestoreError(Exception):
    def __init__(self, msg: str) -> None:
        super().__init__(msg)


class FeederError(GridRestoreError):
    """馈线文件错误"""


class ParseError(FeederError):
    """馈线文件格式错误(无法解析、未知键、类型错误)"""


class ValidationError(FeederError):
    """馈线不变量校验失败"""

    def __init__(self, msg: str, element: str | int | None = None) -> None:
        super().__init__(msg)
        self.element = element


class PowerFlowError(GridRestoreError):
    """潮流计算错误"""

    def __init__(self, msg: str, island: frozenset[str] | None = None) -> None:
        super().__init__(msg)
        self.island = island


class NotRadialError(PowerFlowError):
    """孤岛内存在环路"""


class NoConvergenceError(PowerFlowError):
    """前推回代达到迭代上限仍未收敛"""


class ConfigError(GridRestoreError):
    """运行配置错误"""


class EnvError(GridRestoreError):
    """环境使用错误"""


class OutOfBoundsActionError(EnvError):
    """动作索引越界(编程错误,不是学习信号)"""


class EpisodeFinishedError(EnvError):
    """回合已结束仍调用step"""


class DimensionMismatchError(GridRestoreError):
    """网络输入/参数维度不匹配"""


class TrainingDivergedError(GridRestoreError):
    """损失出现NaN/Inf"""

    def __init__(self, msg: str, diagnostics: Mapping[str, Any] | None = None) -> None:
        super().__init__(msg)
        self.diagnostics = dict(diagnostics or {})


class CheckpointError(GridRestoreError):
    """检查点读写错误"""


class CheckpointMismatchError(CheckpointError):
    """检查点与馈线维度不一致"""


class TooLargeError(GridRestoreError):
    """可操作开关过多,无法穷举"""


class OracleDominanceError(GridRestoreError):
    """策略结果超过穷举最优解"""
