# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""运行配置模型

配置文件为JSON,各节与下列模型一一对应,未知键一律报错
"""

import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ._enums import Algorithm, DeltaMode, UpdateOrder

__all__ = ["BenchmarkConfig", "ConstraintNorms", "EvalConfig", "RewardConfig", "RunConfig", "ScenarioConfig", "TrainConfig"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, use_enum_values=False)


class ScenarioConfig(_Strict):
    fault_count_min: int = Field(default=0, ge=0)
    fault_count_max: int = Field(default=0, ge=0)
    der_scale_min: float = Field(default=1.0, ge=0.5, le=1.0)
    der_scale_max: float = Field(default=1.0, ge=0.5, le=1.0)
    horizon: int | None = Field(default=None, ge=0)  # None -> 2·|S|
    lock_penalty: float = Field(default=0.1, ge=0.0)

    @model_validator(mode="after")
    def _check_ranges(self) -> Self:
        if self.fault_count_min > self.fault_count_max:
            msg = f"fault_count_min ({self.fault_count_min}) > fault_count_max ({self.fault_count_max})"
            raise ValueError(msg)
        if self.der_scale_min > self.der_scale_max:
            msg = f"der_scale_min ({self.der_scale_min}) > der_scale_max ({self.der_scale_max})"
            raise ValueError(msg)
        return self


class ConstraintNorms(_Strict):
    """各约束的归一化常数,None表示使用由馈线推导的默认值"""

    c1: float | None = Field(default=None, gt=0)
    c2: float | None = Field(default=None, gt=0)
    c3: float | None = Field(default=None, gt=0)
    c4: float | None = Field(default=None, gt=0)
    c5: float | None = Field(default=None, gt=0)
    c6: float | None = Field(default=None, gt=0)


class RewardConfig(_Strict):
    alpha: float = Field(default=1.0, ge=0.0)
    beta: float = Field(default=0.1, ge=0.0)
    lambda_pen: float = Field(default=1.0, ge=0.0)
    v_min_pu: float = Field(default=0.95, gt=0.0)
    v_max_pu: float = Field(default=1.05, gt=0.0)
    delta_mode: DeltaMode = DeltaMode.WEIGHTED_FRACTION
    constraint_norms: ConstraintNorms = ConstraintNorms()

    @model_validator(mode="after")
    def _check_voltage_band(self) -> Self:
        if self.v_min_pu >= self.v_max_pu:
            msg = f"v_min_pu ({self.v_min_pu}) must be < v_max_pu ({self.v_max_pu})"
            raise ValueError(msg)
        return self


class TrainConfig(_Strict):
    gamma: float = Field(default=0.99, gt=0.0, le=1.0)
    gae_lambda: float = Field(default=0.95, ge=0.0, le=1.0)
    clip_eps: float = Field(default=0.2, gt=0.0)
    ent_coef: float = Field(default=0.01, ge=0.0)
    ppo_epochs: int = Field(default=4, ge=1)
    critic_epochs: int = Field(default=4, ge=1)
    minibatch_size: int = Field(default=64, ge=1)
    rollout_length: int | None = Field(default=None, ge=1)  # None -> 环境回合长度
    iterations: int = Field(default=200, ge=1)
    agent_update_order: UpdateOrder = UpdateOrder.FIXED
    happo_strict: bool = False
    normalize_advantages: bool = True
    actor_lr: float = Field(default=3e-4, gt=0.0)
    critic_lr: float = Field(default=1e-3, gt=0.0)
    hidden_dims: tuple[int, ...] = (64, 64)
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    actor_out_gain: float = Field(default=0.01, gt=0.0)
    reset_each_iteration: bool = True
    log_every: int = Field(default=10, ge=1)

    @field_validator("hidden_dims")
    @classmethod
    def _check_hidden(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(dim < 1 for dim in value):
            msg = f"hidden_dims must all be >= 1, got {list(value)}"
            raise ValueError(msg)
        return value


class EvalConfig(_Strict):
    scenarios: tuple[int, ...] = (1, 2, 3, 4, 5)  # 标准场景集 = 场景种子
    random_episodes: int = Field(default=200, ge=0)


class BenchmarkConfig(_Strict):
    algorithms: tuple[Algorithm, ...] = (Algorithm.HAPPO, Algorithm.INDEPENDENT_PPO, Algorithm.RANDOM, Algorithm.GREEDY)


class RunConfig(_Strict):
    feeder: str
    algorithm: Algorithm = Algorithm.HAPPO
    seeds: tuple[int, ...] = (1,)
    output_dir: str = "runs"
    checkpoint_every: int = Field(default=0, ge=0)  # 0 = 只保存最终检查点
    record_wallclock: bool = False
    workers: int | None = Field(default=None, ge=1)
    scenario: ScenarioConfig = ScenarioConfig()
    reward: RewardConfig = RewardConfig()
    train: TrainConfig = TrainConfig()
    eval: EvalConfig = EvalConfig()
    benchmark: BenchmarkConfig = BenchmarkConfig()

    @field_validator("seeds")
    @classmethod
    def _check_seeds(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value:
            msg = "seeds must not be empty"
            raise ValueError(msg)
        return value

    def output_path(self, base_dir: Path | None = None) -> Path:
        path = Path(self.output_dir)
        if base_dir is not None and not path.is_absolute():
            return base_dir / path
        return path
