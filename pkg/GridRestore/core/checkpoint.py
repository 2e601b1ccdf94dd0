# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""版本化检查点(.npz)

包含所有网络参数、Adam状态与随机数生成器状态,读写往返精确
元数据以JSON字符串保存在 "meta" 数组中,读取时不需要pickle
"""

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from GridRestore.common.exceptions import CheckpointError, CheckpointMismatchError
from GridRestore.common.logger import logger
from GridRestore.common.models import RunConfig
from GridRestore.common.version import CHECKPOINT_FORMAT_VERSION, code_version, is_compatible_format

from .agents import Actor, Critic
from .nn import AdamState, MlpSpec, ParamVector

if TYPE_CHECKING:
    from .env import RestorationEnv
    from .happo import Trainer


@dataclass(frozen=True, slots=True)
class NetworkState:
    params: np.ndarray
    adam: AdamState


@dataclass(frozen=True, slots=True)
class Checkpoint:
    meta: dict[str, Any]
    actors: tuple[NetworkState, ...]
    critics: tuple[NetworkState, ...]

    @property
    def obs_dims(self) -> tuple[int, ...]:
        return tuple(self.meta["obs_dims"])

    @property
    def action_dims(self) -> tuple[int, ...]:
        return tuple(self.meta["action_dims"])

    @property
    def hidden_dims(self) -> tuple[int, ...]:
        return tuple(self.meta["hidden_dims"])

    @property
    def run_config(self) -> RunConfig | None:
        data = self.meta.get("run_config")
        return RunConfig.model_validate(data) if data is not None else None


def _network_arrays(prefix: str, network: Actor | Critic) -> dict[str, np.ndarray]:
    return {
        f"{prefix}_params": network.params,
        f"{prefix}_m": network.adam.m,
        f"{prefix}_v": network.adam.v,
    }


def _adam_meta(network: Actor | Critic) -> dict[str, float | int]:
    adam = network.adam
    return {"step": adam.step, "lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2, "eps": adam.eps}


def save_checkpoint(path: str | Path, trainer: "Trainer", fingerprint: str, run_config: RunConfig | None = None) -> Path:
    """保存训练器的完整状态,先写临时文件再替换"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    env = trainer.env
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "code_version": code_version(),
        "feeder_fingerprint": fingerprint,
        "algorithm": trainer.algorithm.value,
        "seed": trainer.seed,
        "iteration": trainer.iteration,
        "steps": trainer.steps,
        "obs_dims": list(env.obs_dims),
        "action_dims": list(env.action_dims),
        "state_dim": env.state_dim,
        "critic_input_dims": [critic.spec.input_dim for critic in trainer.critics],
        "hidden_dims": list(trainer.config.hidden_dims),
        "actor_adam": [_adam_meta(actor) for actor in trainer.actors],
        "critic_adam": [_adam_meta(critic) for critic in trainer.critics],
        "rng_state": trainer.rng.bit_generator.state,
        "env_rng_state": env.rng.bit_generator.state,
        "run_config": run_config.model_dump(mode="json") if run_config is not None else None,
    }
    arrays: dict[str, np.ndarray] = {"meta": np.array(json.dumps(meta, sort_keys=True))}
    for i, actor in enumerate(trainer.actors):
        arrays.update(_network_arrays(f"actor_{i}", actor))
    for i, critic in enumerate(trainer.critics):
        arrays.update(_network_arrays(f"critic_{i}", critic))

    tmp_path = path.with_name(path.name + ".tmp")
    with tmp_path.open("wb") as f:
        np.savez(f, **arrays)
    os.replace(tmp_path, path)
    logger.info(f"已保存检查点 {path} (迭代 {trainer.iteration})")
    return path


def _load_networks(data: Any, prefix: str, adam_meta: list[dict[str, Any]]) -> tuple[NetworkState, ...]:
    networks = []
    for i, adam in enumerate(adam_meta):
        networks.append(
            NetworkState(
                params=np.array(data[f"{prefix}_{i}_params"], dtype=np.float64),
                adam=AdamState(
                    m=np.array(data[f"{prefix}_{i}_m"], dtype=np.float64),
                    v=np.array(data[f"{prefix}_{i}_v"], dtype=np.float64),
                    step=int(adam["step"]),
                    lr=float(adam["lr"]),
                    beta1=float(adam["beta1"]),
                    beta2=float(adam["beta2"]),
                    eps=float(adam["eps"]),
                ),
            ),
        )
    return tuple(networks)


def load_checkpoint(path: str | Path) -> Checkpoint:
    """读取检查点

    :raises CheckpointError: 文件不存在、损坏或格式版本不兼容
    """
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            version = meta.get("format_version", "v0.0.0")
            if not is_compatible_format(version):
                msg = f"检查点格式版本 {version} 与当前版本 {CHECKPOINT_FORMAT_VERSION} 不兼容"
                raise CheckpointError(msg)
            actors = _load_networks(data, "actor", meta["actor_adam"])
            critics = _load_networks(data, "critic", meta["critic_adam"])
    except CheckpointError:
        raise
    except (OSError, KeyError, ValueError) as e:
        msg = f"无法读取检查点 {path}: {e}"
        raise CheckpointError(msg) from e
    return Checkpoint(meta=meta, actors=actors, critics=critics)


def check_compatible(checkpoint: Checkpoint, env: "RestorationEnv", fingerprint: str | None = None) -> None:
    """确认检查点与环境的维度一致

    :raises CheckpointMismatchError: 信息中给出双方的维度
    """
    if checkpoint.obs_dims != env.obs_dims or checkpoint.action_dims != env.action_dims:
        msg = (
            f"检查点与馈线维度不一致: 检查点 obs_dims={list(checkpoint.obs_dims)}, action_dims={list(checkpoint.action_dims)}; "
            f"馈线 obs_dims={list(env.obs_dims)}, action_dims={list(env.action_dims)}"
        )
        raise CheckpointMismatchError(msg)
    if fingerprint is not None and checkpoint.meta.get("feeder_fingerprint") != fingerprint:
        logger.warning("检查点的馈线指纹与当前馈线不同(维度一致,继续评估)")


def build_actors(checkpoint: Checkpoint) -> list[Actor]:
    """由检查点重建策略网络(用于评估)"""
    actors = []
    for obs_dim, action_dim, state in zip(checkpoint.obs_dims, checkpoint.action_dims, checkpoint.actors, strict=True):
        spec = MlpSpec(obs_dim, checkpoint.hidden_dims, action_dim)
        if state.params.shape != (spec.n_params,):
            msg = f"检查点中的参数长度 {state.params.shape[0]} 与网络结构 {spec} 不符"
            raise CheckpointMismatchError(msg)
        actors.append(Actor(spec, ParamVector(state.params.copy()), state.adam))
    return actors


def restore_trainer(trainer: "Trainer", checkpoint: Checkpoint) -> None:
    """将检查点中的全部状态恢复到训练器(包括随机数生成器)"""
    check_compatible(checkpoint, trainer.env)
    if len(checkpoint.critics) != len(trainer.critics):
        msg = f"检查点有 {len(checkpoint.critics)} 个价值网络,训练器需要 {len(trainer.critics)} 个"
        raise CheckpointMismatchError(msg)
    for actor, state in zip(trainer.actors, checkpoint.actors, strict=True):
        actor.params, actor.adam = ParamVector(state.params.copy()), state.adam
    for critic, state in zip(trainer.critics, checkpoint.critics, strict=True):
        if state.params.shape != critic.params.shape:
            msg = f"价值网络参数长度不一致: 检查点 {state.params.shape[0]}, 训练器 {critic.params.shape[0]}"
            raise CheckpointMismatchError(msg)
        critic.params, critic.adam = ParamVector(state.params.copy()), state.adam
    trainer.rng.bit_generator.state = checkpoint.meta["rng_state"]
    trainer.env.rng.bit_generator.state = checkpoint.meta["env_rng_state"]
    trainer.iteration = int(checkpoint.meta["iteration"])
    trainer.steps = int(checkpoint.meta["steps"])
