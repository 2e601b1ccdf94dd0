# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only
import numpy as np

from GridRestore.common.models import TrainConfig

from .nn import (
    AdamState,
    ForwardCache,
    MlpSpec,
    ParamVector,
    adam_step,
    backward,
    categorical_head,
    forward,
    forward_with_cache,
    init_params,
    params_digest,
    sample,
)


class _Network:
    def __init__(self, spec: MlpSpec, params: ParamVector, adam: AdamState) -> None:
        self.spec = spec
        self.params = params
        self.adam = adam

    def forward(self, x: np.ndarray) -> np.ndarray:
        return forward(self.spec, self.params, x)

    def forward_with_cache(self, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
        return forward_with_cache(self.spec, self.params, x)

    def gradient(self, cache: ForwardCache, output_grad: np.ndarray) -> ParamVector:
        return backward(self.spec, self.params, cache, output_grad)

    def apply_gradient(self, grad: np.ndarray) -> None:
        self.params, self.adam = adam_step(self.adam, self.params, grad)

    def digest(self) -> str:
        return params_digest(self.params)


class Actor(_Network):
    """分散式执行的策略网络,输出离散动作的logits"""

    @classmethod
    def create(cls, obs_dim: int, action_dim: int, config: TrainConfig, rng: np.random.Generator) -> "Actor":
        spec = MlpSpec(obs_dim, tuple(config.hidden_dims), action_dim)
        params = init_params(spec, rng, output_gain=config.actor_out_gain)
        return cls(spec, params, AdamState.zeros(spec.n_params, config.actor_lr, config.adam_beta1, config.adam_beta2, config.adam_eps))

    @property
    def action_dim(self) -> int:
        return self.spec.output_dim

    def distribution(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return categorical_head(self.forward(obs))

    def act(self, obs: np.ndarray, rng: np.random.Generator | None = None, greedy: bool = False) -> tuple[int, float]:
        """采样(或取argmax)一个动作,返回 (动作, 对数概率)"""
        probs, log_probs = self.distribution(obs)
        if greedy or rng is None:
            action = int(np.argmax(probs))
        else:
            action = sample(probs, rng)
        return action, float(log_probs[action])

    def log_prob(self, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        _, log_probs = self.distribution(obs)
        return log_probs[np.arange(len(actions)), actions]


class Critic(_Network):
    """价值网络,输出标量 V(s)"""

    @classmethod
    def create(cls, input_dim: int, config: TrainConfig, rng: np.random.Generator) -> "Critic":
        spec = MlpSpec(input_dim, tuple(config.hidden_dims), 1)
        params = init_params(spec, rng, output_gain=1.0)
        return cls(spec, params, AdamState.zeros(spec.n_params, config.critic_lr, config.adam_beta1, config.adam_beta2, config.adam_eps))

    def value(self, x: np.ndarray) -> np.ndarray | float:
        out = self.forward(x)
        return float(out[0]) if out.ndim == 1 else out[:, 0]
