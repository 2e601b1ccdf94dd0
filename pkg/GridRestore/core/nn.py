# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""最小前馈网络: tanh隐藏层 + 线性输出层,精确反向传播与Adam优化器

参数以一维float64数组(ParamVector)存储,布局由 MlpSpec.layout 描述:
按层依次为权重(输入维在前, h = x @ W + b)与偏置
"""

import hashlib
from dataclasses import dataclass, field, replace
from typing import NamedTuple, NewType

import numpy as np

from GridRestore.common.exceptions import DimensionMismatchError

ParamVector = NewType("ParamVector", np.ndarray)


class LayerSlice(NamedTuple):
    weight: slice
    bias: slice
    fan_in: int
    fan_out: int


@dataclass(frozen=True, slots=True)
class MlpSpec:
    input_dim: int
    hidden_dims: tuple[int, ...]
    output_dim: int
    activation: str = "tanh"
    output_head: str = "linear"

    layout: tuple[LayerSlice, ...] = field(init=False, repr=False, compare=False)
    n_params: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(dim < 1 for dim in dims):
            msg = f"网络各层维度必须 >= 1: {dims}"
            raise DimensionMismatchError(msg)
        if self.activation != "tanh" or self.output_head != "linear":
            msg = f"不支持的网络结构: activation={self.activation}, output_head={self.output_head}"
            raise DimensionMismatchError(msg)

        layout = []
        offset = 0
        for fan_in, fan_out in zip(dims[:-1], dims[1:], strict=True):
            weight = slice(offset, offset + fan_in * fan_out)
            offset += fan_in * fan_out
            bias = slice(offset, offset + fan_out)
            offset += fan_out
            layout.append(LayerSlice(weight, bias, fan_in, fan_out))
        object.__setattr__(self, "layout", tuple(layout))
        object.__setattr__(self, "n_params", offset)


class ForwardCache(NamedTuple):
    inputs: tuple[np.ndarray, ...]  # 每层的输入(第0层为网络输入)
    batched: bool


def _check_params(spec: MlpSpec, params: np.ndarray) -> None:
    if params.ndim != 1 or params.shape[0] != spec.n_params:
        msg = f"参数长度 {params.shape} 与网络结构不符 (需要 {spec.n_params})"
        raise DimensionMismatchError(msg)


def _as_batch(spec: MlpSpec, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    if x.ndim not in (1, 2) or x.shape[-1] != spec.input_dim:
        msg = f"输入维度 {x.shape} 与 input_dim={spec.input_dim} 不符"
        raise DimensionMismatchError(msg)
    return (x if batched else x[None, :]), batched


def layer_params(spec: MlpSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """按层返回 (W, b) 视图"""
    return [(params[s.weight].reshape(s.fan_in, s.fan_out), params[s.bias]) for s in spec.layout]


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_params(spec: MlpSpec, rng: np.random.Generator, hidden_gain: float = np.sqrt(2.0), output_gain: float = 1.0) -> ParamVector:
    """正交初始化: 隐藏层增益 hidden_gain,输出层增益 output_gain,偏置为0"""
    params = np.zeros(spec.n_params, dtype=np.float64)
    last = len(spec.layout) - 1
    for i, s in enumerate(spec.layout):
        gain = output_gain if i == last else hidden_gain
        params[s.weight] = _orthogonal(rng, s.fan_in, s.fan_out, gain).ravel()
    return ParamVector(params)


def forward_with_cache(spec: MlpSpec, params: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    _check_params(spec, params)
    h, batched = _as_batch(spec, x)
    inputs = []
    layers = layer_params(spec, params)
    for i, (w, b) in enumerate(layers):
        inputs.append(h)
        h = h @ w + b
        if i < len(layers) - 1:
            h = np.tanh(h)
    return (h if batched else h[0]), ForwardCache(tuple(inputs), batched)


def forward(spec: MlpSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """前向计算,输入可为单个向量 (input_dim,) 或批量 (B, input_dim)"""
    return forward_with_cache(spec, params, x)[0]


def backward(spec: MlpSpec, params: np.ndarray, cache: ForwardCache, output_grad: np.ndarray) -> ParamVector:
    """给定损失对输出的梯度,返回损失对全部参数的梯度(批量内求和)"""
    _check_params(spec, params)
    delta = np.asarray(output_grad, dtype=np.float64)
    if not cache.batched:
        delta = delta[None, :]
    if delta.shape != (cache.inputs[0].shape[0], spec.output_dim):
        msg = f"输出梯度形状 {delta.shape} 与网络输出不符"
        raise DimensionMismatchError(msg)

    grad = np.zeros(spec.n_params, dtype=np.float64)
    layers = layer_params(spec, params)
    for i in range(len(layers) - 1, -1, -1):
        s = spec.layout[i]
        layer_input = cache.inputs[i]
        grad[s.weight] = (layer_input.T @ delta).ravel()
        grad[s.bias] = delta.sum(axis=0)
        if i > 0:
            # layer_input 是上一层的tanh输出
            delta = (delta @ layers[i][0].T) * (1.0 - layer_input**2)
    return ParamVector(grad)


def categorical_head(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """数值稳定的softmax,返回 (概率, 对数概率),最后一维为动作维"""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_norm
    return np.exp(log_probs), log_probs


def sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    """逆CDF采样,每次调用恰好消耗一个均匀随机数"""
    cdf = np.cumsum(probs)
    index = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(index, len(probs) - 1)


def entropy(probs: np.ndarray) -> np.ndarray | float:
    probs = np.asarray(probs, dtype=np.float64)
    terms = np.where(probs > 0, probs * np.log(np.where(probs > 0, probs, 1.0)), 0.0)
    result = -terms.sum(axis=-1)
    return float(result) if result.ndim == 0 else result


@dataclass(frozen=True, slots=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n_params: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(np.zeros(n_params), np.zeros(n_params), 0, lr, beta1, beta2, eps)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray) -> tuple[ParamVector, AdamState]:
    """带偏差修正的Adam一步(梯度下降方向),返回新参数与新状态,不修改输入"""
    if not (params.shape == grad.shape == state.m.shape == state.v.shape):
        msg = f"Adam形状不一致: params {params.shape}, grad {grad.shape}, m {state.m.shape}"
        raise DimensionMismatchError(msg)
    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad**2
    m_hat = m / (1.0 - state.beta1**step)
    v_hat = v / (1.0 - state.beta2**step)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return ParamVector(new_params), replace(state, m=m, v=v, step=step)


def params_digest(params: np.ndarray) -> str:
    """参数的sha256摘要,用于冻结检查"""
    return hashlib.sha256(np.ascontiguousarray(params, dtype=np.float64).tobytes()).hexdigest()
