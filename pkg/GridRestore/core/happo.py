# SPDX-FileCopyrightText: Copyright (C) 2025 GridRestore developers
# SPDX-License-Identifier: GPL-3.0-only

"""HAPPO训练: 在线采样、集中式λ-GAE、逐个智能体的裁剪策略更新与价值回归

每次迭代:
1. 用当前参数采集 T 步轨迹
2. 由集中式价值网络计算共享优势 Â_t 与回报 R̂_t
3. 按顺序逐个更新智能体,更新智能体k时其余智能体参数保持不变
4. 价值网络对 R̂_t 做均方误差回归
"""

import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
import pandas as pd

from GridRestore.common.exceptions import ConfigError, TrainingDivergedError
from GridRestore.common.logger import logger
from GridRestore.common.models import Algorithm, RunConfig, StepInfo, TrainConfig, UpdateOrder
from GridRestore.common.thread import is_exited, run_jobs

from .agents import Actor, Critic
from .checkpoint import save_checkpoint
from .env import RestorationEnv
from .nn import categorical_head, entropy

EnvFactory = Callable[[int], RestorationEnv]
CriticInput = Callable[[Sequence[np.ndarray], np.ndarray], list[np.ndarray]]
UpdateObserver = Callable[[str, int], None]


def centralized_input(observations: Sequence[np.ndarray], state: np.ndarray) -> list[np.ndarray]:  # noqa: ARG001
    """单个集中式价值网络,输入为全局状态"""
    return [state]


def local_inputs(observations: Sequence[np.ndarray], state: np.ndarray) -> list[np.ndarray]:
    """每个智能体一个本地价值网络,输入为 本地观测 + [恢复比例, ξ, t/T]"""
    return [np.concatenate([obs, state[-3:]]) for obs in observations]


@dataclass(slots=True)
class TrajectoryBuffer:
    states: np.ndarray  # (T, state_dim)
    observations: list[np.ndarray]  # 每个智能体 (T, obs_dim_i)
    critic_inputs: list[np.ndarray]  # 每个价值网络 (T, input_dim_c)
    actions: np.ndarray  # (T, N)
    log_probs: np.ndarray  # (T, N),产生动作时的参数下的对数概率
    rewards: np.ndarray  # (T,)
    values: np.ndarray  # (T, C)
    dones: np.ndarray  # (T,)
    bootstrap: np.ndarray  # (C,) V(s_T)
    infos: list[StepInfo] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def n_agents(self) -> int:
        return self.actions.shape[1]

    def terminal_infos(self) -> list[StepInfo]:
        """段内结束的回合的最后一步;没有回合结束时取最后一步"""
        terminal = [info for info, done in zip(self.infos, self.dones, strict=True) if done]
        return terminal or self.infos[-1:]


def collect_rollout(
    env: RestorationEnv,
    actors: Sequence[Actor],
    critics: Sequence[Critic],
    length: int,
    rng: np.random.Generator,
    critic_input: CriticInput = centralized_input,
    reset: bool = True,
) -> TrajectoryBuffer:
    """用当前参数采集 length 步,回合在段内结束时立即重置环境"""
    if reset or env.info is None or env.done:
        observations, state = env.reset()
    else:
        observations, state = env.observations(), env.global_state()

    n_agents = len(actors)
    states, rewards, dones, infos = [], [], [], []
    agent_obs: list[list[np.ndarray]] = [[] for _ in range(n_agents)]
    inputs: list[list[np.ndarray]] = [[] for _ in critics]
    actions = np.zeros((length, n_agents), dtype=np.int64)
    log_probs = np.zeros((length, n_agents), dtype=np.float64)
    values = np.zeros((length, len(critics)), dtype=np.float64)

    for t in range(length):
        states.append(state)
        for c, (critic, x) in enumerate(zip(critics, critic_input(observations, state), strict=True)):
            inputs[c].append(x)
            values[t, c] = critic.value(x)
        for i, (actor, obs) in enumerate(zip(actors, observations, strict=True)):
            agent_obs[i].append(obs)
            actions[t, i], log_probs[t, i] = actor.act(obs, rng)

        observations, state, reward, done, info = env.step(actions[t].tolist())
        rewards.append(reward)
        dones.append(done)
        infos.append(info)
        if done:
            observations, state = env.reset()

    bootstrap = np.array([critic.value(x) for critic, x in zip(critics, critic_input(observations, state), strict=True)])
    return TrajectoryBuffer(
        states=np.asarray(states),
        observations=[np.asarray(obs) for obs in agent_obs],
        critic_inputs=[np.asarray(x) for x in inputs],
        actions=actions,
        log_probs=log_probs,
        rewards=np.asarray(rewards, dtype=np.float64),
        values=values,
        dones=np.asarray(dones, dtype=bool),
        bootstrap=bootstrap,
        infos=infos,
    )


def gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap: float,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """λ-GAE后向递推

    δ_t = r_t + γ·V(s_{t+1})·(1-d_t) - V(s_t)
    Â_t = δ_t + γλ·(1-d_t)·Â_{t+1}
    R̂_t = Â_t + V(s_t)
    """
    length = len(rewards)
    advantages = np.zeros(length, dtype=np.float64)
    next_value = float(bootstrap)
    running = 0.0
    for t in range(length - 1, -1, -1):
        not_done = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_value * not_done - values[t]
        running = delta + gamma * lam * not_done * running
        advantages[t] = running
        next_value = values[t]
    return advantages, advantages + values


def compute_gae(buffer: TrajectoryBuffer, gamma: float, gae_lambda: float) -> tuple[np.ndarray, np.ndarray]:
    """对每个价值网络列计算优势与回报,返回形状均为 (T, C)"""
    advantages = np.zeros_like(buffer.values)
    returns = np.zeros_like(buffer.values)
    for c in range(buffer.values.shape[1]):
        advantages[:, c], returns[:, c] = gae(buffer.rewards, buffer.values[:, c], buffer.dones, buffer.bootstrap[c], gamma, gae_lambda)
    return advantages, returns


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    """按列标准化为均值0、标准差1;标准差为0时只减去均值"""
    centered = advantages - advantages.mean(axis=0)
    std = advantages.std(axis=0)
    return np.divide(centered, std, out=centered.copy(), where=std > 0)


@dataclass(frozen=True, slots=True)
class SurrogateResult:
    loss: float  # -(裁剪代理目标) - β_ent·熵,越小越好
    grad_logits: np.ndarray
    surrogate: float
    entropy: float
    clip_fraction: float


def clipped_surrogate(
    logits: np.ndarray,
    actions: np.ndarray,
    old_log_probs: np.ndarray,
    advantages: np.ndarray,
    clip_eps: float,
    ent_coef: float,
) -> SurrogateResult:
    """PPO裁剪代理目标及其对logits的梯度

    L = -mean(min(ρÂ, clip(ρ, 1-ε, 1+ε)Â)) - β_ent·mean(H)
    """
    batch = len(actions)
    probs, log_probs = categorical_head(logits)
    rows = np.arange(batch)
    ratio = np.exp(log_probs[rows, actions] - old_log_probs)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    surrogate = np.minimum(unclipped, clipped)
    if logger.is_debug():
        bound = np.maximum(advantages * (1.0 + clip_eps), advantages * (1.0 - clip_eps))
        if not np.all(surrogate <= bound + 1e-12):
            msg = "裁剪代理目标超出上界"
            raise TrainingDivergedError(msg, {"max_excess": float(np.max(surrogate - bound))})

    ent = -(probs * log_probs).sum(axis=-1)

    # 裁剪项取到最小值时对参数无梯度
    active = np.where(unclipped <= clipped, unclipped, 0.0)
    onehot = np.zeros_like(probs)
    onehot[rows, actions] = 1.0
    grad_surrogate = active[:, None] * (onehot - probs) / batch
    grad_entropy = -probs * (log_probs + ent[:, None]) / batch
    grad_logits = -grad_surrogate - ent_coef * grad_entropy

    surrogate_mean = float(surrogate.mean())
    entropy_mean = float(ent.mean())
    return SurrogateResult(
        loss=-surrogate_mean - ent_coef * entropy_mean,
        grad_logits=grad_logits,
        surrogate=surrogate_mean,
        entropy=entropy_mean,
        clip_fraction=float(np.mean(np.abs(ratio - 1.0) > clip_eps)),
    )


def minibatches(size: int, minibatch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    permutation = rng.permutation(size)
    if minibatch_size >= size:
        return [permutation]
    return [permutation[start : start + minibatch_size] for start in range(0, size, minibatch_size)]


def update_order(n_agents: int, config: TrainConfig, rng: np.random.Generator) -> list[int]:
    match config.agent_update_order:
        case UpdateOrder.FIXED:
            return list(range(n_agents))
        case UpdateOrder.RANDOM:
            return [int(i) for i in rng.permutation(n_agents)]


@dataclass(frozen=True, slots=True)
class ActorStats:
    agent: int
    loss: float
    entropy: float
    clip_fraction: float


def _guard(value: float, grad: np.ndarray, diagnostics: dict) -> None:
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        diagnostics = {**diagnostics, "loss": float(value), "grad_finite": bool(np.all(np.isfinite(grad)))}
        msg = f"训练发散: 损失或梯度出现非有限值 {diagnostics}"
        raise TrainingDivergedError(msg, diagnostics)


def sequential_update(
    actors: Sequence[Actor],
    buffer: TrajectoryBuffer,
    advantages: np.ndarray,
    config: TrainConfig,
    rng: np.random.Generator,
    observer: UpdateObserver | None = None,
    happo_strict: bool | None = None,
) -> list[ActorStats]:
    """按顺序逐个更新智能体的策略

    :param advantages: 共享优势 (T,) 或每个智能体一列 (T, N)
    :param observer: 每个智能体更新阶段前后以 ("start"|"end", 智能体编号) 调用
    :param happo_strict: 将已更新智能体的概率比连乘进后续智能体的优势,默认取配置
    :return: 按智能体编号排列的统计
    """
    strict = config.happo_strict if happo_strict is None else happo_strict
    length = len(buffer)
    per_agent = advantages.ndim == 2
    compound = np.ones(length, dtype=np.float64)
    stats: dict[int, ActorStats] = {}

    for k in update_order(len(actors), config, rng):
        if observer is not None:
            observer("start", k)
        actor = actors[k]
        obs = buffer.observations[k]
        actions = buffer.actions[:, k]
        old_log_probs = buffer.log_probs[:, k]
        adv = (advantages[:, k] if per_agent else advantages) * compound

        losses = []
        clip_fractions = []
        for epoch in range(config.ppo_epochs):
            for batch in minibatches(length, config.minibatch_size, rng):
                logits, cache = actor.forward_with_cache(obs[batch])
                result = clipped_surrogate(logits, actions[batch], old_log_probs[batch], adv[batch], config.clip_eps, config.ent_coef)
                grad = actor.gradient(cache, result.grad_logits)
                _guard(result.loss, grad, {"agent": k, "epoch": epoch, "max_abs_logit": float(np.abs(logits).max())})
                actor.apply_gradient(grad)
                losses.append(result.loss)
                clip_fractions.append(result.clip_fraction)

        probs, _ = actor.distribution(obs)
        if strict:
            compound = compound * np.exp(actor.log_prob(obs, actions) - old_log_probs)
        stats[k] = ActorStats(
            agent=k,
            loss=float(np.mean(losses)),
            entropy=float(np.mean(entropy(probs))),
            clip_fraction=float(np.mean(clip_fractions)),
        )
        if observer is not None:
            observer("end", k)

    return [stats[k] for k in range(len(actors))]


@dataclass(frozen=True, slots=True)
class CriticStats:
    loss_before: float
    loss_after: float


def critic_update(critic: Critic, inputs: np.ndarray, returns: np.ndarray, config: TrainConfig, rng: np.random.Generator) -> CriticStats:
    """对回报做均方误差回归 L = mean((V(s) - R̂)²)"""
    length = len(returns)
    loss_before = float(np.mean((critic.value(inputs) - returns) ** 2))
    for epoch in range(config.critic_epochs):
        for batch in minibatches(length, config.minibatch_size, rng):
            output, cache = critic.forward_with_cache(inputs[batch])
            error = output[:, 0] - returns[batch]
            loss = float(np.mean(error**2))
            grad = critic.gradient(cache, (2.0 * error / len(batch))[:, None])
            _guard(loss, grad, {"critic": True, "epoch": epoch})
            critic.apply_gradient(grad)
    loss_after = float(np.mean((critic.value(inputs) - returns) ** 2))
    if not np.isfinite(loss_after):
        msg = "训练发散: 价值网络损失非有限"
        raise TrainingDivergedError(msg, {"critic": True, "loss_before": loss_before, "loss_after": loss_after})
    return CriticStats(loss_before, loss_after)


@dataclass(frozen=True, slots=True)
class IterationStats:
    iteration: int
    steps: int
    mean_reward: float
    cum_reward: float
    restored_frac: float
    weighted_restored_kw: float
    restored_kw: float
    restored_cap_pct: float
    xi_mean: float
    actor_losses: tuple[float, ...]
    critic_loss: float
    entropies: tuple[float, ...]


class Trainer:
    """单个种子的训练器(HAPPO 或 独立PPO)

    随机数消耗顺序固定: 策略网络初始化, 价值网络初始化, 然后每次迭代依次为 采样, 策略更新, 价值更新
    """

    def __init__(self, env: RestorationEnv, config: TrainConfig, seed: int, algorithm: Algorithm = Algorithm.HAPPO) -> None:
        if not algorithm.learns:
            msg = f"算法 {algorithm.value} 不需要训练"
            raise ConfigError(msg)
        if env.horizon < 1:
            msg = "回合长度为0时无法训练"
            raise ConfigError(msg)
        self.env = env
        self.config = config
        self.seed = seed
        self.algorithm = algorithm
        self.rng = np.random.default_rng(seed)
        self.actors = [Actor.create(obs_dim, action_dim, config, self.rng) for obs_dim, action_dim in zip(env.obs_dims, env.action_dims, strict=True)]
        if algorithm is Algorithm.HAPPO:
            self.critic_input: CriticInput = centralized_input
            self.critics = [Critic.create(env.state_dim, config, self.rng)]
        else:
            self.critic_input = local_inputs
            self.critics = [Critic.create(obs_dim + 3, config, self.rng) for obs_dim in env.obs_dims]
        self.rollout_length = config.rollout_length or env.horizon
        self.iteration = 0
        self.steps = 0

    def iterate(self, observer: UpdateObserver | None = None) -> IterationStats:
        config = self.config
        buffer = collect_rollout(
            self.env,
            self.actors,
            self.critics,
            self.rollout_length,
            self.rng,
            self.critic_input,
            reset=config.reset_each_iteration or self.iteration == 0,
        )
        advantages, returns = compute_gae(buffer, config.gamma, config.gae_lambda)
        if self.algorithm is Algorithm.HAPPO:
            actor_advantages = advantages[:, 0]
            strict = config.happo_strict
        else:
            actor_advantages = advantages
            strict = False
        if config.normalize_advantages:
            # 逐列按一维标准化
            if actor_advantages.ndim == 2:
                actor_advantages = np.column_stack([normalize_advantages(column) for column in actor_advantages.T])
            else:
                actor_advantages = normalize_advantages(actor_advantages)

        try:
            actor_stats = sequential_update(self.actors, buffer, actor_advantages, config, self.rng, observer, happo_strict=strict)
            critic_stats = [
                critic_update(critic, buffer.critic_inputs[c], returns[:, c], config, self.rng) for c, critic in enumerate(self.critics)
            ]
        except TrainingDivergedError as e:
            e.diagnostics.update({"iteration": self.iteration + 1, "seed": self.seed})
            raise

        self.iteration += 1
        self.steps += len(buffer)
        terminal = buffer.terminal_infos()
        restored_kw = float(np.mean([info.restored_kw for info in terminal]))
        return IterationStats(
            iteration=self.iteration,
            steps=self.steps,
            mean_reward=float(buffer.rewards.mean()),
            cum_reward=float(buffer.rewards.sum()),
            restored_frac=float(np.mean([info.weighted_fraction for info in terminal])),
            weighted_restored_kw=float(np.mean([info.weighted_kw for info in terminal])),
            restored_kw=restored_kw,
            restored_cap_pct=100.0 * restored_kw / self.env.graph.p_gen_cap_kw,
            xi_mean=float(np.mean([info.xi for info in buffer.infos])),
            actor_losses=tuple(stat.loss for stat in actor_stats),
            critic_loss=float(np.mean([stat.loss_after for stat in critic_stats])),
            entropies=tuple(stat.entropy for stat in actor_stats),
        )


def metrics_columns(n_agents: int) -> list[str]:
    return [
        "iteration",
        "steps",
        "mean_reward",
        "cum_reward",
        "restored_frac",
        "weighted_restored_kw",
        "restored_kw",
        "restored_cap_pct",
        "xi_mean",
        *(f"actor_loss_{i}" for i in range(n_agents)),
        "critic_loss",
        *(f"entropy_{i}" for i in range(n_agents)),
        "wallclock_s",
    ]


def metrics_row(stats: IterationStats, wallclock_s: float | None) -> dict[str, float | int | None]:
    row: dict[str, float | int | None] = {
        "iteration": stats.iteration,
        "steps": stats.steps,
        "mean_reward": stats.mean_reward,
        "cum_reward": stats.cum_reward,
        "restored_frac": stats.restored_frac,
        "weighted_restored_kw": stats.weighted_restored_kw,
        "restored_kw": stats.restored_kw,
        "restored_cap_pct": stats.restored_cap_pct,
        "xi_mean": stats.xi_mean,
    }
    row.update({f"actor_loss_{i}": loss for i, loss in enumerate(stats.actor_losses)})
    row["critic_loss"] = stats.critic_loss
    row.update({f"entropy_{i}": value for i, value in enumerate(stats.entropies)})
    row["wallclock_s"] = wallclock_s
    return row


class CsvAppender:
    """逐行追加写入CSV,每行写完即落盘"""

    def __init__(self, path: Path, columns: Sequence[str]) -> None:
        self.path = path
        self.columns = list(columns)
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(columns=self.columns).to_csv(path, index=False)

    def append(self, row: dict) -> None:
        pd.DataFrame([row], columns=self.columns).to_csv(self.path, mode="a", header=False, index=False)


@dataclass(frozen=True, slots=True)
class SeedRun:
    seed: int
    directory: Path
    metrics_path: Path
    final_checkpoint: Path
    history: tuple[IterationStats, ...]
    trainer: Trainer = field(repr=False)
    train_wallclock_s: float = 0.0


def run_seed(
    env_factory: EnvFactory,
    run_config: RunConfig,
    seed: int,
    directory: Path,
    fingerprint: str,
    algorithm: Algorithm | None = None,
) -> SeedRun:
    """训练单个种子,写出 metrics.csv / timing.csv / checkpoints/"""
    algorithm = algorithm or run_config.algorithm
    config = run_config.train
    trainer = Trainer(env_factory(seed), config, seed, algorithm)
    checkpoints = directory / "checkpoints"
    metrics = CsvAppender(directory / "metrics.csv", metrics_columns(trainer.env.n_agents))
    timing = CsvAppender(directory / "timing.csv", ["iteration", "iteration_s", "elapsed_s"])

    history: list[IterationStats] = []
    started = time.perf_counter()
    try:
        for _ in range(config.iterations):
            if is_exited():
                logger.warning(f"种子 {seed}: 收到退出信号,在迭代 {trainer.iteration} 处停止")
                break
            iteration_started = time.perf_counter()
            stats = trainer.iterate()
            now = time.perf_counter()
            history.append(stats)
            metrics.append(metrics_row(stats, round(now - started, 6) if run_config.record_wallclock else None))
            timing.append({"iteration": stats.iteration, "iteration_s": now - iteration_started, "elapsed_s": now - started})

            if stats.iteration % config.log_every == 0 or stats.iteration == config.iterations:
                logger.info(
                    f"[{algorithm.value} seed={seed}] 迭代 {stats.iteration}/{config.iterations}: "
                    f"奖励 {stats.cum_reward:.4f}, 恢复比例 {stats.restored_frac:.3f}, ξ {stats.xi_mean:.4f}, "
                    f"价值损失 {stats.critic_loss:.4g}",
                )
            if run_config.checkpoint_every and stats.iteration % run_config.checkpoint_every == 0:
                save_checkpoint(checkpoints / f"iter_{stats.iteration:06d}.npz", trainer, fingerprint, run_config)
    except BaseException as e:
        # 包括 KeyboardInterrupt 与 numpy 浮点异常;已写出的指标行保留
        logger.exception(f"种子 {seed} 训练中止: {e!r}")
        save_checkpoint(checkpoints / "aborted.npz", trainer, fingerprint, run_config)
        raise

    final = save_checkpoint(checkpoints / "final.npz", trainer, fingerprint, run_config)
    return SeedRun(
        seed=seed,
        directory=directory,
        metrics_path=directory / "metrics.csv",
        final_checkpoint=final,
        history=tuple(history),
        trainer=trainer,
        train_wallclock_s=time.perf_counter() - started,
    )


def train(
    env_factory: EnvFactory,
    run_config: RunConfig,
    seeds: Sequence[int],
    out_dir: Path,
    fingerprint: str,
    algorithm: Algorithm | None = None,
) -> list[SeedRun]:
    """每个种子一个独立任务并行训练,各自写入 out_dir/seed_<s>/"""
    jobs = [partial(run_seed, env_factory, run_config, seed, out_dir / f"seed_{seed}", fingerprint, algorithm) for seed in seeds]
    return run_jobs(jobs, run_config.workers)
