"""Joint PPO training of the sender and the receiver."""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import nn, rng as rngmod
from .agents import (
    ActMode,
    AgentConfig,
    ReceiverPolicy,
    SenderPolicy,
    receiver_choose,
    sender_contexts,
    sender_log_prob_entropy,
    sender_step,
)
from .game import ConfigError, GameConfig, TrialBatch, compute_reward, sample_trials
from .perception import Dataset, generate_synthetic_dataset, load_feature_file
from .renderer import MAX, StrokeCache, composite

log = logging.getLogger(__name__)

METRIC_COLUMNS = (
    "episode",
    "success_ma",
    "sender_policy_loss",
    "receiver_policy_loss",
    "sender_entropy",
    "receiver_entropy",
    "clip_fraction",
)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class PPOConfig:
    clip_eps: float = 0.2
    learning_rate: float = 3e-4
    epochs_per_batch: int = 4
    episodes_per_batch: int = 256
    minibatch_size: int = 64
    gamma: float = 1.0
    gae_lambda: float = 0.95
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    total_episodes: int = 100_000

    def __post_init__(self):
        if not 0 < self.clip_eps < 1:
            raise ConfigError(f"clip_eps must be in (0, 1), got {self.clip_eps}")
        if not (0 <= self.gamma <= 1 and 0 <= self.gae_lambda <= 1):
            raise ConfigError("gamma and gae_lambda must be in [0, 1]")
        for name in ("epochs_per_batch", "episodes_per_batch", "minibatch_size", "total_episodes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "synthetic"
    num_classes: int = 10
    per_class: int = 100
    noise_sigma: float = 0.1
    seed: int = 7
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("synthetic", "file"):
            raise ConfigError(f"dataset kind must be 'synthetic' or 'file', got {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ConfigError("dataset kind 'file' needs a path")

    def build(self, feature_dim: int) -> Dataset:
        if self.kind == "file":
            if not Path(self.path).is_file():
                raise ConfigError(f"feature file not found: {self.path}")
            return load_feature_file(self.path)
        return generate_synthetic_dataset(self.num_classes, self.per_class, feature_dim, self.noise_sigma, self.seed)


@dataclass(frozen=True)
class RunConfig:
    game: GameConfig = field(default_factory=GameConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    workers: int = 1
    checkpoint_interval: int = 50_000
    log_interval: int = 1000
    stop_at_success: float | None = None
    output_dir: str = "run"

    @property
    def seed(self) -> int:
        return self.game.seed

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.log_interval < 1 or self.checkpoint_interval < 1:
            raise ConfigError("log_interval and checkpoint_interval must be >= 1")


# ----------------------------------------------------------------- rollouts

@dataclass
class RolloutBatch:
    trials: TrialBatch
    context: np.ndarray        # (N, ctx)
    obs: np.ndarray            # (N, L, S, S) canvas seen before each stroke
    bins: np.ndarray           # (N, L, 8)
    flags: np.ndarray          # (N, L)
    mask: np.ndarray           # (N, L) 1 where the step happened
    s_logp: np.ndarray         # (N, L)
    s_value: np.ndarray        # (N, L)
    s_reward: np.ndarray       # (N, L)
    lengths: np.ndarray        # (N,)
    symbols: np.ndarray        # (N, S, S) final canvas W
    candidates: np.ndarray     # (N, K, d)
    choice: np.ndarray         # (N,)
    r_logp: np.ndarray
    r_value: np.ndarray
    reward: np.ndarray         # (N,)

    def __len__(self) -> int:
        return len(self.reward)

    @property
    def max_strokes(self) -> int:
        return self.mask.shape[1]

    def select(self, idx: np.ndarray) -> "RolloutBatch":
        trials = TrialBatch(self.trials.target[idx], self.trials.distractors[idx],
                            self.trials.candidates[idx], self.trials.target_position[idx])
        kw = {k: getattr(self, k)[idx] for k in self.__dataclass_fields__ if k != "trials"}
        return RolloutBatch(trials=trials, **kw)

    @staticmethod
    def concat(parts: list["RolloutBatch"]) -> "RolloutBatch":
        trials = TrialBatch(*(np.concatenate([getattr(p.trials, k) for p in parts])
                              for k in ("target", "distractors", "candidates", "target_position")))
        kw = {k: np.concatenate([getattr(p, k) for p in parts])
              for k in RolloutBatch.__dataclass_fields__ if k != "trials"}
        return RolloutBatch(trials=trials, **kw)


@dataclass
class SenderRollout:
    context: np.ndarray
    obs: np.ndarray
    bins: np.ndarray
    flags: np.ndarray
    mask: np.ndarray
    logp: np.ndarray
    value: np.ndarray
    lengths: np.ndarray
    canvas: np.ndarray


def write_symbols(dataset: Dataset, game: GameConfig, sender: SenderPolicy, trials: TrialBatch,
                  rng: np.random.Generator, cache: StrokeCache, mode: ActMode = ActMode.SAMPLE,
                  composite_mode: str = MAX) -> SenderRollout:
    """Let the sender draw one symbol per trial, stroke by stroke."""
    n, L, S = len(trials), game.max_strokes, game.canvas_size
    ctx = sender_contexts(dataset, trials, game.sender_mode)
    obs = np.zeros((n, L, S, S))
    bins = np.zeros((n, L, 8), dtype=np.int64)
    flags = np.zeros((n, L), dtype=np.int64)
    mask = np.zeros((n, L))
    logp = np.zeros((n, L))
    value = np.zeros((n, L))
    canvas = np.zeros((n, S, S))
    active = np.ones(n, dtype=bool)
    lengths = np.zeros(n, dtype=np.int64)
    state = sender.initial_state(n)
    for t in range(L):
        if not active.any():
            break
        obs[:, t] = canvas
        step = sender_step(sender, canvas, state, ctx, rng, mode, step=t, max_strokes=L)
        mask[active, t] = 1.0
        bins[:, t] = step.bins
        flags[:, t] = step.flag
        logp[:, t] = np.where(active, step.log_prob, 0.0)
        value[:, t] = np.where(active, step.value, 0.0)
        canvas[active] = composite(canvas[active], cache.layers(step.bins[active]), composite_mode)
        lengths[active] += 1
        active &= step.flag == 0
        state = step.state
    return SenderRollout(ctx, obs, bins, flags, mask, logp, value, lengths, canvas)


def run_episodes(dataset: Dataset, game: GameConfig, sender: SenderPolicy, receiver: ReceiverPolicy,
                 trials: TrialBatch, rng: np.random.Generator, cache: StrokeCache,
                 sender_mode: ActMode = ActMode.SAMPLE, receiver_mode: ActMode = ActMode.SAMPLE,
                 composite_mode: str = MAX) -> RolloutBatch:
    """Play the given trials to completion and record both agents' decisions."""
    s = write_symbols(dataset, game, sender, trials, rng, cache, sender_mode, composite_mode)
    n = len(trials)
    cand = dataset.features[trials.candidates]
    r = receiver_choose(receiver, s.canvas, cand, rng, receiver_mode)
    reward = compute_reward(r.choice, trials.target_position, True)
    s_reward = np.zeros_like(s.logp)
    s_reward[np.arange(n), s.lengths - 1] = reward
    return RolloutBatch(trials, s.context, s.obs, s.bins, s.flags, s.mask, s.logp, s.value, s_reward,
                        s.lengths, s.canvas, cand, r.choice, r.log_prob, r.value, reward.astype(np.float64))


class Collector:
    """Owns per-worker RNG streams and stroke caches for rollout collection."""

    def __init__(self, dataset: Dataset, game: GameConfig, bin_counts, workers: int = 1):
        self.dataset = dataset
        self.game = game
        self.workers = workers
        self.trial_rngs = [rngmod.stream(game.seed, "trial", w) for w in range(workers)]
        self.action_rngs = [rngmod.stream(game.seed, "action", w) for w in range(workers)]
        self.caches = [StrokeCache(game.canvas_size, bin_counts) for _ in range(workers)]

    def _one(self, w: int, n: int, sender, receiver) -> RolloutBatch:
        trials = sample_trials(self.dataset, self.game, n, self.trial_rngs[w])
        return run_episodes(self.dataset, self.game, sender, receiver, trials, self.action_rngs[w], self.caches[w])

    def collect(self, sender, receiver, n: int) -> RolloutBatch:
        if self.workers == 1:
            return self._one(0, n, sender, receiver)
        shares = [n // self.workers + (w < n % self.workers) for w in range(self.workers)]
        with ThreadPoolExecutor(self.workers) as pool:
            parts = list(pool.map(lambda w: self._one(w, shares[w], sender, receiver),
                                  [w for w in range(self.workers) if shares[w]]))
        return RolloutBatch.concat(parts)

    def rng_states(self) -> dict:
        return {
            "trial": [rngmod.get_state(r) for r in self.trial_rngs],
            "action": [rngmod.get_state(r) for r in self.action_rngs],
        }

    def load_rng_states(self, states: dict) -> None:
        for r, s in zip(self.trial_rngs, states["trial"]):
            rngmod.set_state(r, s)
        for r, s in zip(self.action_rngs, states["action"]):
            rngmod.set_state(r, s)


def collect_rollouts(collector: Collector, sender, receiver, n_episodes: int) -> RolloutBatch:
    return collector.collect(sender, receiver, n_episodes)


# --------------------------------------------------------------- advantages

@dataclass
class Advantages:
    sender_raw: np.ndarray      # (N, L), zero on padded steps
    sender: np.ndarray          # normalized over valid steps
    sender_returns: np.ndarray
    receiver_raw: np.ndarray    # (N,)
    receiver: np.ndarray
    receiver_returns: np.ndarray


def _normalize(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    vals = x[mask > 0]
    if vals.size == 0:
        return np.zeros_like(x)
    out = (x - vals.mean()) / (vals.std() + 1e-8)
    return out * (mask > 0)


def gae(rewards: np.ndarray, values: np.ndarray, mask: np.ndarray, gamma: float, lam: float):
    """GAE over right-padded (N, T) episodes; returns (advantages, returns)."""
    n, T = rewards.shape
    adv = np.zeros((n, T))
    next_adv = np.zeros(n)
    next_value = np.zeros(n)
    for t in range(T - 1, -1, -1):
        cont = mask[:, t + 1] if t + 1 < T else np.zeros(n)
        delta = rewards[:, t] + gamma * next_value * cont - values[:, t]
        adv[:, t] = (delta + gamma * lam * cont * next_adv) * mask[:, t]
        next_adv = adv[:, t]
        next_value = values[:, t]
    return adv, (adv + values) * mask


def compute_advantages(batch: RolloutBatch, gamma: float, gae_lambda: float) -> Advantages:
    s_adv, s_ret = gae(batch.s_reward, batch.s_value, batch.mask, gamma, gae_lambda)
    one = np.ones((len(batch), 1))
    r_adv, r_ret = gae(batch.reward[:, None], batch.r_value[:, None], one, gamma, gae_lambda)
    return Advantages(
        s_adv, _normalize(s_adv, batch.mask), s_ret,
        r_adv[:, 0], _normalize(r_adv[:, 0], np.ones(len(batch))), r_ret[:, 0],
    )


# --------------------------------------------------------------------- PPO

def clipped_surrogate(logp: nn.Tensor, old_logp: np.ndarray, adv: np.ndarray, eps: float):
    """Per-sample ``min(r A, clip(r, 1-eps, 1+eps) A)`` and the ratio values."""
    ratio = nn.exp(nn.sub(logp, nn.Tensor(old_logp)))
    surr = nn.minimum(nn.mul(ratio, adv), nn.mul(nn.clip(ratio, 1.0 - eps, 1.0 + eps), adv))
    return surr, ratio.data


def sender_loss(sender: SenderPolicy, batch: RolloutBatch, adv: np.ndarray, returns: np.ndarray, cfg: PPOConfig):
    n, L = batch.mask.shape
    count = batch.mask.sum()
    state = sender.initial_state(n)
    surr_sum = val_sum = ent_sum = None
    ratios = []
    for t in range(L):
        m = batch.mask[:, t]
        if not m.any():
            break
        out = sender.forward(batch.obs[:, t], state, batch.context)
        logp, ent = sender_log_prob_entropy(out, batch.bins[:, t], batch.flags[:, t], t < L - 1)
        surr, ratio = clipped_surrogate(logp, batch.s_logp[:, t], adv[:, t], cfg.clip_eps)
        err = nn.sub(out.value, nn.Tensor(returns[:, t]))
        terms = (nn.total(nn.mul(surr, m)), nn.total(nn.mul(nn.square(err), m)), nn.total(nn.mul(ent, m)))
        if surr_sum is None:
            surr_sum, val_sum, ent_sum = terms
        else:
            surr_sum, val_sum, ent_sum = (nn.add(a, b) for a, b in zip((surr_sum, val_sum, ent_sum), terms))
        ratios.append(ratio[m > 0])
        state = out.state
    inv = 1.0 / count
    policy = nn.scale(surr_sum, -inv)
    value = nn.scale(val_sum, inv)
    entropy = nn.scale(ent_sum, inv)
    loss = nn.sub(nn.add(policy, nn.scale(value, cfg.value_coef)), nn.scale(entropy, cfg.entropy_coef))
    return loss, policy, value, entropy, np.concatenate(ratios)


def receiver_loss(receiver: ReceiverPolicy, batch: RolloutBatch, adv: np.ndarray, returns: np.ndarray, cfg: PPOConfig):
    logits, value = receiver.forward(batch.symbols, batch.candidates)
    logp = nn.categorical_log_prob(logits, batch.choice)
    surr, ratio = clipped_surrogate(logp, batch.r_logp, adv, cfg.clip_eps)
    policy = nn.scale(nn.mean(surr), -1.0)
    vloss = nn.mean(nn.square(nn.sub(value, nn.Tensor(returns))))
    entropy = nn.mean(nn.entropy(logits))
    loss = nn.sub(nn.add(policy, nn.scale(vloss, cfg.value_coef)), nn.scale(entropy, cfg.entropy_coef))
    return loss, policy, vloss, entropy, ratio


@dataclass
class UpdateStats:
    sender_policy_loss: float = 0.0
    receiver_policy_loss: float = 0.0
    sender_value_loss: float = 0.0
    receiver_value_loss: float = 0.0
    sender_entropy: float = 0.0
    receiver_entropy: float = 0.0
    clip_fraction: float = 0.0
    max_ratio_dev_first_epoch: float = 0.0


def _apply(loss: nn.Tensor, params: nn.ParameterSet, names, opt: nn.Adam, cfg: PPOConfig, what: str, stats) -> None:
    if not np.isfinite(loss.data):
        raise TrainingError(f"non-finite {what} loss {float(loss.data)}; last stats: {stats}")
    grads = nn.backward(loss, list(params.values()))
    allowed = set(names)
    grads = [g if k in allowed else np.zeros_like(g) for k, g in zip(params, grads)]
    grads, _ = nn.clip_grad_norm(grads, cfg.max_grad_norm)
    opt.step(grads)


class PPOLearner:
    """Separate Adam optimizers for the two agents plus the minibatch stream."""

    def __init__(self, sender: SenderPolicy, receiver: ReceiverPolicy, cfg: PPOConfig, seed: int):
        self.sender = sender
        self.receiver = receiver
        self.cfg = cfg
        self.sender_opt = nn.Adam(sender.params, cfg.learning_rate)
        self.receiver_opt = nn.Adam(receiver.params, cfg.learning_rate)
        self.rng = rngmod.stream(seed, "minibatch")

    def update(self, batch: RolloutBatch) -> UpdateStats:
        return ppo_update(self, batch, self.cfg)


def ppo_update(learner: PPOLearner, batch: RolloutBatch, cfg: PPOConfig) -> UpdateStats:
    """Several epochs of clipped-surrogate minibatch steps on one rollout batch."""
    adv = compute_advantages(batch, cfg.gamma, cfg.gae_lambda)
    n = len(batch)
    acc = {k: [] for k in ("spl", "rpl", "svl", "rvl", "sent", "rent")}
    clipped = total = 0
    first_dev = 0.0
    stats = UpdateStats()
    s_names = list(learner.sender.params)
    r_names = learner.receiver.trainable_names()
    for epoch in range(cfg.epochs_per_batch):
        order = learner.rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            idx = order[start:start + cfg.minibatch_size]
            mb = batch.select(idx)
            s_loss, s_pol, s_val, s_ent, s_ratio = sender_loss(
                learner.sender, mb, adv.sender[idx], adv.sender_returns[idx], cfg)
            r_loss, r_pol, r_val, r_ent, r_ratio = receiver_loss(
                learner.receiver, mb, adv.receiver[idx], adv.receiver_returns[idx], cfg)
            ratios = np.concatenate([s_ratio, r_ratio])
            if epoch == 0 and start == 0:
                first_dev = float(np.abs(ratios - 1.0).max())
            clipped += int((np.abs(ratios - 1.0) > cfg.clip_eps).sum())
            total += ratios.size
            for k, v in zip(acc, (s_pol, r_pol, s_val, r_val, s_ent, r_ent)):
                acc[k].append(float(v.data))
            _apply(s_loss, learner.sender.params, s_names, learner.sender_opt, cfg, "sender", stats)
            _apply(r_loss, learner.receiver.params, r_names, learner.receiver_opt, cfg, "receiver", stats)
    return UpdateStats(
        sender_policy_loss=float(np.mean(acc["spl"])),
        receiver_policy_loss=float(np.mean(acc["rpl"])),
        sender_value_loss=float(np.mean(acc["svl"])),
        receiver_value_loss=float(np.mean(acc["rvl"])),
        sender_entropy=float(np.mean(acc["sent"])),
        receiver_entropy=float(np.mean(acc["rent"])),
        clip_fraction=clipped / max(total, 1),
        max_ratio_dev_first_epoch=first_dev,
    )


# -------------------------------------------------------------------- train

def build_agents(cfg: RunConfig, dataset: Dataset):
    init = rngmod.stream(cfg.seed, "init")
    g = cfg.game
    sender = SenderPolicy(g.canvas_size, dataset.dim, g.sender_mode, cfg.agent, init)
    receiver = ReceiverPolicy(g.canvas_size, dataset.dim, cfg.agent, init)
    return sender, receiver


@dataclass
class TrainResult:
    config: RunConfig
    dataset: Dataset
    sender: SenderPolicy
    receiver: ReceiverPolicy
    learner: PPOLearner
    collector: Collector
    episodes: int
    rewards: np.ndarray
    metrics: list[dict]

    def first_episode_reaching(self, level: float) -> int | None:
        for row in self.metrics:
            if row["success_ma"] >= level:
                return int(row["episode"])
        return None

    def first_crossing(self, level: float, window: int = 1000) -> int | None:
        """First episode count at which the trailing ``window``-episode success rate reaches ``level``."""
        if len(self.rewards) < window:
            return None
        c = np.concatenate([[0.0], np.cumsum(self.rewards)])
        ma = (c[window:] - c[:-window]) / window
        hit = np.flatnonzero(ma >= level - 1e-12)
        return int(hit[0] + window) if hit.size else None

    def metrics_csv(self) -> str:
        return format_metrics(self.metrics)


def format_metrics(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for row in rows:
        w.writerow([row["episode"]] + [repr(float(row[k])) for k in METRIC_COLUMNS[1:]])
    return buf.getvalue()


def train(cfg: RunConfig, out_dir=None, on_row: Callable[[dict], None] | None = None) -> TrainResult:
    """Alternate rollout collection and PPO updates until ``total_episodes``.

    Writes ``metrics.csv`` and ``checkpoints/`` under ``out_dir`` when given.
    """
    from .checkpoint import save_checkpoint

    dataset = cfg.dataset.build(cfg.game.feature_dim)
    if dataset.dim != cfg.game.feature_dim:
        raise ConfigError(f"dataset dim {dataset.dim} != game.feature_dim {cfg.game.feature_dim}")
    sender, receiver = build_agents(cfg, dataset)
    learner = PPOLearner(sender, receiver, cfg.ppo, cfg.seed)
    collector = Collector(dataset, cfg.game, cfg.agent.bin_counts, cfg.workers)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    result = TrainResult(cfg, dataset, sender, receiver, learner, collector, 0, np.zeros(0), [])

    total = cfg.ppo.total_episodes
    rewards = np.zeros(total)
    done = 0
    next_log = cfg.log_interval
    next_ckpt = cfg.checkpoint_interval
    stats = UpdateStats()
    while done < total:
        n = min(cfg.ppo.episodes_per_batch, total - done)
        batch = collect_rollouts(collector, sender, receiver, n)
        rewards[done:done + n] = batch.reward
        done += n
        stats = learner.update(batch)
        result.episodes = done
        stop = False
        while done >= next_log:
            row = {"episode": next_log,
                   "success_ma": float(rewards[next_log - cfg.log_interval:next_log].mean()),
                   **{k: getattr(stats, k) for k in METRIC_COLUMNS[2:]}}
            result.metrics.append(row)
            if on_row is not None:
                on_row(row)
            log.info("episode %d success %.3f", row["episode"], row["success_ma"])
            if cfg.stop_at_success is not None and row["success_ma"] >= cfg.stop_at_success:
                stop = True
            next_log += cfg.log_interval
        if out is not None and done >= next_ckpt:
            save_checkpoint(out / "checkpoints" / f"ckpt_{done:09d}.glyc", result)
            while next_ckpt <= done:
                next_ckpt += cfg.checkpoint_interval
        if stop:
            break
    result.rewards = rewards[:done]
    if out is not None:
        (out / "metrics.csv").write_text(result.metrics_csv())
        save_checkpoint(out / "checkpoints" / "final.glyc", result)
    return result


def evaluate(dataset: Dataset, game: GameConfig, sender: SenderPolicy, receiver: ReceiverPolicy,
             n_episodes: int, seed: int, mode: ActMode = ActMode.GREEDY, batch_size: int = 1000) -> float:
    """Success rate on fresh trials drawn from the ``eval`` stream."""
    trial_rng = rngmod.stream(seed, "eval-trial")
    act_rng = rngmod.stream(seed, "eval-action")
    cache = StrokeCache(game.canvas_size, sender.config.bin_counts)
    wins = 0
    left = n_episodes
    while left > 0:
        n = min(batch_size, left)
        trials = sample_trials(dataset, game, n, trial_rng)
        b = run_episodes(dataset, game, sender, receiver, trials, act_rng, cache, mode, mode)
        wins += int(b.reward.sum())
        left -= n
    return wins / n_episodes


def bandit_sanity(n_episodes: int = 5000, cfg: PPOConfig | None = None, seed: int = 0,
                  agent: AgentConfig | None = None, canvas_size: int = 8) -> np.ndarray:
    """PPO on a one-step, two-action bandit where only action 0 pays.

    The receiver sees a blank canvas and two fixed candidates, so the only
    thing to learn is the action preference. Returns P(action 0) measured
    after each batch update.
    """
    cfg = cfg or PPOConfig()
    agent = agent or AgentConfig()
    init = rngmod.stream(seed, "init")
    receiver = ReceiverPolicy(canvas_size, 2, agent, init)
    opt = nn.Adam(receiver.params, cfg.learning_rate)
    act_rng = rngmod.stream(seed, "action")
    mb_rng = rngmod.stream(seed, "minibatch")
    names = receiver.trainable_names()
    cand = np.array([[1.0, 0.0], [0.0, 1.0]])
    probs = []
    done = 0
    while done < n_episodes:
        n = min(cfg.episodes_per_batch, n_episodes - done)
        symbols = np.zeros((n, canvas_size, canvas_size))
        C = np.broadcast_to(cand, (n, 2, 2)).copy()
        r = receiver_choose(receiver, symbols, C, act_rng)
        reward = (r.choice == 0).astype(np.float64)
        adv, ret = gae(reward[:, None], r.value[:, None], np.ones((n, 1)), cfg.gamma, cfg.gae_lambda)
        adv_n = _normalize(adv[:, 0], np.ones(n))
        batch = RolloutBatch(
            TrialBatch(np.zeros(n, np.int64), np.zeros((n, 1), np.int64), np.zeros((n, 2), np.int64),
                       np.zeros(n, np.int64)),
            np.zeros((n, 0)), np.zeros((n, 0, canvas_size, canvas_size)), np.zeros((n, 0, 8), np.int64),
            np.zeros((n, 0), np.int64), np.zeros((n, 0)), np.zeros((n, 0)), np.zeros((n, 0)), np.zeros((n, 0)),
            np.zeros(n, np.int64), symbols, C, r.choice, r.log_prob, r.value, reward)
        for _ in range(cfg.epochs_per_batch):
            order = mb_rng.permutation(n)
            for start in range(0, n, cfg.minibatch_size):
                idx = order[start:start + cfg.minibatch_size]
                loss = receiver_loss(receiver, batch.select(idx), adv_n[idx], ret[idx, 0], cfg)[0]
                _apply(loss, receiver.params, names, opt, cfg, "bandit", None)
        done += n
        logits, _ = receiver.forward(symbols[:1], C[:1])
        probs.append(float(nn.softmax(logits.data[0])[0]))
    return np.array(probs)
