"""Sender and receiver policy networks.

All forward passes are batched over episodes on the leading axis.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import nn
from .game import SenderMode, Trial, TrialBatch
from .perception import Dataset, SymbolEncoder
from .renderer import N_PARAMS


class ActMode(str, enum.Enum):
    SAMPLE = "SAMPLE"
    GREEDY = "GREEDY"


@dataclass(frozen=True)
class AgentConfig:
    hidden_dim: int = 128
    canvas_width: int = 128
    context_width: int = 128
    encoder_widths: tuple = (128, 32)
    bins: int = 8
    freeze_encoder: bool = False

    def __post_init__(self):
        object.__setattr__(self, "encoder_widths", tuple(int(w) for w in self.encoder_widths))
        for name in ("hidden_dim", "canvas_width", "context_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.bins < 1 or not self.encoder_widths:
            raise ValueError("bins must be >= 1 and encoder_widths non-empty")

    @property
    def bin_counts(self) -> tuple:
        return (self.bins,) * N_PARAMS


def context_dim(feature_dim: int, mode: SenderMode) -> int:
    return feature_dim if SenderMode(mode) is SenderMode.D_AGNOSTIC else 3 * feature_dim


def sender_observe(trial: Trial, mode: SenderMode) -> np.ndarray:
    """Visual input of the sender: the target, plus distractor mean and max when D-Aware."""
    t = np.asarray(trial.target.values, dtype=np.float64)
    if SenderMode(mode) is SenderMode.D_AGNOSTIC:
        return t.copy()
    if not trial.distractors:
        return np.concatenate([t, np.zeros_like(t), np.zeros_like(t)])
    D = np.stack([d.values for d in trial.distractors])
    return np.concatenate([t, D.mean(axis=0), D.max(axis=0)])


def sender_contexts(dataset: Dataset, trials: TrialBatch, mode: SenderMode) -> np.ndarray:
    """Batched :func:`sender_observe`, (N, context_dim)."""
    T = dataset.features[trials.target]
    if SenderMode(mode) is SenderMode.D_AGNOSTIC:
        return T.copy()
    if trials.distractors.shape[1] == 0:
        return np.concatenate([T, np.zeros_like(T), np.zeros_like(T)], axis=1)
    D = dataset.features[trials.distractors]
    return np.concatenate([T, D.mean(axis=1), D.max(axis=1)], axis=1)


@dataclass
class SenderOutputs:
    head_logits: list
    flag_logits: nn.Tensor
    value: nn.Tensor
    state: nn.RecurrentState


@dataclass
class SenderStep:
    bins: np.ndarray       # (N, 8)
    flag: np.ndarray       # (N,) 1 = stop after this stroke
    log_prob: np.ndarray   # (N,)
    entropy: np.ndarray    # (N,)
    value: np.ndarray      # (N,)
    state: nn.RecurrentState


class SenderPolicy:
    def __init__(self, canvas_size: int, feature_dim: int, mode: SenderMode, config: AgentConfig, rng):
        self.canvas_size = canvas_size
        self.mode = SenderMode(mode)
        self.config = config
        self.context_dim = context_dim(feature_dim, self.mode)
        c = config
        p = self.params = nn.ParameterSet()
        nn.add_linear(p, "canvas", canvas_size * canvas_size, c.canvas_width, rng)
        nn.add_linear(p, "context", self.context_dim, c.context_width, rng)
        fan_in = c.canvas_width + c.context_width + c.hidden_dim
        p["lstm.W"] = nn.parameter(nn.init_uniform(rng, (4 * c.hidden_dim, fan_in), fan_in), "lstm.W")
        p["lstm.b"] = nn.parameter(nn.init_uniform(rng, (4 * c.hidden_dim,), fan_in), "lstm.b")
        for i, b in enumerate(c.bin_counts):
            nn.add_linear(p, f"head{i}", c.hidden_dim, b, rng)
        nn.add_linear(p, "flag", c.hidden_dim, 2, rng)
        nn.add_linear(p, "value", c.hidden_dim, 1, rng)

    def initial_state(self, n: int) -> nn.RecurrentState:
        return nn.RecurrentState.zeros(self.config.hidden_dim, n)

    def forward(self, canvas, state: nn.RecurrentState, context) -> SenderOutputs:
        canvas = np.asarray(canvas, dtype=np.float64)
        n = canvas.shape[0]
        flat = canvas.reshape(n, -1)
        if flat.shape[1] != self.canvas_size ** 2:
            raise ValueError(f"canvas batch {canvas.shape} does not match sender canvas {self.canvas_size}")
        context = np.asarray(context, dtype=np.float64)
        if context.shape != (n, self.context_dim):
            raise ValueError(f"context shape {context.shape} != {(n, self.context_dim)}")
        if state.h.shape != (n, self.config.hidden_dim):
            raise ValueError(f"state shape {state.h.shape} != {(n, self.config.hidden_dim)}")
        p = self.params
        x = nn.concat([nn.tanh(nn.linear(p, "canvas", flat)), nn.tanh(nn.linear(p, "context", context))])
        new = nn.lstm_step(x, state, p["lstm.W"], p["lstm.b"])
        heads = [nn.linear(p, f"head{i}", new.h) for i in range(N_PARAMS)]
        flag = nn.linear(p, "flag", new.h)
        value = nn.row_sum(nn.linear(p, "value", new.h))
        return SenderOutputs(heads, flag, value, new)


def sender_log_prob_entropy(out: SenderOutputs, bins: np.ndarray, flag: np.ndarray, flag_sampled: bool):
    """Joint log-prob and entropy of one stroke action.

    The flag head contributes only when the flag was actually sampled; at the
    last allowed step termination is forced.
    """
    logp = None
    ent = None
    for i, logits in enumerate(out.head_logits):
        lp = nn.categorical_log_prob(logits, bins[:, i])
        e = nn.entropy(logits)
        logp = lp if logp is None else nn.add(logp, lp)
        ent = e if ent is None else nn.add(ent, e)
    if flag_sampled:
        logp = nn.add(logp, nn.categorical_log_prob(out.flag_logits, flag))
        ent = nn.add(ent, nn.entropy(out.flag_logits))
    return logp, ent


def _choose(logits: nn.Tensor, rng, mode: ActMode):
    if ActMode(mode) is ActMode.GREEDY:
        return np.atleast_1d(nn.categorical_greedy(logits))
    return np.atleast_1d(nn.categorical_sample(logits, rng))


def sender_step(policy: SenderPolicy, canvas, state: nn.RecurrentState, context, rng,
                mode: ActMode = ActMode.SAMPLE, step: int = 0, max_strokes: int = 1) -> SenderStep:
    """Run one sender timestep for a batch of episodes and pick a stroke."""
    out = policy.forward(canvas, state, context)
    bins = np.stack([_choose(h, rng, mode) for h in out.head_logits], axis=1)
    flag_sampled = step < max_strokes - 1
    if flag_sampled:
        flag = _choose(out.flag_logits, rng, mode)
    else:
        flag = np.ones(bins.shape[0], dtype=np.int64)
    logp, ent = sender_log_prob_entropy(out, bins, flag, flag_sampled)
    return SenderStep(bins, flag, logp.data.copy(), ent.data.copy(), out.value.data.copy(), out.state)


class ReceiverPolicy:
    def __init__(self, canvas_size: int, feature_dim: int, config: AgentConfig, rng):
        self.canvas_size = canvas_size
        self.feature_dim = feature_dim
        self.config = config
        self.encoder = SymbolEncoder(canvas_size, config.encoder_widths, rng, trainable=not config.freeze_encoder)
        p = self.params = nn.ParameterSet()
        for k, v in self.encoder.params.items():
            p[f"fs.{k}"] = v
        # bilinear scorer folded into one affine map: q = A^T s + u, logit_k = q . c_k
        nn.add_linear(p, "scorer", self.encoder.out_dim, feature_dim, rng)
        nn.add_linear(p, "value", self.encoder.out_dim, 1, rng)

    def trainable_names(self) -> list[str]:
        if self.encoder.trainable:
            return list(self.params)
        return [k for k in self.params if not k.startswith("fs.")]

    def forward(self, canvas, candidates):
        canvas = np.asarray(canvas, dtype=np.float64)
        n = canvas.shape[0]
        flat = canvas.reshape(n, -1)
        if flat.shape[1] != self.canvas_size ** 2:
            raise ValueError(f"canvas batch {canvas.shape} does not match receiver canvas {self.canvas_size}")
        C = np.asarray(candidates, dtype=np.float64)
        if C.ndim != 3 or C.shape[0] != n or C.shape[2] != self.feature_dim:
            raise ValueError(f"candidates shape {C.shape} incompatible with batch {n}, dim {self.feature_dim}")
        if C.shape[1] == 0:
            raise ValueError("receiver needs at least one candidate")
        s = self.encoder.forward(nn.Tensor(flat))
        q = nn.linear(self.params, "scorer", s)
        logits = nn.pointer_logits(q, C)
        value = nn.row_sum(nn.linear(self.params, "value", s))
        return logits, value


@dataclass
class ReceiverStep:
    choice: np.ndarray
    log_prob: np.ndarray
    entropy: np.ndarray
    value: np.ndarray


def receiver_choose(policy: ReceiverPolicy, canvas, candidates, rng, mode: ActMode = ActMode.SAMPLE) -> ReceiverStep:
    logits, value = policy.forward(canvas, candidates)
    choice = _choose(logits, rng, mode)
    lp = nn.categorical_log_prob(logits, choice)
    ent = nn.entropy(logits)
    return ReceiverStep(choice, lp.data.copy(), ent.data.copy(), value.data.copy())
