"""Referential game: trial sampling and the shared payoff."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .perception import Dataset, FeatureVec


class ConfigError(ValueError):
    pass


class SenderMode(str, enum.Enum):
    D_AGNOSTIC = "D_AGNOSTIC"
    D_AWARE = "D_AWARE"


@dataclass(frozen=True)
class GameConfig:
    num_candidates: int = 3
    max_strokes: int = 2
    sender_mode: SenderMode = SenderMode.D_AWARE
    canvas_size: int = 32
    feature_dim: int = 32
    seed: int = 0
    class_disjoint: bool = True
    allow_single_candidate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sender_mode", SenderMode(self.sender_mode))
        min_k = 1 if self.allow_single_candidate else 2
        if self.num_candidates < min_k:
            raise ConfigError(f"num_candidates must be >= {min_k}, got {self.num_candidates}")
        if self.max_strokes < 1:
            raise ConfigError(f"max_strokes must be >= 1, got {self.max_strokes}")
        if self.canvas_size < 8:
            raise ConfigError(f"canvas_size must be >= 8, got {self.canvas_size}")
        if self.feature_dim < 1:
            raise ConfigError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class Trial:
    target: FeatureVec
    distractors: tuple[FeatureVec, ...]
    permuted: tuple[FeatureVec, ...]
    target_position: int

    @property
    def target_class(self) -> int:
        return self.target.class_id

    @property
    def distractor_classes(self) -> tuple[int, ...]:
        return tuple(d.class_id for d in self.distractors)


@dataclass
class TrialBatch:
    """Index form of N trials; rows of ``candidates`` are in receiver order."""

    target: np.ndarray          # (N,) dataset row of the target
    distractors: np.ndarray     # (N, K-1) dataset rows
    candidates: np.ndarray      # (N, K) dataset rows, permuted
    target_position: np.ndarray  # (N,)
    extras: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.target)


def _check_dataset(dataset: Dataset, config: GameConfig) -> None:
    K = config.num_candidates
    if len(dataset) < K:
        raise ConfigError(f"dataset has {len(dataset)} items but {K} candidates are needed")
    if config.class_disjoint and dataset.num_classes < K:
        raise ConfigError(f"class-disjoint sampling needs >= {K} classes, dataset has {dataset.num_classes}")
    if dataset.dim != config.feature_dim:
        raise ConfigError(f"dataset feature dim {dataset.dim} != configured feature_dim {config.feature_dim}")


def _draw(dataset: Dataset, config: GameConfig, rng: np.random.Generator, by_class):
    K = config.num_candidates
    n = len(dataset)
    target = int(rng.integers(n))
    if K == 1:
        distractors = np.zeros(0, dtype=np.int64)
    elif config.class_disjoint:
        t_cls = int(dataset.class_ids[target])
        others = np.array([c for c in range(dataset.num_classes) if c != t_cls])
        chosen = rng.choice(others, size=K - 1, replace=False)
        distractors = np.array([by_class[c][rng.integers(len(by_class[c]))] for c in chosen], dtype=np.int64)
    else:
        picks = rng.choice(n - 1, size=K - 1, replace=False)
        distractors = np.where(picks >= target, picks + 1, picks).astype(np.int64)
    order = rng.permutation(K)
    pool = np.concatenate([[target], distractors]).astype(np.int64)
    candidates = pool[order]
    position = int(np.flatnonzero(order == 0)[0])
    return target, distractors, candidates, position


def sample_trial(dataset: Dataset, config: GameConfig, rng: np.random.Generator) -> Trial:
    _check_dataset(dataset, config)
    t, d, c, pos = _draw(dataset, config, rng, dataset.indices_by_class())
    return Trial(
        target=dataset.item(t),
        distractors=tuple(dataset.item(i) for i in d),
        permuted=tuple(dataset.item(i) for i in c),
        target_position=pos,
    )


def sample_trials(dataset: Dataset, config: GameConfig, n: int, rng: np.random.Generator) -> TrialBatch:
    """Draw ``n`` trials with the same per-trial procedure as :func:`sample_trial`."""
    _check_dataset(dataset, config)
    K = config.num_candidates
    by_class = dataset.indices_by_class()
    T = np.zeros(n, dtype=np.int64)
    D = np.zeros((n, K - 1), dtype=np.int64)
    C = np.zeros((n, K), dtype=np.int64)
    P = np.zeros(n, dtype=np.int64)
    for i in range(n):
        T[i], D[i], C[i], P[i] = _draw(dataset, config, rng, by_class)
    return TrialBatch(T, D, C, P)


def trial_from_batch(dataset: Dataset, batch: TrialBatch, i: int) -> Trial:
    return Trial(
        target=dataset.item(batch.target[i]),
        distractors=tuple(dataset.item(j) for j in batch.distractors[i]),
        permuted=tuple(dataset.item(j) for j in batch.candidates[i]),
        target_position=int(batch.target_position[i]),
    )


def compute_reward(choice, target_position, is_final_step=True):
    """Shared payoff: 1 iff the episode is over and the receiver pointed at the target."""
    hit = np.equal(choice, target_position) & np.asarray(is_final_step, dtype=bool)
    return hit.astype(np.int64) if np.ndim(hit) else int(hit)
