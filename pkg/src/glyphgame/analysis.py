"""Writing-system consistency: per-entity heatmaps scored by Variance of Laplacian."""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .agents import ActMode, SenderPolicy
from .game import GameConfig, sample_trials
from .perception import Dataset
from .renderer import StrokeCache

REPORT_COLUMNS = ("entity", "samples", "vol")


class Scheme(str, enum.Enum):
    TARGET = "TARGET"
    TARGET_AND_DISTRACTORS = "TARGET_AND_DISTRACTORS"


DEFAULT_MIN_SAMPLES = {Scheme.TARGET: 1, Scheme.TARGET_AND_DISTRACTORS: 5}


@dataclass(frozen=True, order=True)
class EntityKey:
    scheme: Scheme
    target_class: int
    distractor_classes: tuple = ()

    def __post_init__(self):
        d = tuple(sorted(int(c) for c in self.distractor_classes))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "distractor_classes", d)
        if (self.scheme is Scheme.TARGET) != (len(d) == 0):
            raise ValueError("distractor classes must be empty exactly for the TARGET scheme")

    @property
    def label(self) -> str:
        if self.scheme is Scheme.TARGET:
            return f"t{self.target_class}"
        return f"t{self.target_class}_d" + "-".join(str(c) for c in self.distractor_classes)


def entity_key(scheme: Scheme, target_class: int, distractor_classes: Sequence[int]) -> EntityKey:
    scheme = Scheme(scheme)
    return EntityKey(scheme, int(target_class), () if scheme is Scheme.TARGET else tuple(distractor_classes))


# ------------------------------------------------------------------ metric

def heatmap(symbols: Sequence[np.ndarray]) -> np.ndarray:
    if len(symbols) == 0:
        raise ValueError("heatmap of an empty symbol set")
    stack = np.stack([np.asarray(s, dtype=np.float64) for s in symbols])
    return stack.mean(axis=0)


def laplacian(image: np.ndarray) -> np.ndarray:
    """4-neighbour discrete Laplacian over the valid interior (no padding)."""
    a = np.asarray(image, dtype=np.float64)
    return a[:-2, 1:-1] + a[2:, 1:-1] + a[1:-1, :-2] + a[1:-1, 2:] - 4.0 * a[1:-1, 1:-1]


def variance_of_laplacian(image: np.ndarray) -> float:
    a = np.asarray(image)
    if a.ndim != 2 or a.shape[0] < 3 or a.shape[1] < 3:
        raise ValueError(f"variance of Laplacian needs an image of at least 3x3, got shape {a.shape}")
    return float(laplacian(a).var())


def consistency_score(entity_heatmaps: Sequence[np.ndarray]) -> float:
    """Mean VoL over entity heatmaps."""
    if len(entity_heatmaps) == 0:
        raise ValueError("consistency score needs at least one entity")
    return float(np.mean([variance_of_laplacian(h) for h in entity_heatmaps]))


def baseline_score(all_symbols: Sequence[np.ndarray]) -> float:
    """VoL of the heatmap pooled over every symbol, ignoring entities."""
    if len(all_symbols) == 0:
        raise ValueError("baseline score of an empty symbol set")
    return variance_of_laplacian(heatmap(all_symbols))


# -------------------------------------------------------------- collection

@dataclass
class SymbolCollection:
    groups: dict            # EntityKey -> list of canvases
    excluded: dict          # EntityKey -> sample count, below min_samples
    all_symbols: list


def collect_symbols(sender: SenderPolicy, dataset: Dataset, config: GameConfig, scheme: Scheme, n_trials: int,
                    rng: np.random.Generator, mode: ActMode = ActMode.GREEDY, min_samples: int | None = None,
                    batch_size: int = 1000) -> SymbolCollection:
    """Draw symbols for sampled trials and group them by entity."""
    from .trainer import write_symbols

    scheme = Scheme(scheme)
    min_samples = DEFAULT_MIN_SAMPLES[scheme] if min_samples is None else min_samples
    cache = StrokeCache(config.canvas_size, sender.config.bin_counts)
    grouped: dict = {}
    pooled = []
    left = n_trials
    while left > 0:
        n = min(batch_size, left)
        trials = sample_trials(dataset, config, n, rng)
        drawn = write_symbols(dataset, config, sender, trials, rng, cache, mode)
        t_cls = dataset.class_ids[trials.target]
        d_cls = dataset.class_ids[trials.distractors]
        for i in range(n):
            key = entity_key(scheme, t_cls[i], d_cls[i])
            grouped.setdefault(key, []).append(drawn.canvas[i])
            pooled.append(drawn.canvas[i])
        left -= n
    groups = {k: v for k, v in sorted(grouped.items()) if len(v) >= min_samples}
    excluded = {k: len(v) for k, v in sorted(grouped.items()) if len(v) < min_samples}
    return SymbolCollection(groups, excluded, pooled)


@dataclass
class EntityResult:
    key: EntityKey
    samples: int
    heatmap: np.ndarray
    vol: float


@dataclass
class ConsistencyReport:
    scheme: Scheme
    entities: list
    avg_score: float
    baseline_score: float
    excluded: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for e in self.entities:
            w.writerow([e.key.label, e.samples, repr(e.vol)])
        w.writerow(["avg_score", len(self.entities), repr(self.avg_score)])
        total = sum(e.samples for e in self.entities) + sum(self.excluded.values())
        w.writerow(["baseline_score", total, repr(self.baseline_score)])
        return buf.getvalue()


def build_report(collection: SymbolCollection, scheme: Scheme) -> ConsistencyReport:
    entities = []
    for key, symbols in collection.groups.items():
        h = heatmap(symbols)
        entities.append(EntityResult(key, len(symbols), h, variance_of_laplacian(h)))
    avg = float(np.mean([e.vol for e in entities])) if entities else float("nan")
    base = baseline_score(collection.all_symbols) if collection.all_symbols else float("nan")
    return ConsistencyReport(Scheme(scheme), entities, avg, base, dict(collection.excluded))


def analyze(sender: SenderPolicy, dataset: Dataset, config: GameConfig, scheme: Scheme, n_trials: int,
            rng: np.random.Generator, **kw) -> ConsistencyReport:
    return build_report(collect_symbols(sender, dataset, config, scheme, n_trials, rng, **kw), scheme)


def write_report(report: ConsistencyReport, out_dir) -> Path:
    """Write ``report.csv``, ``summary.txt`` and one heatmap PNG per entity."""
    from .imageio import save_png

    out = Path(out_dir)
    (out / "heatmaps").mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report.to_csv())
    for e in report.entities:
        save_png(out / "heatmaps" / f"{e.key.label}.png", e.heatmap)
    ratio = report.avg_score / report.baseline_score if report.baseline_score > 0 else float("inf")
    lines = [
        f"scheme          {report.scheme.value}",
        f"entities        {len(report.entities)}",
        f"excluded        {len(report.excluded)}",
        f"avg_score       {report.avg_score:.6g}",
        f"baseline_score  {report.baseline_score:.6g}",
        f"ratio           {ratio:.3f}",
    ]
    for k, n in report.excluded.items():
        lines.append(f"insufficient    {k.label} ({n} samples)")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    return out / "report.csv"
