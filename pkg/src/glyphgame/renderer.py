"""Brushstroke renderer: quadratic Bezier strokes painted onto a grayscale canvas.

Canvases are ``(size, size)`` float64 arrays in [0, 1], 0 blank and 1 full ink.
Stroke coordinates are normalized; a point ``(x, y)`` lands at column
``x * size`` and row ``y * size`` in pixel units, where pixel ``(r, c)`` has its
center at ``(c, r)``.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import astuple, dataclass, field
from typing import Sequence

import numba
import numpy as np

N_PARAMS = 8
CURVE_SAMPLES = 256
MAX = "max"
ADD_CLAMP = "add_clamp"


@dataclass(frozen=True)
class Brushstroke:
    x0: float
    y0: float
    cx: float
    cy: float
    x1: float
    y1: float
    thickness: float
    intensity: float

    def __post_init__(self):
        for name, v in zip(_FIELDS, astuple(self)):
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"brushstroke {name}={v} outside [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


_FIELDS = ("x0", "y0", "cx", "cy", "x1", "y1", "thickness", "intensity")


@dataclass(frozen=True)
class Message:
    strokes: tuple[Brushstroke, ...] = field(default_factory=tuple)
    terminated_early: bool = False

    def __len__(self) -> int:
        return len(self.strokes)


def blank_canvas(size: int) -> np.ndarray:
    return np.zeros((size, size))


@numba.njit(cache=True)
def _rasterize_kernel(params, size, n_samples, out):
    sx = np.empty(n_samples)
    sy = np.empty(n_samples)
    for k in range(params.shape[0]):
        x0 = params[k, 0] * size
        y0 = params[k, 1] * size
        cx = params[k, 2] * size
        cy = params[k, 3] * size
        x1 = params[k, 4] * size
        y1 = params[k, 5] * size
        ink = params[k, 7]
        if ink == 0.0:
            continue
        reach = 0.5 + params[k, 6] * (size / 8.0) + 0.5
        for j in range(n_samples):
            t = j / (n_samples - 1.0)
            u = 1.0 - t
            sx[j] = u * u * x0 + 2.0 * u * t * cx + t * t * x1
            sy[j] = u * u * y0 + 2.0 * u * t * cy + t * t * y1
        c_lo = max(0, int(np.floor(sx.min() - reach)))
        c_hi = min(size - 1, int(np.ceil(sx.max() + reach)))
        r_lo = max(0, int(np.floor(sy.min() - reach)))
        r_hi = min(size - 1, int(np.ceil(sy.max() + reach)))
        for r in range(r_lo, r_hi + 1):
            for c in range(c_lo, c_hi + 1):
                best = np.inf
                for j in range(n_samples):
                    dx = c - sx[j]
                    dy = r - sy[j]
                    d = dx * dx + dy * dy
                    if d < best:
                        best = d
                cover = reach - np.sqrt(best)
                if cover > 0.0:
                    out[k, r, c] = ink * min(cover, 1.0)


def _check_params(params: np.ndarray) -> np.ndarray:
    params = np.ascontiguousarray(params, dtype=np.float64)
    if params.ndim != 2 or params.shape[1] != N_PARAMS:
        raise ValueError(f"stroke parameters must have shape (N, 8), got {params.shape}")
    if not np.all((params >= 0.0) & (params <= 1.0)):
        raise ValueError("stroke parameters must lie in [0, 1]")
    return params


def rasterize_batch(params: np.ndarray, size: int) -> np.ndarray:
    """Rasterize N strokes given as an (N, 8) parameter array -> (N, size, size)."""
    if size < 8:
        raise ValueError(f"canvas size must be >= 8, got {size}")
    params = _check_params(params)
    out = np.zeros((params.shape[0], size, size))
    _rasterize_kernel(params, size, CURVE_SAMPLES, out)
    return out


def rasterize_stroke(stroke: Brushstroke, size: int) -> np.ndarray:
    return rasterize_batch(stroke.as_array()[None, :], size)[0]


def _check_canvas(canvas: np.ndarray) -> None:
    if canvas.ndim != 2 or canvas.shape[0] != canvas.shape[1]:
        raise ValueError(f"canvas must be square 2-D, got shape {canvas.shape}")


def composite(canvas: np.ndarray, layer: np.ndarray, mode: str = MAX) -> np.ndarray:
    if canvas.shape != layer.shape:
        raise ValueError(f"canvas {canvas.shape} and stroke layer {layer.shape} differ in size")
    if mode == MAX:
        return np.maximum(canvas, layer)
    if mode == ADD_CLAMP:
        return np.minimum(canvas + layer, 1.0)
    raise ValueError(f"unknown composite mode {mode!r}")


def render_incremental(canvas: np.ndarray, stroke: Brushstroke, mode: str = MAX) -> np.ndarray:
    _check_canvas(canvas)
    return composite(canvas, rasterize_stroke(stroke, canvas.shape[0]), mode)


def render(message: Message | Sequence[Brushstroke], size: int, mode: str = MAX) -> np.ndarray:
    strokes = message.strokes if isinstance(message, Message) else tuple(message)
    canvas = blank_canvas(size)
    for s in strokes:
        canvas = render_incremental(canvas, s, mode)
    return canvas


def stroke_from_action(bins: Sequence[int], bin_counts: Sequence[int]) -> Brushstroke:
    """Map one bin index per parameter to the bin-center value."""
    return Brushstroke(*bins_to_params(np.asarray(bins)[None, :], bin_counts)[0])


def bins_to_params(bins: np.ndarray, bin_counts: Sequence[int]) -> np.ndarray:
    bins = np.asarray(bins)
    counts = np.asarray(bin_counts)
    if bins.ndim != 2 or bins.shape[1] != N_PARAMS or counts.shape != (N_PARAMS,):
        raise ValueError(f"need (N, 8) bins and 8 bin counts, got {bins.shape} and {counts.shape}")
    if np.any(bins < 0) or np.any(bins >= counts):
        raise ValueError(f"bin index out of range for bin counts {counts.tolist()}")
    return (bins + 0.5) / counts


class StrokeCache:
    """LRU cache of rasterized strokes keyed by their action bins.

    The action space is discrete, so trained policies revisit the same strokes
    constantly; this keeps rollouts from re-rasterizing them.
    """

    def __init__(self, size: int, bin_counts: Sequence[int], maxsize: int = 8192):
        self.size = size
        self.bin_counts = tuple(int(b) for b in bin_counts)
        self.maxsize = maxsize
        self._store: OrderedDict[bytes, np.ndarray] = OrderedDict()
        # bins fit in uint8 exactly when every count is <= 256
        self._dtype = np.uint8 if max(self.bin_counts) <= 256 else np.int64

    def layers(self, bins: np.ndarray) -> np.ndarray:
        bins = np.asarray(bins)
        keys = [row.tobytes() for row in bins.astype(self._dtype)]
        out = np.empty((len(keys), self.size, self.size))
        missing = []
        for i, key in enumerate(keys):
            hit = self._store.get(key)
            if hit is None:
                missing.append(i)
            else:
                self._store.move_to_end(key)
                out[i] = hit
        if missing:
            fresh = rasterize_batch(bins_to_params(bins[missing], self.bin_counts), self.size)
            for i, layer in zip(missing, fresh):
                out[i] = layer
                self._store[keys[i]] = layer
            while len(self._store) > self.maxsize:
                self._store.popitem(last=False)
        return out
