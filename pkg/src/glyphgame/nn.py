"""A small reverse-mode autodiff core over numpy arrays.

Every op returns a :class:`Tensor` that remembers its parents and how to push
an upstream gradient back to them. Batches are carried on the leading axis;
apart from that there is no broadcasting, operands must agree in shape.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "name")

    def __init__(self, data, parents: tuple = (), backward: Callable | None = None, name: str | None = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_same(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(np.array(data, dtype=DTYPE), name=name)


def init_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


# ---------------------------------------------------------------- linear ops

def affine(x, weights: Tensor, bias: Tensor) -> Tensor:
    """``y = W x + b`` for ``x`` of shape (in,) or (N, in)."""
    x = _as_tensor(x)
    W, b = weights, bias
    if W.data.ndim != 2 or b.data.ndim != 1:
        raise ValueError(f"affine: weights must be 2-D and bias 1-D, got {W.shape}, {b.shape}")
    if x.shape[-1] != W.shape[1] or W.shape[0] != b.shape[0]:
        raise ValueError(f"affine: cannot apply W{W.shape} to x{x.shape} with b{b.shape}")
    out = Tensor(x.data @ W.data.T + b.data, (x, W, b))

    def backward(g):
        gx = g @ W.data
        if x.data.ndim == 1:
            gW = np.outer(g, x.data)
            gb = g
        else:
            gW = g.T @ x.data
            gb = g.sum(axis=0)
        return gx, gW, gb

    out._backward = backward
    return out


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same(a, b, "add")
    out = Tensor(a.data + b.data, (a, b))
    out._backward = lambda g: (g, g)
    return out


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same(a, b, "sub")
    out = Tensor(a.data - b.data, (a, b))
    out._backward = lambda g: (g, -g)
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same(a, b, "mul")
    out = Tensor(a.data * b.data, (a, b))
    out._backward = lambda g: (g * b.data, g * a.data)
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data * c, (a,))
    out._backward = lambda g: (g * c,)
    return out


def square(a: Tensor) -> Tensor:
    out = Tensor(a.data * a.data, (a,))
    out._backward = lambda g: (2.0 * a.data * g,)
    return out


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    sizes = [p.shape[axis] for p in parts]
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), tuple(parts))
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=axis))

    out._backward = backward
    return out


def columns(a: Tensor, start: int, stop: int) -> Tensor:
    """Slice ``a[..., start:stop]``."""
    out = Tensor(a.data[..., start:stop], (a,))

    def backward(g):
        full = np.zeros_like(a.data)
        full[..., start:stop] = g
        return (full,)

    out._backward = backward
    return out


# ------------------------------------------------------------ nonlinearities

def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y, (a,))
    out._backward = lambda g: (g * (1.0 - y * y),)
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    out = Tensor(y, (a,))
    out._backward = lambda g: (g * y * (1.0 - y),)
    return out


def relu(a: Tensor) -> Tensor:
    on = a.data > 0
    out = Tensor(np.where(on, a.data, 0.0), (a,))
    out._backward = lambda g: (g * on,)
    return out


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    out = Tensor(y, (a,))
    out._backward = lambda g: (g * y,)
    return out


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.data >= lo) & (a.data <= hi)
    out = Tensor(np.clip(a.data, lo, hi), (a,))
    out._backward = lambda g: (g * inside,)
    return out


def minimum(a, b) -> Tensor:
    """Elementwise min; ties route the gradient to ``a``."""
    a, b = _as_tensor(a), _as_tensor(b)
    _check_same(a, b, "minimum")
    pick_a = a.data <= b.data
    out = Tensor(np.where(pick_a, a.data, b.data), (a, b))
    out._backward = lambda g: (g * pick_a, g * ~pick_a)
    return out


# --------------------------------------------------------------- reductions

def total(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum(), (a,))
    out._backward = lambda g: (np.full_like(a.data, g),)
    return out


def mean(a: Tensor) -> Tensor:
    n = a.data.size
    out = Tensor(a.data.sum() / n, (a,))
    out._backward = lambda g: (np.full_like(a.data, g / n),)
    return out


def row_sum(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum(axis=-1), (a,))
    out._backward = lambda g: (np.repeat(np.expand_dims(g, -1), a.shape[-1], axis=-1),)
    return out


def logsumexp(a: Tensor) -> Tensor:
    """Stable log-sum-exp over the last axis."""
    m = a.data.max(axis=-1, keepdims=True)
    e = np.exp(a.data - m)
    s = e.sum(axis=-1, keepdims=True)
    out = Tensor((m + np.log(s))[..., 0], (a,))
    p = e / s
    out._backward = lambda g: (np.expand_dims(g, -1) * p,)
    return out


def log_softmax(a: Tensor) -> Tensor:
    m = a.data.max(axis=-1, keepdims=True)
    z = a.data - m
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    y = z - lse
    p = np.exp(y)
    out = Tensor(y, (a,))
    out._backward = lambda g: (g - p * g.sum(axis=-1, keepdims=True),)
    return out


def pick(a: Tensor, index) -> Tensor:
    """Select ``a[i, index[i]]`` per row (or ``a[index]`` for 1-D input)."""
    index = np.asarray(index)
    if a.data.ndim == 1:
        out = Tensor(a.data[index], (a,))

        def backward(g):
            full = np.zeros_like(a.data)
            np.add.at(full, index, g)
            return (full,)
    else:
        rows = np.arange(a.shape[0])
        out = Tensor(a.data[rows, index], (a,))

        def backward(g):
            full = np.zeros_like(a.data)
            full[rows, index] = g
            return (full,)

    out._backward = backward
    return out


def pointer_logits(query: Tensor, candidates: np.ndarray) -> Tensor:
    """Score ``candidates`` (N, K, d) against ``query`` (N, d) by dot product.

    Each candidate is scored independently with the same query, so permuting
    candidates permutes the scores exactly.
    """
    C = np.asarray(candidates, dtype=DTYPE)
    if C.ndim != 3 or C.shape[0] != query.shape[0] or C.shape[2] != query.shape[1]:
        raise ValueError(f"pointer_logits: candidates {C.shape} do not fit query {query.shape}")
    out = Tensor((C * query.data[:, None, :]).sum(axis=-1), (query,))
    out._backward = lambda g: ((g[:, :, None] * C).sum(axis=1),)
    return out


# ----------------------------------------------------------------- backward

def backward(loss: Tensor, params: Iterable[Tensor] = ()) -> list[np.ndarray]:
    """Run reverse-mode accumulation from a scalar ``loss``.

    Sets ``.grad`` on every reachable node and returns the gradients of
    ``params`` in order; parameters the loss never touched get zeros.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    for node in order:
        node.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is None or node.grad is None:
            continue
        for parent, g in zip(node._parents, node._backward(node.grad)):
            if parent.grad is None:
                parent.grad = np.array(g, dtype=DTYPE)
            else:
                parent.grad = parent.grad + g
    out = []
    for p in params:
        out.append(p.grad if (id(p) in seen and p.grad is not None) else np.zeros_like(p.data))
    return out


# -------------------------------------------------------------- categorical

def categorical_sample(logits, rng: np.random.Generator) -> np.ndarray | int:
    """Inverse-CDF draw from softmax(logits) over the last axis."""
    z = np.asarray(logits.data if isinstance(logits, Tensor) else logits, dtype=DTYPE)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    p = np.exp(z - z.max(axis=-1, keepdims=True))
    cdf = np.cumsum(p, axis=-1)
    u = rng.random(z.shape[0]) * cdf[:, -1]
    idx = np.minimum((cdf <= u[:, None]).sum(axis=-1), z.shape[-1] - 1)
    return int(idx[0]) if single else idx


def categorical_greedy(logits) -> np.ndarray | int:
    """Argmax; ties go to the lowest index."""
    z = np.asarray(logits.data if isinstance(logits, Tensor) else logits)
    idx = np.argmax(z, axis=-1)
    return int(idx) if z.ndim == 1 else idx


def categorical_log_prob(logits, index) -> Tensor:
    return pick(log_softmax(_as_tensor(logits)), index)


def entropy(logits) -> Tensor:
    lp = log_softmax(_as_tensor(logits))
    return scale(row_sum(mul(exp(lp), lp)), -1.0)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits.data if isinstance(logits, Tensor) else logits, dtype=DTYPE)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


# --------------------------------------------------------------------- LSTM

@dataclass
class RecurrentState:
    h: Tensor
    c: Tensor

    @classmethod
    def zeros(cls, hidden: int, batch: int | None = None) -> "RecurrentState":
        shape = (hidden,) if batch is None else (batch, hidden)
        return cls(Tensor(np.zeros(shape)), Tensor(np.zeros(shape)))


def lstm_step(x, state: RecurrentState, weights: Tensor, bias: Tensor) -> RecurrentState:
    """One LSTM cell update with gate blocks ordered (input, forget, cell, output).

    ``weights`` has shape (4H, in + H) and acts on ``[x, h]``.
    """
    x = _as_tensor(x)
    H = state.h.shape[-1]
    if state.c.shape != state.h.shape:
        raise ValueError(f"lstm_step: h {state.h.shape} and c {state.c.shape} differ")
    if weights.shape != (4 * H, x.shape[-1] + H):
        raise ValueError(f"lstm_step: weights {weights.shape} do not fit input {x.shape[-1]} + hidden {H}")
    z = affine(concat([x, state.h]), weights, bias)
    i = sigmoid(columns(z, 0, H))
    f = sigmoid(columns(z, H, 2 * H))
    g = tanh(columns(z, 2 * H, 3 * H))
    o = sigmoid(columns(z, 3 * H, 4 * H))
    c = add(mul(f, state.c), mul(i, g))
    h = mul(o, tanh(c))
    return RecurrentState(h, c)


# --------------------------------------------------------------- parameters

class ParameterSet(OrderedDict):
    """Ordered name -> Tensor mapping of trainable arrays."""

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.items()}

    def load(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self) - set(arrays)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for k, t in self.items():
            a = np.asarray(arrays[k], dtype=DTYPE)
            if a.shape != t.shape:
                raise ValueError(f"parameter {k}: shape {a.shape} != {t.shape}")
            t.data = a.copy()

    def count(self) -> int:
        return int(sum(t.data.size for t in self.values()))


def add_linear(params: ParameterSet, name: str, fan_in: int, fan_out: int, rng: np.random.Generator) -> None:
    params[f"{name}.W"] = parameter(init_uniform(rng, (fan_out, fan_in), fan_in), f"{name}.W")
    params[f"{name}.b"] = parameter(init_uniform(rng, (fan_out,), fan_in), f"{name}.b")


def linear(params: ParameterSet, name: str, x) -> Tensor:
    return affine(x, params[f"{name}.W"], params[f"{name}.b"])


def clip_grad_norm(grads: list[np.ndarray], max_norm: float) -> tuple[list[np.ndarray], float]:
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if max_norm > 0 and norm > max_norm:
        factor = max_norm / (norm + 1e-12)
        grads = [g * factor for g in grads]
    return grads, norm


class Adam:
    def __init__(self, params: ParameterSet, lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v.data) for k, v in params.items()}
        self.v = {k: np.zeros_like(v.data) for k, v in params.items()}

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for (k, p), g in zip(self.params.items(), grads):
            m = self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            v = self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {f"{prefix}.t": np.array([float(self.t)])}
        for k in self.params:
            out[f"{prefix}.m.{k}"] = self.m[k]
            out[f"{prefix}.v.{k}"] = self.v[k]
        return out

    def load_state(self, prefix: str, arrays: dict[str, np.ndarray]) -> None:
        self.t = int(arrays[f"{prefix}.t"][0])
        for k in self.params:
            self.m[k] = np.array(arrays[f"{prefix}.m.{k}"], dtype=DTYPE)
            self.v[k] = np.array(arrays[f"{prefix}.v.{k}"], dtype=DTYPE)
