import numpy as np
import pytest

from glyphgame import nn
from glyphgame.agents import AgentConfig

ACCEPTANCE_LINES: list[str] = []


def numeric_grad(f, param: nn.Tensor, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar ``f()`` w.r.t. ``param.data``."""
    g = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        hi = float(f().data)
        flat[i] = old - eps
        lo = float(f().data)
        flat[i] = old
        g.reshape(-1)[i] = (hi - lo) / (2 * eps)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def check_grads(f, params, tol=1e-4):
    """Return the worst relative error between backward() and finite differences."""
    params = list(params)
    analytic = nn.backward(f(), params)
    worst = 0.0
    for p, a in zip(params, analytic):
        worst = max(worst, rel_err(a, numeric_grad(f, p)))
    assert worst <= tol, f"gradient mismatch, worst relative error {worst:.3g}"
    return worst


@pytest.fixture
def tiny_agent_config():
    return AgentConfig(hidden_dim=4, canvas_width=4, context_width=4, encoder_widths=(6, 4), bins=3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
