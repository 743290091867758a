"""Named random sub-streams derived from one root seed."""
import zlib

import numpy as np

STREAMS = ("trial", "init", "action", "analysis", "dataset")


def stream(seed: int, name: str, worker: int = 0) -> np.random.Generator:
    """Return an independent generator for ``(seed, name, worker)``.

    The same triple always yields the same sequence, so components can be
    replayed without consuming each other's draws.
    """
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    tag = zlib.crc32(name.encode("utf-8"))
    ss = np.random.SeedSequence([seed & 0xFFFFFFFF, seed >> 32, tag, worker])
    return np.random.Generator(np.random.PCG64(ss))


def get_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def set_state(rng: np.random.Generator, state: dict) -> None:
    rng.bit_generator.state = state
