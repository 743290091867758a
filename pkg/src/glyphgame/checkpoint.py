"""GLYC checkpoint container.

Little-endian layout::

    b"GLYC"  u32 version
    u32 n    n bytes of JSON: {"config": ..., "meta": ..., "rng": ...}
    u32 count of arrays, then per array:
        u16 name length, name (utf-8), u8 ndim, ndim x u32 shape, f64 data
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .config import from_dict, to_dict

MAGIC = b"GLYC"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode(header: dict, arrays: dict[str, np.ndarray]) -> bytes:
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    chunks = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(blob)), blob,
              struct.pack("<I", len(arrays))]
    for name in sorted(arrays):
        a = np.asarray(arrays[name], dtype="<f8")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", a.ndim))
        chunks.append(struct.pack(f"<{a.ndim}I", *a.shape))
        chunks.append(a.tobytes())
    return b"".join(chunks)


def decode(raw: bytes, source: str = "<checkpoint>") -> tuple[dict, dict[str, np.ndarray]]:
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{source}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    try:
        (version,) = struct.unpack_from("<I", raw, 4)
        if version != VERSION:
            raise CheckpointError(f"{source}: checkpoint version {version} != supported version {VERSION}")
        (n,) = struct.unpack_from("<I", raw, 8)
        header = json.loads(raw[12:12 + n].decode("utf-8"))
        off = 12 + n
        (count,) = struct.unpack_from("<I", raw, off)
        off += 4
        arrays = {}
        for _ in range(count):
            (ln,) = struct.unpack_from("<H", raw, off)
            off += 2
            name = raw[off:off + ln].decode("utf-8")
            off += ln
            (ndim,) = struct.unpack_from("<B", raw, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", raw, off)
            off += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            if off + 8 * size > len(raw):
                raise CheckpointError(f"{source}: truncated array {name!r} at byte {off}")
            arrays[name] = np.frombuffer(raw, dtype="<f8", count=size, offset=off).reshape(shape).astype(np.float64)
            off += 8 * size
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{source}: corrupt checkpoint ({e})") from None
    if off != len(raw):
        raise CheckpointError(f"{source}: {len(raw) - off} trailing bytes at byte {off}")
    return header, arrays


def result_payload(result) -> tuple[dict, dict[str, np.ndarray]]:
    arrays = {}
    for k, v in result.sender.params.items():
        arrays[f"sender.{k}"] = v.data
    for k, v in result.receiver.params.items():
        arrays[f"receiver.{k}"] = v.data
    arrays.update(result.learner.sender_opt.state_arrays("opt.sender"))
    arrays.update(result.learner.receiver_opt.state_arrays("opt.receiver"))
    rng_state = result.collector.rng_states()
    rng_state["minibatch"] = rngmod.get_state(result.learner.rng)
    header = {"config": to_dict(result.config, portable=True), "meta": {"episodes": int(result.episodes)}, "rng": rng_state}
    return header, arrays


def save_checkpoint(path, result) -> None:
    header, arrays = result_payload(result)
    Path(path).write_bytes(encode(header, arrays))


@dataclass
class Checkpoint:
    config: object
    episodes: int
    header: dict
    arrays: dict

    def restore(self):
        """Rebuild dataset, agents, learner and collector exactly as saved."""
        from .trainer import Collector, PPOLearner, build_agents

        cfg = self.config
        dataset = cfg.dataset.build(cfg.game.feature_dim)
        sender, receiver = build_agents(cfg, dataset)
        sender.params.load({k[len("sender."):]: v for k, v in self.arrays.items() if k.startswith("sender.")})
        receiver.params.load({k[len("receiver."):]: v for k, v in self.arrays.items() if k.startswith("receiver.")})
        learner = PPOLearner(sender, receiver, cfg.ppo, cfg.seed)
        learner.sender_opt.load_state("opt.sender", self.arrays)
        learner.receiver_opt.load_state("opt.receiver", self.arrays)
        rngmod.set_state(learner.rng, self.header["rng"]["minibatch"])
        collector = Collector(dataset, cfg.game, cfg.agent.bin_counts, cfg.workers)
        collector.load_rng_states(self.header["rng"])
        return dataset, sender, receiver, learner, collector


def load_checkpoint(path) -> Checkpoint:
    header, arrays = decode(Path(path).read_bytes(), str(path))
    return Checkpoint(from_dict(header["config"]), int(header["meta"]["episodes"]), header, arrays)
