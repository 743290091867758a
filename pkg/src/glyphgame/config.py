"""Run configuration: INI-style text files <-> :class:`RunConfig`.

Sections mirror the component configs::

    [game]      num_candidates, max_strokes, sender_mode, canvas_size, ...
    [ppo]       clip_eps, learning_rate, ...
    [agent]     hidden_dim, encoder_widths = 128,32, ...
    [dataset]   kind = synthetic | file, num_classes, path, ...
    [run]       workers, checkpoint_interval, log_interval, stop_at_success, output_dir

Unknown sections or keys are errors.
"""
from __future__ import annotations

import configparser
import dataclasses
import typing
from pathlib import Path

from .agents import AgentConfig
from .game import ConfigError, GameConfig, SenderMode
from .trainer import DatasetSpec, PPOConfig, RunConfig

SECTIONS = {"game": GameConfig, "ppo": PPOConfig, "agent": AgentConfig, "dataset": DatasetSpec}
RUN_KEYS = ("workers", "checkpoint_interval", "log_interval", "stop_at_success", "output_dir")
# output_dir is where a run writes, not how it behaves; checkpoints leave it out
PORTABLE_RUN_KEYS = RUN_KEYS[:-1]


class ConfigFileError(ConfigError):
    pass


def _field_types(cls) -> dict:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def _convert(raw: str, typ, where: str):
    raw = raw.strip()
    origin = typing.get_origin(typ)
    args = typing.get_args(typ)
    if origin is typing.Union:
        if raw.lower() in ("", "none"):
            return None
        typ = next(a for a in args if a is not type(None))
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        if typ is tuple or origin is tuple:
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if typ is SenderMode:
            return SenderMode(raw.upper().replace("-", "_"))
        return raw
    except ValueError:
        raise ConfigFileError(f"{where}: cannot parse {raw!r} as {getattr(typ, '__name__', typ)}") from None


def _line_of(text: str, section: str, key: str | None) -> int:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return no
        elif current == section and key is not None and "=" in s and s.split("=", 1)[0].strip() == key:
            return no
    return 0


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigFileError(f"{source}: {e}") from None
    known = set(SECTIONS) | {"run"}
    for sec in cp.sections():
        if sec not in known:
            raise ConfigFileError(f"{source}:{_line_of(text, sec, None)}: unknown section [{sec}]")
    parts = {}
    for sec, cls in SECTIONS.items():
        types = _field_types(cls)
        kw = {}
        if cp.has_section(sec):
            for key, raw in cp.items(sec):
                where = f"{source}:{_line_of(text, sec, key)}: [{sec}] {key}"
                if key not in types:
                    raise ConfigFileError(f"{where}: unknown key")
                kw[key] = _convert(raw, types[key], where)
        try:
            parts[sec] = cls(**kw)
        except (ConfigError, ValueError) as e:
            raise ConfigFileError(f"{source}:{_line_of(text, sec, None)}: [{sec}] {e}") from None
    run_types = _field_types(RunConfig)
    run_kw = {}
    if cp.has_section("run"):
        for key, raw in cp.items("run"):
            where = f"{source}:{_line_of(text, 'run', key)}: [run] {key}"
            if key not in RUN_KEYS:
                raise ConfigFileError(f"{where}: unknown key")
            run_kw[key] = _convert(raw, run_types[key], where)
    try:
        return RunConfig(**parts, **run_kw)
    except (ConfigError, ValueError) as e:
        raise ConfigFileError(f"{source}: [run] {e}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigFileError(f"cannot read config {path}: {e.strerror}") from None
    return parse_config(text, str(path))


def _plain(v):
    if isinstance(v, SenderMode):
        return v.value
    if isinstance(v, tuple):
        return list(v)
    return v


def to_dict(cfg: RunConfig, portable: bool = False) -> dict:
    out = {sec: {k: _plain(v) for k, v in dataclasses.asdict(getattr(cfg, sec)).items()} for sec in SECTIONS}
    out["run"] = {k: getattr(cfg, k) for k in (PORTABLE_RUN_KEYS if portable else RUN_KEYS)}
    return out


def from_dict(d: dict) -> RunConfig:
    parts = {}
    for sec, cls in SECTIONS.items():
        kw = dict(d.get(sec, {}))
        if sec == "agent" and "encoder_widths" in kw:
            kw["encoder_widths"] = tuple(kw["encoder_widths"])
        parts[sec] = cls(**kw)
    return RunConfig(**parts, **d.get("run", {}))


def format_config(cfg: RunConfig) -> str:
    lines = []
    for sec, values in to_dict(cfg).items():
        lines.append(f"[{sec}]")
        for k, v in values.items():
            if v is None:
                continue
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            lines.append(f"{k} = {v}")
        lines.append("")
    return "\n".join(lines)
