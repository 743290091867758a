"""``glyphgame`` command line: train, eval, analyze, render-debug.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import rng as rngmod
from .game import ConfigError
from .perception import FeatureFileError

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("glyphgame")


class UsageError(Exception):
    pass


def _load_checkpoint(path):
    from .checkpoint import CheckpointError, load_checkpoint

    if not Path(path).is_file():
        raise UsageError(f"checkpoint not found: {path}")
    try:
        return load_checkpoint(path)
    except CheckpointError as e:
        raise UsageError(str(e)) from None


def cmd_train(args) -> int:
    from .config import format_config, load_config
    from .trainer import train

    cfg = load_config(args.config)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(format_config(cfg))
    result = train(cfg, out, on_row=lambda r: log.info("episode %d  success %.3f", r["episode"], r["success_ma"]))
    final = result.metrics[-1]["success_ma"] if result.metrics else float("nan")
    summary = {"episodes": result.episodes, "final_success_ma": final,
               "first_episode_at_0.6": result.first_episode_reaching(0.6),
               "first_episode_at_0.8": result.first_episode_reaching(0.8)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"trained {result.episodes} episodes, final success_ma {final:.4f}; outputs in {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .trainer import evaluate

    if args.episodes < 1:
        raise UsageError(f"--episodes must be >= 1, got {args.episodes}")
    ckpt = _load_checkpoint(args.checkpoint)
    dataset, sender, receiver, _, _ = ckpt.restore()
    rate = evaluate(dataset, ckpt.config.game, sender, receiver, args.episodes, args.seed)
    print(f"success_rate {rate:.4f} over {args.episodes} episodes")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["checkpoint", "episodes", "seed", "success_rate"])
            w.writerow([args.checkpoint, args.episodes, args.seed, repr(rate)])
    return EXIT_OK


def cmd_analyze(args) -> int:
    from .analysis import Scheme, analyze, write_report

    if args.trials < 1:
        raise UsageError(f"--trials must be >= 1, got {args.trials}")
    scheme = {"t": Scheme.TARGET, "td": Scheme.TARGET_AND_DISTRACTORS}[args.scheme]
    ckpt = _load_checkpoint(args.checkpoint)
    dataset, sender, _, _, _ = ckpt.restore()
    rng = rngmod.stream(args.seed, "analysis")
    report = analyze(sender, dataset, ckpt.config.game, scheme, args.trials, rng, min_samples=args.min_samples)
    write_report(report, args.out)
    for k, n in report.excluded.items():
        print(f"insufficient samples: {k.label} ({n})", file=sys.stderr)
    print(f"{scheme.value}: {len(report.entities)} entities, avg_score {report.avg_score:.6g}, "
          f"baseline_score {report.baseline_score:.6g}")
    return EXIT_OK


def cmd_render_debug(args) -> int:
    from .imageio import save_png
    from .renderer import Brushstroke, rasterize_stroke

    try:
        stroke = Brushstroke(*args.params)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if args.size < 8:
        raise UsageError(f"--size must be >= 8, got {args.size}")
    canvas = rasterize_stroke(stroke, args.size)
    save_png(args.out, canvas)
    print(f"wrote {args.out} ink mass {canvas.sum():.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="glyphgame", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train sender and receiver from a config file")
    t.add_argument("config")
    t.add_argument("--out", help="output directory (overrides [run] output_dir)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="greedy success rate of a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("--episodes", type=int, default=10_000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--csv", help="also write the result to this CSV file")
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("analyze", help="consistency report of a checkpoint's sender")
    a.add_argument("checkpoint")
    a.add_argument("--scheme", choices=("t", "td"), default="t")
    a.add_argument("--trials", type=int, default=20_000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--min-samples", type=int, default=None)
    a.add_argument("--out", default="analysis")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("render-debug", help="rasterize one stroke to a PNG")
    r.add_argument("params", nargs=8, type=float, metavar="P",
                   help="x0 y0 cx cy x1 y1 thickness intensity, each in [0, 1]")
    r.add_argument("--size", type=int, default=32)
    r.add_argument("--out", default="stroke.png")
    r.set_defaults(func=cmd_render_debug)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, FeatureFileError) as e:
        print(f"glyphgame {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001 - any other failure is a runtime error
        print(f"glyphgame {args.command}: failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
