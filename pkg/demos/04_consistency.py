"""
How consistent is the emergent writing system?
==============================================

Group the sender's greedy symbols by entity, average each group into a
heatmap and score its sharpness with the variance of the Laplacian. A
system that writes the same thing for the same entity gives sharp
heatmaps; the pooled heatmap over all symbols is the blurry baseline.

Run 03_train_small.py first.
"""
from glyphgame import rng
from glyphgame.analysis import Scheme, analyze, write_report
from glyphgame.checkpoint import load_checkpoint

ckpt = load_checkpoint("demo_run/checkpoints/final.glyc")
dataset, sender, _, _, _ = ckpt.restore()
game = ckpt.config.game

for scheme in (Scheme.TARGET, Scheme.TARGET_AND_DISTRACTORS):
    report = analyze(sender, dataset, game, scheme, 10_000, rng.stream(0, "analysis"))
    print(f"{scheme.value:24s} entities {len(report.entities):4d}  "
          f"avg {report.avg_score:.5f}  baseline {report.baseline_score:.5f}  "
          f"ratio {report.avg_score / report.baseline_score:.1f}")
    write_report(report, f"demo_analysis/{scheme.value.lower()}")

print("heatmaps in demo_analysis/*/heatmaps/")
