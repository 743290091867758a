"""
One round of the referential game with untrained agents
=======================================================

The sender sees the target (and, when D-Aware, the distractors) and draws
up to two strokes. The receiver sees the drawing and the three candidates
in shuffled order and points at one. Before training this is a coin flip
between three.
"""
import numpy as np

from glyphgame.game import GameConfig, SenderMode, sample_trials
from glyphgame.renderer import StrokeCache
from glyphgame.trainer import RunConfig, build_agents, run_episodes

cfg = RunConfig(game=GameConfig(sender_mode=SenderMode.D_AWARE, seed=3))
dataset = cfg.dataset.build(cfg.game.feature_dim)
sender, receiver = build_agents(cfg, dataset)
cache = StrokeCache(cfg.game.canvas_size, cfg.agent.bin_counts)
rng = np.random.default_rng(0)

trials = sample_trials(dataset, cfg.game, 5, rng)
batch = run_episodes(dataset, cfg.game, sender, receiver, trials, rng, cache)
for i in range(5):
    t_cls = dataset.class_ids[trials.target[i]]
    print(f"target class {t_cls}  strokes {batch.lengths[i]}  "
          f"target at {trials.target_position[i]}  receiver chose {batch.choice[i]}  reward {batch.reward[i]:.0f}")

# over many rounds the success rate sits at 1/3
trials = sample_trials(dataset, cfg.game, 5000, rng)
batch = run_episodes(dataset, cfg.game, sender, receiver, trials, rng, cache)
print("untrained success over 5000 rounds:", batch.reward.mean())
