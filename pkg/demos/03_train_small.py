"""
Training both agents with PPO
=============================

A short run on the default 10-class synthetic dataset. Success climbs
from chance towards coordination within a few tens of thousands of
episodes; this demo stops at 0.8 to keep it under a minute or two.
"""
from glyphgame.game import GameConfig, SenderMode
from glyphgame.trainer import PPOConfig, RunConfig, evaluate, train

cfg = RunConfig(
    game=GameConfig(sender_mode=SenderMode.D_AWARE, seed=0),
    ppo=PPOConfig(total_episodes=60_000),
    stop_at_success=0.8,
)


def show(row):
    print(f"episode {row['episode']:6d}  success {row['success_ma']:.3f}  clip {row['clip_fraction']:.3f}")


result = train(cfg, out_dir="demo_run", on_row=show)
print("0.6 first reached (trailing 1000):", result.first_crossing(0.6))
rate = evaluate(result.dataset, cfg.game, result.sender, result.receiver, 5000, seed=1)
print(f"greedy success on fresh trials: {rate:.3f}")
print("checkpoint: demo_run/checkpoints/final.glyc")
