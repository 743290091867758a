"""Two-agent referential game where the message is a drawn symbol."""
from .game import GameConfig, SenderMode, Trial, compute_reward, sample_trial, sample_trials
from .perception import Dataset, generate_synthetic_dataset, load_feature_file, write_feature_file
from .renderer import Brushstroke, Message, rasterize_stroke, render, render_incremental, stroke_from_action
from .trainer import DatasetSpec, PPOConfig, RunConfig, evaluate, train

__all__ = [
    "Brushstroke", "Dataset", "DatasetSpec", "GameConfig", "Message", "PPOConfig", "RunConfig",
    "SenderMode", "Trial", "compute_reward", "evaluate", "generate_synthetic_dataset",
    "load_feature_file", "rasterize_stroke", "render", "render_incremental", "sample_trial",
    "sample_trials", "stroke_from_action", "train", "write_feature_file",
]
