"""8-bit grayscale PNG export."""
from pathlib import Path

import numpy as np
from PIL import Image


def to_uint8(canvas: np.ndarray) -> np.ndarray:
    a = np.asarray(canvas, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D canvas, got shape {a.shape}")
    return np.rint(np.clip(a, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(path, canvas: np.ndarray) -> None:
    Image.fromarray(to_uint8(canvas), mode="L").save(Path(path), format="PNG")


def load_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)
