"""
Drawing with quadratic Bezier brushstrokes
==========================================

Each stroke has eight numbers in [0, 1]: start, control and end points,
then thickness and ink intensity. Strokes are composited with a per-pixel max.
"""
import numpy as np

from glyphgame.imageio import save_png
from glyphgame.renderer import Brushstroke, Message, render, render_incremental, blank_canvas

# a single fat arc
arc = Brushstroke(0.15, 0.8, 0.5, 0.05, 0.85, 0.8, thickness=0.3, intensity=1.0)
canvas = render_incremental(blank_canvas(32), arc)
print("arc ink mass:", round(float(canvas.sum()), 3))

# a second, fainter stroke across the middle
bar = Brushstroke(0.1, 0.55, 0.5, 0.55, 0.9, 0.55, thickness=0.1, intensity=0.6)
symbol = render(Message((arc, bar)), 32)

# the order of strokes does not matter under max compositing
assert np.array_equal(symbol, render(Message((bar, arc)), 32))

# crude terminal preview
for row in symbol[::2]:
    print("".join(" .:-=+*#%@"[min(int(v * 10), 9)] for v in row[::1]))

save_png("demo_symbol.png", symbol)
print("wrote demo_symbol.png")
