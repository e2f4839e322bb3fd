"""Walk through the painting environment: actions, strokes, observations.

Run from the repository root:  python3 demos/01_canvas_and_strokes.py
Writes a few illustrative PNGs into demos/output/.
"""

import os

import numpy as np

from paintrl import EnvConfig, PaintEnv, decode_action, new_canvas, render_segment, save_png

OUT = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT, exist_ok=True)

# ------------------------------------------------------------------
# A raw action is six numbers in [0, 1]: angle, length, width, R, G, B.
# The environment decodes them against its configured stroke limits.
cfg = EnvConfig(l_max=24.0, w_max=8.0, h_o=21, w_o=21)

action = np.array([0.125, 0.75, 0.5, 0.8, 0.2, 0.1])
stroke = decode_action(action, cfg)
print("raw action   :", action)
print("decoded      : angle=%.3f rad, length=%.1f px, width=%.1f px, color=%s"
      % (stroke.angle, stroke.length, stroke.width, np.round(stroke.color, 2)))

# ------------------------------------------------------------------
# Strokes rasterize as capsules: every pixel whose center is within
# width/2 of the segment gets the blended color.
canvas = new_canvas(64, 64)
canvas = render_segment(canvas, (8, 8), (56, 40), 9.0, (0.85, 0.3, 0.2), beta=1.0)
canvas = render_segment(canvas, (12, 52), (52, 12), 5.0, (0.2, 0.35, 0.8), beta=1.0)
save_png(canvas, os.path.join(OUT, "strokes_opaque.png"))

# The blending parameter beta mimics different media: 1.0 paints opaquely,
# lower values let the old canvas shine through like thin washes.
for beta in (1.0, 0.6, 0.3):
    wash = new_canvas(64, 64)
    for k in range(5):
        y = 8 + 12 * k
        wash = render_segment(wash, (6, y), (58, y), 10.0, (0.1, 0.4, 0.7), beta=beta)
        wash = render_segment(wash, (32, 6), (32, 58), 10.0, (0.9, 0.5, 0.1), beta=beta)
    save_png(wash, os.path.join(OUT, f"wash_beta_{beta:.1f}.png"))
print("wrote stroke renderings for beta = 1.0 / 0.6 / 0.3")

# ------------------------------------------------------------------
# A full environment step: decode, move the pen, paint, observe, score.
rng = np.random.default_rng(0)
reference = np.zeros((64, 64, 3))
reference[:, :32] = (0.2, 0.3, 0.5)
reference[:, 32:] = (0.8, 0.6, 0.3)

env = PaintEnv(reference, cfg)
print("\npen starts at the canvas center:", env.pen)
print("initial loss L(white, reference) = %.4f" % env.initial_loss)

total = 0.0
for t in range(8):
    reward, obs = env.step(rng.uniform(0, 1, 6))
    total += reward
    print(f"  step {t}: pen=({env.pen[0]:5.1f},{env.pen[1]:5.1f}) "
          f"reward={reward:+.4f} loss={env.prev_loss:.4f}")

# Rewards are normalized loss decreases, so they telescope: the episode sum
# equals the fraction of the initial loss removed so far.
print("sum of rewards        : %+.6f" % total)
print("(L0 - L_t) / L0       : %+.6f" % ((env.initial_loss - env.prev_loss) / env.initial_loss))
save_png(env.canvas, os.path.join(OUT, "random_episode.png"))

# ------------------------------------------------------------------
# Observations are egocentric: canvas patch and reference patch around the
# pen, concatenated side by side. The policy never sees absolute positions.
obs = env.observe()
print("\nobservation shape:", obs.shape, "(h_o x 2*w_o x 3)")
save_png(obs, os.path.join(OUT, "observation.png"))
print("wrote", OUT)
