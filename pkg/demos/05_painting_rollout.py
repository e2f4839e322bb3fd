"""Run-time painting: strokes with value-based stopping and a coarse-to-fine
pyramid, plus an exact replay from the stroke log.

Uses the checkpoint written by demos/04_training_desk_scale.py if present
(run that first for nicer results), otherwise a briefly trained stand-in.

Run from the repository root:  python3 demos/05_painting_rollout.py
"""

import os

import numpy as np

from paintrl import (
    Dataset,
    EnvConfig,
    LossKind,
    RolloutConfig,
    load_params,
    paint,
    paint_multiscale,
    replay_stroke_log,
    save_png,
    train,
    TrainConfig,
)

OUT = os.path.join(os.path.dirname(__file__), "output")
RUN = os.path.join(OUT, "train_run")
os.makedirs(OUT, exist_ok=True)

ENV = EnvConfig(l_max=6.0, w_max=6.0, w_eps=0.5, beta=1.0, h_o=21, w_o=21)
L2 = LossKind("l2")


def get_params():
    ckpt = os.path.join(RUN, "final.ckpt")
    if os.path.exists(ckpt):
        print("using checkpoint from demo 04:", ckpt)
        return load_params(ckpt)
    print("no trained checkpoint found; running a short stand-in training")
    rng = np.random.default_rng(0)
    patches = np.stack([
        np.ones((32, 32, 3)) * rng.uniform(0.2, 0.8, 3) for _ in range(4)
    ])
    cfg = TrainConfig(episodes=600, episodes_per_update=4, t_max=20,
                      learning_rate=3e-4, arch="small", env=ENV, seed=0)
    params, _ = train(cfg, Dataset(patches), os.path.join(OUT, "standin_run"))
    return params


def checkerboard(n=64):
    img = np.ones((n, n, 3))
    ys, xs = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    img[(ys // 16 + xs // 16) % 2 == 0] = (0.25, 0.35, 0.55)
    img[(ys // 16 + xs // 16) % 2 == 1] = (0.75, 0.55, 0.35)
    return img


params = get_params()
reference = checkerboard()
save_png(reference, os.path.join(OUT, "rollout_reference.png"))

# ------------------------------------------------------------------
# Single-scale painting: random stroke starts, policy-mean segments, the
# value head decides when a stroke has stopped paying off.
cfg = RolloutConfig(thresh_sim=0.002, max_strokes_total=400,
                    max_segments_per_stroke=6, seed=0)
canvas, log = paint(reference, params, cfg, ENV, L2)
save_png(canvas, os.path.join(OUT, "rollout_single.png"))
print(f"single scale : {len(log)} segments, final L2 "
      f"{L2.evaluate(canvas, reference):.5f}")

# The stroke log is a complete record: replaying it on a blank canvas
# reproduces the painting bit for bit.
replayed = replay_stroke_log(log, 64, 64, ENV)
print("replay is bit-identical:", bool(np.array_equal(replayed, canvas)))

# ------------------------------------------------------------------
# Coarse-to-fine: paint a low-resolution version first (large structures),
# then refine on top of the upsampled canvas at full resolution.
multi_cfg = RolloutConfig(thresh_sim=0.002, max_strokes_total=400,
                          max_segments_per_stroke=6, scales=(0.5, 1.0), seed=0)
multi, multi_log = paint_multiscale(reference, params, multi_cfg, ENV, L2)
save_png(multi, os.path.join(OUT, "rollout_multiscale.png"))
print(f"coarse-to-fine: {len(multi_log)} segments, final L2 "
      f"{L2.evaluate(multi, reference):.5f}")
print("wrote rollout_*.png under", OUT)
