"""Train a small painting policy on four synthetic reference patches.

A scaled-down version of the full experiment: 32x32 canvases, 21x42x3
observations, curriculum horizons and difficulty-based reference sampling.
Takes a few minutes on one core. Pass an episode count to override the
default 2000, e.g.:  python3 demos/04_training_desk_scale.py 4000

Writes the run (checkpoints, metrics.csv) into demos/output/train_run/ and
before/after paintings of each reference.
"""

import os
import sys
import time

import numpy as np

from paintrl import (
    Dataset,
    EnvConfig,
    LossKind,
    PaintEnv,
    TrainConfig,
    eval_policy,
    save_png,
    train,
)

OUT = os.path.join(os.path.dirname(__file__), "output")
RUN = os.path.join(OUT, "train_run")
os.makedirs(RUN, exist_ok=True)


def synthetic_references(n=32):
    """Four 32x32 patches: two solids, two gradients."""
    patches = [
        np.ones((n, n, 3)) * np.array([0.2, 0.3, 0.4]),
        np.ones((n, n, 3)) * np.array([0.7, 0.5, 0.3]),
    ]
    g = np.linspace(0, 1, n)[None, :, None] * np.ones((n, n, 1))
    patches.append((1 - g) * np.array([0.1, 0.1, 0.5]) + g * np.array([0.6, 0.2, 0.2]))
    v = np.linspace(0.3, 0.7, n)[:, None, None] * np.ones((n, n, 1))
    patches.append(np.repeat(v, 3, axis=2))
    return Dataset(np.stack(patches))


def paint_with_mean_policy(params, patch, env_cfg, steps=20):
    env = PaintEnv(patch, env_cfg, LossKind("l2"))
    obs = env.observe()
    from paintrl import forward

    for _ in range(steps):
        out = forward(params, obs)
        _, obs = env.step(np.clip(out.mean, 0, 1))
    return env.canvas


def main():
    episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    env_cfg = EnvConfig(l_max=6.0, w_max=6.0, w_eps=0.5, beta=1.0, h_o=21, w_o=21)
    cfg = TrainConfig(
        episodes=episodes, episodes_per_update=4, t_max=20,
        epochs=4, minibatch_size=64, learning_rate=3e-4,
        entropy_coef=1e-3, value_coef=0.5,
        r_thresh_start=0.02, r_thresh_max=0.25,
        loss="l2", seed=0, curriculum=True, sampler="difficulty",
        arch="small", env=env_cfg,
    )
    dataset = synthetic_references()
    loss = LossKind("l2")

    for i, patch in enumerate(dataset.patches):
        save_png(patch, os.path.join(OUT, f"reference_{i}.png"))

    before = eval_policy(
        __import__("paintrl").init_params(21, 42, cfg.seed, arch="small"),
        dataset, env_cfg, loss, cfg.t_max,
    )
    print(f"untrained policy: mean reward {before['mean_reward']:+.3f}, "
          f"final/initial loss {before['mean_loss_ratio']:.3f}")

    t0 = time.time()
    params, rows = train(cfg, dataset, RUN)
    print(f"trained {len(rows)} episodes in {time.time() - t0:.0f}s "
          f"-> {RUN}/final.ckpt, metrics.csv")

    after = eval_policy(params, dataset, env_cfg, loss, cfg.t_max)
    print(f"trained policy  : mean reward {after['mean_reward']:+.3f}, "
          f"final/initial loss {after['mean_loss_ratio']:.3f}")

    for i, patch in enumerate(dataset.patches):
        canvas = paint_with_mean_policy(params, patch, env_cfg)
        save_png(canvas, os.path.join(OUT, f"painted_{i}.png"))
    print("wrote reference_*.png and painted_*.png under", OUT)


if __name__ == "__main__":
    main()
