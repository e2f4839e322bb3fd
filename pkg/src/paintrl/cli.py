"""Command-line front end: dataset prep, training, painting, evaluation,
gradient checking.

Exit codes: 0 success, 1 runtime or file-format error, 2 usage error
(including unknown configuration keys). Every subcommand is deterministic
for a fixed seed.
"""

import argparse
import os
import sys

import numpy as np

from . import data, gradcheck, pngio, rollout
from .config import ConfigError, load_config
from .env import EnvConfig
from .losses import FeatureStack, LossKind
from .net import CheckpointFormatError, load_params, save_params
from .trainer import TrainConfig, eval_policy, train

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paintrl",
        description="Stroke-painting reinforcement learning toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep-data", help="sample reference patches into an archive")
    p.add_argument("--input", required=True, help="directory of source PNG images")
    p.add_argument("--out", required=True, help="output dataset archive")
    p.add_argument("--n", type=int, default=16, help="number of patches to sample")
    p.add_argument("--patch-size", type=int, default=32, help="patch side length, pixels")
    p.add_argument("--scales", default="1,2,3", help="pyramid crop scales, e.g. 1,2,3")
    p.add_argument("--no-augment", action="store_true", help="disable rotation/flip")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cluster-k", type=int, default=0,
                   help="condense to k patches by perceptual clustering (0 = off)")

    p = sub.add_parser("train", help="train a painting policy")
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--dataset", required=True, help="dataset archive from prep-data")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--workers", type=int, default=None,
                   help="override the parallelism bound (collection currently runs serially)")

    p = sub.add_parser("paint", help="paint a reference image with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ref", required=True, help="reference PNG")
    p.add_argument("--out", required=True, help="output PNG")
    p.add_argument("--scales", default="1.0", help="pyramid scales, e.g. 0.25,0.5,1.0")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stroke-log", default=None, help="write executed strokes as CSV")
    p.add_argument("--config", default=None,
                   help="config file providing environment constants and loss")
    p.add_argument("--loss", default=None, choices=["l2", "lhalf", "perceptual"])
    p.add_argument("--thresh-sim", type=float, default=0.001)
    p.add_argument("--max-strokes", type=int, default=2000)
    p.add_argument("--max-segments", type=int, default=8)
    p.add_argument("--value-stop", type=float, default=0.0)

    p = sub.add_parser("eval", help="report mean reward and loss ratio on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--loss", default=None, choices=["l2", "lhalf", "perceptual"])
    p.add_argument("--config", default=None)
    p.add_argument("--t-max", type=int, default=None)

    p = sub.add_parser("gradcheck", help="verify analytic gradients by finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", default="9x18",
                   help="observation sizes to check, e.g. 9x18,11x22")
    p.add_argument("--tolerance", type=float, default=gradcheck.DEFAULT_TOLERANCE)
    return parser


def _load_sources(input_dir):
    try:
        names = sorted(n for n in os.listdir(input_dir) if n.lower().endswith(".png"))
    except OSError as exc:
        raise RuntimeError(f"cannot read input directory {input_dir}: {exc}") from exc
    if not names:
        raise RuntimeError(f"no PNG images found in {input_dir}")
    return [pngio.load_png(os.path.join(input_dir, n)) for n in names]


def _cmd_prep_data(args) -> int:
    sources = _load_sources(args.input)
    rng = np.random.default_rng(args.seed)
    scales = tuple(int(s) for s in args.scales.split(","))
    dataset = data.prepare_dataset(
        sources, args.n, args.patch_size, scales=scales,
        augment=not args.no_augment, rng=rng,
    )
    if args.cluster_k:
        dataset = data.cluster_representatives(
            dataset, FeatureStack.from_seed(0), args.cluster_k, rng=rng
        )
    data.save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} patches of "
          f"{dataset.patch_shape[0]}x{dataset.patch_shape[1]} to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = _replace_cfg(cfg, seed=args.seed)
    if args.workers is not None:
        cfg = _replace_cfg(cfg, workers=args.workers)
    dataset = data.load_dataset(args.dataset)
    init = None
    start_episode = 0
    if args.resume:
        init = load_params(args.resume)
        metrics_path = os.path.join(args.out, "metrics.csv")
        if os.path.exists(metrics_path):
            with open(metrics_path) as fh:
                start_episode = max(0, sum(1 for _ in fh) - 1)
    train(cfg, dataset, args.out, init=init, start_episode=start_episode)
    print(f"trained {cfg.episodes} episodes; wrote {args.out}/final.ckpt "
          f"and {args.out}/metrics.csv")
    return 0


def _replace_cfg(cfg: TrainConfig, **kwargs) -> TrainConfig:
    import dataclasses

    return dataclasses.replace(cfg, **kwargs)


def _env_and_loss(args, params) -> tuple:
    """Environment constants and loss for paint/eval, cross-checked against
    the checkpoint's observation geometry."""
    if args.config:
        cfg = load_config(args.config)
        env_cfg, loss_name = cfg.env, cfg.loss
    else:
        if params.obs_w % 2 != 0:
            raise RuntimeError(
                f"checkpoint observation width {params.obs_w} is odd; "
                "cannot infer the patch split"
            )
        env_cfg, loss_name = EnvConfig(h_o=params.obs_h, w_o=params.obs_w // 2), "l2"
    if getattr(args, "loss", None):
        loss_name = args.loss
    if (env_cfg.h_o, 2 * env_cfg.w_o) != (params.obs_h, params.obs_w):
        raise RuntimeError(
            f"configured observation {env_cfg.h_o}x{2 * env_cfg.w_o} does not "
            f"match checkpoint input {params.obs_h}x{params.obs_w}"
        )
    return env_cfg, LossKind(loss_name)


def _cmd_paint(args) -> int:
    params = load_params(args.checkpoint)
    env_cfg, loss_kind = _env_and_loss(args, params)
    reference = pngio.load_png(args.ref)
    scales = tuple(float(s) for s in args.scales.split(","))
    cfg = rollout.RolloutConfig(
        thresh_sim=args.thresh_sim, value_stop=args.value_stop,
        max_strokes_total=args.max_strokes,
        max_segments_per_stroke=args.max_segments,
        scales=scales, seed=args.seed,
    )
    canvas, log = rollout.paint_multiscale(reference, params, cfg, env_cfg, loss_kind)
    pngio.save_png(canvas, args.out)
    if args.stroke_log:
        with open(args.stroke_log, "w", encoding="utf-8") as fh:
            fh.write(rollout.format_stroke_log(log))
    final_loss = loss_kind.evaluate(canvas, reference)
    print(f"painted {args.out}: {len(log)} segments, final {loss_kind.kind} "
          f"loss {final_loss:.6g}")
    return 0


def _cmd_eval(args) -> int:
    params = load_params(args.checkpoint)
    env_cfg, loss_kind = _env_and_loss(args, params)
    dataset = data.load_dataset(args.dataset)
    t_max = args.t_max if args.t_max is not None else TrainConfig().t_max
    report = eval_policy(params, dataset, env_cfg, loss_kind, t_max)
    print(f"patches={len(dataset)} loss={loss_kind.kind} "
          f"mean_episode_reward={report['mean_reward']:.6g} "
          f"mean_final_loss_ratio={report['mean_loss_ratio']:.6g}")
    return 0


def _cmd_gradcheck(args) -> int:
    sizes = []
    for token in args.sizes.split(","):
        h, _, w = token.partition("x")
        sizes.append((int(h), int(w)))
    result = gradcheck.run_gradcheck(seed=args.seed, obs_sizes=tuple(sizes))
    print(result.report(args.tolerance))
    return 0 if result.passed(args.tolerance) else 1


_HANDLERS = {
    "prep-data": _cmd_prep_data,
    "train": _cmd_train,
    "paint": _cmd_paint,
    "eval": _cmd_eval,
    "gradcheck": _cmd_gradcheck,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except ConfigError as exc:
        print(f"paintrl: configuration error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:  # invalid argument values count as usage errors
        print(f"paintrl: invalid argument: {exc}", file=sys.stderr)
        return 2
    except (data.DatasetFormatError, CheckpointFormatError) as exc:
        print(f"paintrl: format error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, OSError) as exc:
        print(f"paintrl: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
