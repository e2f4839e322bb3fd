"""Finite-difference verification of every analytic gradient path.

Each check compares reverse-mode gradients against central differences
(default step 1e-5) in double precision. The reported error for a tensor is
max|analytic - numeric| / (max|analytic| + max|numeric| + 1e-12), and a
check passes when every tensor stays below the tolerance.
"""

import math

import numpy as np

from .env import EnvConfig
from .net import (
    ConvSpec,
    _conv_backward,
    _conv_forward,
    backward,
    forward_batch,
    init_params,
)
from .trainer import TrainConfig, _ppo_loss_and_grads

__all__ = ["GradCheckResult", "run_gradcheck", "DEFAULT_TOLERANCE"]

DEFAULT_TOLERANCE = 1e-4


class GradCheckResult:
    def __init__(self):
        self.entries = []  # (name, relative error)

    def add(self, name: str, rel_err: float):
        self.entries.append((name, float(rel_err)))

    @property
    def max_rel_err(self) -> float:
        return max(err for _, err in self.entries)

    def passed(self, tol: float = DEFAULT_TOLERANCE) -> bool:
        return self.max_rel_err < tol

    def report(self, tol: float = DEFAULT_TOLERANCE) -> str:
        lines = []
        for name, err in self.entries:
            status = "ok" if err < tol else "FAIL"
            lines.append(f"{name:<46} rel_err={err:.3e}  {status}")
        lines.append(f"max relative error: {self.max_rel_err:.3e} (tolerance {tol:g})")
        return "\n".join(lines)


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.max(np.abs(analytic)) + np.max(np.abs(numeric)) + 1e-12
    return float(np.max(np.abs(analytic - numeric)) / scale)


def _fd_grad(f, arr: np.ndarray, step: float) -> np.ndarray:
    """Central-difference gradient of scalar f with respect to `arr` in place."""
    grad = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        hi = f()
        flat[i] = keep - step
        lo = f()
        flat[i] = keep
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def _check_conv_layer(result, rng, step):
    spec = ConvSpec(3, 3, 2, 4)
    x = rng.standard_normal((2, 7, 9, 3))
    w = rng.standard_normal((4, 3, 3, 3)) * 0.5
    b = rng.standard_normal(4) * 0.1
    g = rng.standard_normal((2, 3, 4, 4))

    def objective():
        pre, _ = _conv_forward(x, w, b, spec)
        return float(np.sum(pre * g))

    _, cols = _conv_forward(x, w, b, spec)
    dw, db, dx = _conv_backward(g, cols, w, x.shape, spec)
    result.add("conv.weight", _rel_err(dw, _fd_grad(objective, w, step)))
    result.add("conv.bias", _rel_err(db, _fd_grad(objective, b, step)))
    result.add("conv.input", _rel_err(dx, _fd_grad(objective, x, step)))


def _check_relu(result, rng, step):
    # inputs pushed away from the kink so finite differences stay one-sided
    x = rng.standard_normal((5, 7))
    x += np.sign(x) * 0.05
    g = rng.standard_normal((5, 7))

    def objective():
        return float(np.sum(np.maximum(x, 0.0) * g))

    analytic = g * (x > 0)
    result.add("relu.input", _rel_err(analytic, _fd_grad(objective, x, step)))


def _check_dense_sigmoid(result, rng, step):
    x = rng.standard_normal((4, 6))
    w = rng.standard_normal((6, 3)) * 0.5
    b = rng.standard_normal(3) * 0.1
    g = rng.standard_normal((4, 3))

    def objective():
        y = 1.0 / (1.0 + np.exp(-(x @ w + b)))
        return float(np.sum(y * g))

    y = 1.0 / (1.0 + np.exp(-(x @ w + b)))
    d_pre = g * y * (1.0 - y)
    result.add("dense+sigmoid.weight", _rel_err(x.T @ d_pre, _fd_grad(objective, w, step)))
    result.add("dense+sigmoid.bias", _rel_err(d_pre.sum(axis=0), _fd_grad(objective, b, step)))


def _network_fd(params, f, step):
    """Finite-difference gradients of f() for every parameter tensor."""
    fd = {}
    for name, arr in params.param_items():
        fd[name] = _fd_grad(f, arr, step)
    return fd


def _clear_kinks(params, obs, margin=2e-4):
    """Nudge biases so no rectifier input sits within `margin` of zero.

    Central differences would otherwise occasionally straddle a kink and
    report a spurious mismatch; the parameter perturbations displace any
    pre-activation by far less than this margin.
    """
    x = np.asarray(obs, dtype=params.dtype)
    for w, b, spec in zip(params.conv_w, params.conv_b, params.arch.convs):
        pre, _ = _conv_forward(x, w, b, spec)
        for c in range(pre.shape[-1]):
            while np.any(np.abs(pre[..., c]) < margin):
                b[c] += 3 * margin
                pre[..., c] += 3 * margin
        x = np.maximum(pre, 0.0)
    flat = x.reshape(x.shape[0], -1)
    fc_pre = flat @ params.fc_w + params.fc_b
    for j in range(fc_pre.shape[-1]):
        while np.any(np.abs(fc_pre[:, j]) < margin):
            params.fc_b[j] += 3 * margin
            fc_pre[:, j] += 3 * margin


def _check_full_network(result, rng, obs_h, obs_w, step, corrupt=False):
    arch_tag = f"net[{obs_h}x{obs_w}]"
    params = _tiny_params(obs_h, obs_w, seed=int(rng.integers(1 << 31)))
    obs = rng.uniform(0.0, 1.0, size=(3, obs_h, obs_w, 3))
    _clear_kinks(params, obs)
    g_mean = rng.standard_normal((3, 6))
    g_value = rng.standard_normal(3)
    g_log_std = rng.standard_normal(6)

    def objective_fn(mean, value, log_std):
        obj = float(np.sum(mean * g_mean) + np.sum(value * g_value)
                    + np.sum(log_std * g_log_std))
        return obj, g_mean, g_value, g_log_std

    _, grads = backward(params, obs, objective_fn)
    if corrupt:
        grads["fc.w"] = grads["fc.w"] + 0.05

    def scalar():
        mean, value = forward_batch(params, obs)
        return float(np.sum(mean * g_mean) + np.sum(value * g_value)
                     + np.sum(params.log_std * g_log_std))

    fd = _network_fd(params, scalar, step)
    for name, _ in params.param_items():
        result.add(f"{arch_tag}.{name}", _rel_err(grads[name], fd[name]))


def _check_ppo_objective(result, rng, obs_h, obs_w, step):
    params = _tiny_params(obs_h, obs_w, seed=int(rng.integers(1 << 31)))
    cfg = TrainConfig(env=EnvConfig(h_o=obs_h, w_o=obs_w // 2))
    n = 6
    obs = rng.uniform(0.0, 1.0, size=(n, obs_h, obs_w, 3))
    _clear_kinks(params, obs)
    mean, value = forward_batch(params, obs)
    actions = np.clip(mean + 0.25 * rng.standard_normal((n, 6)), -0.5, 1.5)
    # old log probs offset so the ratios spread across the clip window but
    # keep a margin from its kinks (finite differences must not cross them)
    from .net import gaussian_log_prob

    offsets = rng.uniform(-0.4, 0.4, n)
    for i in range(n):
        while min(abs(math.exp(offsets[i]) - 1.0 + cfg.clip_eps),
                  abs(math.exp(offsets[i]) - 1.0 - cfg.clip_eps)) < 0.03:
            offsets[i] += 0.07
    old_lp = gaussian_log_prob(mean, params.log_std, actions) - offsets
    advantages = rng.standard_normal(n)
    returns = rng.standard_normal(n)

    _, grads, _ = _ppo_loss_and_grads(params, obs, actions, old_lp,
                                      advantages, returns, cfg)

    def scalar():
        loss, _, _ = _ppo_loss_and_grads(params, obs, actions, old_lp,
                                         advantages, returns, cfg)
        return loss

    fd = _network_fd(params, scalar, step)
    for name, _ in params.param_items():
        result.add(f"ppo.{name}", _rel_err(grads[name], fd[name]))


def _tiny_params(obs_h, obs_w, seed):
    from .net import Arch

    arch = Arch(convs=(ConvSpec(3, 3, 2, 4), ConvSpec(2, 2, 1, 4)), fc_units=8)
    return init_params(obs_h, obs_w, seed, arch=arch, dtype=np.float64)


def run_gradcheck(seed: int = 0, obs_sizes=((9, 18),), step: float = 1e-5,
                  corrupt: bool = False) -> GradCheckResult:
    """Check every layer type, the composed network, and the PPO objective.

    `corrupt` deliberately breaks one analytic gradient (negative-control
    hook for tests). Deterministic for a fixed seed; every sub-check draws
    from its own derived generator, so the instances are independent of
    which other checks run.
    """
    result = GradCheckResult()
    _check_conv_layer(result, np.random.default_rng([seed, 1]), step)
    _check_relu(result, np.random.default_rng([seed, 2]), step)
    _check_dense_sigmoid(result, np.random.default_rng([seed, 3]), step)
    for i, (obs_h, obs_w) in enumerate(obs_sizes):
        _check_full_network(result, np.random.default_rng([seed, 10 + i]),
                            obs_h, obs_w, step, corrupt=corrupt)
    _check_ppo_objective(result, np.random.default_rng([seed, 99]),
                         obs_sizes[0][0], obs_sizes[0][1], step)
    return result
