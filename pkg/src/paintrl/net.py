"""Policy/value network: shared conv trunk, Gaussian action head, value head.

Forward and reverse-mode passes are written directly in numpy so every
gradient is exact and auditable against finite differences. The action head
emits 6 means squashed into [0, 1] by a sigmoid plus 6 state-independent
log standard deviations; the value head emits one scalar.
"""

import io
import math
import struct
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "ARCHS",
    "Arch",
    "CheckpointFormatError",
    "ConvSpec",
    "LOG_STD_MAX",
    "LOG_STD_MIN",
    "NetworkParams",
    "PolicyOutput",
    "backward",
    "forward",
    "forward_batch",
    "init_params",
    "load_params",
    "sample_action",
    "save_params",
]

ACTION_DIM = 6
LOG_STD_INIT = math.log(0.3)
LOG_STD_MIN = math.log(1e-3)
LOG_STD_MAX = 0.0  # std capped at 1, plenty for actions confined to [0, 1]

CKPT_MAGIC = b"PBOT"
CKPT_VERSION = 1


@dataclass(frozen=True)
class ConvSpec:
    kernel_h: int
    kernel_w: int
    stride: int
    out_channels: int

    def out_size(self, h: int, w: int):
        oh = (h - self.kernel_h) // self.stride + 1
        ow = (w - self.kernel_w) // self.stride + 1
        return oh, ow


@dataclass(frozen=True)
class Arch:
    convs: tuple
    fc_units: int


ARCHS = {
    # Three conv layers (64 filters each: 8x8/4, 4x4/2, 3x3/1) into a
    # 512-unit fully connected layer; sized for 41x82x3 observations.
    "default": Arch(
        convs=(ConvSpec(8, 8, 4, 64), ConvSpec(4, 4, 2, 64), ConvSpec(3, 3, 1, 64)),
        fc_units=512,
    ),
    # Smaller trunk for 21x42x3 desk-scale observations.
    "small": Arch(
        convs=(ConvSpec(5, 5, 2, 32), ConvSpec(3, 3, 2, 32), ConvSpec(3, 3, 1, 32)),
        fc_units=128,
    ),
    # Minimal trunk for smoke tests and sub-desk experiments (fits 9x18x3).
    "tiny": Arch(
        convs=(ConvSpec(3, 3, 2, 4), ConvSpec(2, 2, 1, 4)),
        fc_units=8,
    ),
}


@dataclass
class PolicyOutput:
    mean: np.ndarray      # (6,) in [0, 1]
    log_std: np.ndarray   # (6,)
    value: float


class NetworkParams:
    """All weights of the network plus the geometry needed to run it."""

    def __init__(self, arch: Arch, obs_h: int, obs_w: int, conv_w, conv_b,
                 fc_w, fc_b, mean_w, mean_b, value_w, value_b, log_std):
        self.arch = arch
        self.obs_h = obs_h
        self.obs_w = obs_w
        self.conv_w = conv_w    # list of (out_ch, kh, kw, in_ch)
        self.conv_b = conv_b    # list of (out_ch,)
        self.fc_w = fc_w        # (flat, fc_units)
        self.fc_b = fc_b
        self.mean_w = mean_w    # (fc_units, 6)
        self.mean_b = mean_b
        self.value_w = value_w  # (fc_units, 1)
        self.value_b = value_b
        self.log_std = log_std  # (6,)

    @property
    def dtype(self):
        return self.fc_w.dtype

    def param_items(self):
        """All parameter arrays as (name, array) pairs in a fixed order."""
        items = []
        for i, (w, b) in enumerate(zip(self.conv_w, self.conv_b)):
            items.append((f"conv{i}.w", w))
            items.append((f"conv{i}.b", b))
        items.extend([
            ("fc.w", self.fc_w), ("fc.b", self.fc_b),
            ("mean.w", self.mean_w), ("mean.b", self.mean_b),
            ("value.w", self.value_w), ("value.b", self.value_b),
            ("log_std", self.log_std),
        ])
        return items

    def set_param(self, name: str, value: np.ndarray):
        if name.startswith("conv"):
            idx = int(name[4:name.index(".")])
            if name.endswith(".w"):
                self.conv_w[idx] = value
            else:
                self.conv_b[idx] = value
        else:
            attr = {"fc.w": "fc_w", "fc.b": "fc_b", "mean.w": "mean_w",
                    "mean.b": "mean_b", "value.w": "value_w",
                    "value.b": "value_b", "log_std": "log_std"}[name]
            setattr(self, attr, value)

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            self.arch, self.obs_h, self.obs_w,
            [w.copy() for w in self.conv_w], [b.copy() for b in self.conv_b],
            self.fc_w.copy(), self.fc_b.copy(), self.mean_w.copy(),
            self.mean_b.copy(), self.value_w.copy(), self.value_b.copy(),
            self.log_std.copy(),
        )

    def astype(self, dtype) -> "NetworkParams":
        p = self.copy()
        for name, arr in p.param_items():
            p.set_param(name, arr.astype(dtype))
        return p


def trunk_shapes(arch: Arch, obs_h: int, obs_w: int):
    """Per-layer (h, w, c) output shapes plus the flattened trunk width."""
    h, w, c = obs_h, obs_w, 3
    shapes = []
    for spec in arch.convs:
        h, w = spec.out_size(h, w)
        if h < 1 or w < 1:
            raise ValueError(
                f"observation {obs_h}x{obs_w} too small for conv stack "
                f"(layer {len(shapes)} would output {h}x{w})"
            )
        c = spec.out_channels
        shapes.append((h, w, c))
    return shapes, h * w * c


def init_params(obs_h: int, obs_w: int, seed: int, arch="default",
                dtype=np.float64) -> NetworkParams:
    """Seeded scaled-uniform fan-in initialization; biases start at zero."""
    if isinstance(arch, str):
        arch = ARCHS[arch]
    trunk_shapes(arch, obs_h, obs_w)  # raises if the stack does not fit
    rng = np.random.default_rng(seed)

    def uniform(shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape).astype(dtype)

    conv_w, conv_b = [], []
    c_in = 3
    for spec in arch.convs:
        fan_in = spec.kernel_h * spec.kernel_w * c_in
        conv_w.append(uniform((spec.out_channels, spec.kernel_h, spec.kernel_w, c_in), fan_in))
        conv_b.append(np.zeros(spec.out_channels, dtype=dtype))
        c_in = spec.out_channels
    _, flat = trunk_shapes(arch, obs_h, obs_w)
    fc_w = uniform((flat, arch.fc_units), flat)
    fc_b = np.zeros(arch.fc_units, dtype=dtype)
    mean_w = uniform((arch.fc_units, ACTION_DIM), arch.fc_units)
    mean_b = np.zeros(ACTION_DIM, dtype=dtype)
    value_w = uniform((arch.fc_units, 1), arch.fc_units)
    value_b = np.zeros(1, dtype=dtype)
    log_std = np.full(ACTION_DIM, LOG_STD_INIT, dtype=dtype)
    return NetworkParams(arch, obs_h, obs_w, conv_w, conv_b, fc_w, fc_b,
                         mean_w, mean_b, value_w, value_b, log_std)


def _im2col(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """(N,H,W,C) -> (N,OH,OW,kh*kw*C) patch matrix for a valid strided conv."""
    win = sliding_window_view(x, (spec.kernel_h, spec.kernel_w), axis=(1, 2))
    win = win[:, :: spec.stride, :: spec.stride]
    # win: (N, OH, OW, C, kh, kw) -> (N, OH, OW, kh, kw, C)
    win = win.transpose(0, 1, 2, 4, 5, 3)
    n, oh, ow = win.shape[:3]
    return np.ascontiguousarray(win).reshape(n, oh, ow, -1)


def _conv_forward(x, w, b, spec: ConvSpec):
    cols = _im2col(x, spec)
    w2 = w.transpose(1, 2, 3, 0).reshape(cols.shape[-1], w.shape[0])
    return cols @ w2 + b, cols


def _conv_backward(d_pre, cols, w, x_shape, spec: ConvSpec):
    n, oh, ow, k = cols.shape
    oc = w.shape[0]
    w2 = w.transpose(1, 2, 3, 0).reshape(k, oc)
    d_flat = d_pre.reshape(-1, oc)
    dw2 = cols.reshape(-1, k).T @ d_flat
    dw = dw2.reshape(spec.kernel_h, spec.kernel_w, x_shape[3], oc).transpose(3, 0, 1, 2)
    db = d_flat.sum(axis=0)
    d_cols = (d_flat @ w2.T).reshape(n, oh, ow, spec.kernel_h, spec.kernel_w, x_shape[3])
    dx = np.zeros(x_shape, dtype=d_pre.dtype)
    s = spec.stride
    for i in range(spec.kernel_h):
        for j in range(spec.kernel_w):
            dx[:, i : i + s * oh : s, j : j + s * ow : s, :] += d_cols[:, :, :, i, j, :]
    return dw, db, dx


def forward_batch(params: NetworkParams, obs: np.ndarray, want_cache: bool = False):
    """Run a batch of observations; returns (mean, value[, cache]).

    `obs` is (N, h, w, 3) with the geometry the parameters were built for.
    """
    obs = np.asarray(obs, dtype=params.dtype)
    if obs.ndim != 4 or obs.shape[1:] != (params.obs_h, params.obs_w, 3):
        raise ValueError(
            f"observation batch shape {obs.shape} does not match network "
            f"input (N, {params.obs_h}, {params.obs_w}, 3)"
        )
    cache = {"x": [], "cols": [], "pre": []} if want_cache else None
    x = obs
    for w, b, spec in zip(params.conv_w, params.conv_b, params.arch.convs):
        pre, cols = _conv_forward(x, w, b, spec)
        if want_cache:
            cache["x"].append(x)
            cache["cols"].append(cols)
            cache["pre"].append(pre)
        x = np.maximum(pre, 0.0)
    flat = x.reshape(x.shape[0], -1)
    fc_pre = flat @ params.fc_w + params.fc_b
    hidden = np.maximum(fc_pre, 0.0)
    mean_pre = hidden @ params.mean_w + params.mean_b
    mean = 1.0 / (1.0 + np.exp(-mean_pre))
    value = (hidden @ params.value_w)[:, 0] + params.value_b[0]
    if want_cache:
        cache.update(flat=flat, fc_pre=fc_pre, hidden=hidden, mean=mean,
                     conv_out_shape=x.shape)
        return mean, value, cache
    return mean, value


def forward(params: NetworkParams, obs: np.ndarray) -> PolicyOutput:
    """Evaluate a single observation; deterministic in all inputs."""
    mean, value = forward_batch(params, np.asarray(obs)[None])
    return PolicyOutput(mean=mean[0], log_std=params.log_std.copy(),
                        value=float(value[0]))


def backprop_heads(params: NetworkParams, cache, d_mean, d_value, d_log_std=None):
    """Gradients of a scalar objective given its head sensitivities.

    `d_mean` (N,6) and `d_value` (N,) are the objective's derivatives with
    respect to the squashed means and values; returns a dict of gradient
    arrays keyed like `param_items`.
    """
    grads = {}
    mean = cache["mean"]
    hidden = cache["hidden"]
    d_mean_pre = np.asarray(d_mean, dtype=params.dtype) * mean * (1.0 - mean)
    d_value = np.asarray(d_value, dtype=params.dtype)
    grads["mean.w"] = hidden.T @ d_mean_pre
    grads["mean.b"] = d_mean_pre.sum(axis=0)
    grads["value.w"] = (hidden.T @ d_value[:, None])
    grads["value.b"] = np.array([d_value.sum()], dtype=params.dtype)
    d_hidden = d_mean_pre @ params.mean_w.T + d_value[:, None] @ params.value_w.T
    d_fc_pre = d_hidden * (cache["fc_pre"] > 0)
    grads["fc.w"] = cache["flat"].T @ d_fc_pre
    grads["fc.b"] = d_fc_pre.sum(axis=0)
    d_x = (d_fc_pre @ params.fc_w.T).reshape(cache["conv_out_shape"])
    for i in reversed(range(len(params.arch.convs))):
        d_pre = d_x * (cache["pre"][i] > 0)
        dw, db, d_x = _conv_backward(
            d_pre, cache["cols"][i], params.conv_w[i],
            cache["x"][i].shape, params.arch.convs[i],
        )
        grads[f"conv{i}.w"] = dw
        grads[f"conv{i}.b"] = db
    if d_log_std is None:
        grads["log_std"] = np.zeros(ACTION_DIM, dtype=params.dtype)
    else:
        grads["log_std"] = np.asarray(d_log_std, dtype=params.dtype).copy()
    return grads


def backward(params: NetworkParams, obs_batch: np.ndarray, objective):
    """Exact gradients of `objective` with respect to every parameter.

    `objective(mean, value, log_std)` must return a tuple
    (scalar, d_mean, d_value, d_log_std) describing the objective and its
    derivatives with respect to the network outputs.
    """
    mean, value, cache = forward_batch(params, obs_batch, want_cache=True)
    obj, d_mean, d_value, d_log_std = objective(mean, value, params.log_std)
    grads = backprop_heads(params, cache, d_mean, d_value, d_log_std)
    return obj, grads


def sample_action(out: PolicyOutput, rng: np.random.Generator):
    """Draw an action from the diagonal Gaussian head.

    Returns (action, log_prob, raw): `action` is the raw sample clipped to
    [0, 1] (what the environment executes); `log_prob` is the Gaussian log
    density evaluated at the unclipped sample `raw`.
    """
    log_std = np.clip(out.log_std, LOG_STD_MIN, LOG_STD_MAX)
    std = np.exp(log_std)
    raw = out.mean + std * rng.standard_normal(ACTION_DIM)
    action = np.clip(raw, 0.0, 1.0)
    z = (raw - out.mean) / std
    log_prob = float(np.sum(-0.5 * z * z - log_std - 0.5 * math.log(2 * math.pi)))
    return action, log_prob, raw


def gaussian_log_prob(mean, log_std, actions):
    """Batched diagonal-Gaussian log density; mean (N,6), actions (N,6)."""
    std = np.exp(log_std)
    z = (actions - mean) / std
    return np.sum(-0.5 * z * z - log_std - 0.5 * math.log(2 * math.pi), axis=-1)


# --- checkpoint format ----------------------------------------------------
#
# Binary layout (all integers little-endian):
#   magic "PBOT" | u32 version | u32 obs_h | u32 obs_w
#   u32 n_conv   | per conv: u32 kh, kw, stride, out_channels
#   u32 fc_units
#   u32 n_arrays | per array: u16 name length, name utf-8, u8 ndim, u32 dims
#   raw float32 data for each array, in table order

class CheckpointFormatError(Exception):
    """Raised when a checkpoint file cannot be parsed."""


def save_params(params: NetworkParams, path) -> None:
    """Write parameters to `path`; values are stored as 32-bit floats."""
    buf = io.BytesIO()
    buf.write(CKPT_MAGIC)
    buf.write(struct.pack("<III", CKPT_VERSION, params.obs_h, params.obs_w))
    buf.write(struct.pack("<I", len(params.arch.convs)))
    for spec in params.arch.convs:
        buf.write(struct.pack("<IIII", spec.kernel_h, spec.kernel_w,
                              spec.stride, spec.out_channels))
    buf.write(struct.pack("<I", params.arch.fc_units))
    items = params.param_items()
    buf.write(struct.pack("<I", len(items)))
    for name, arr in items:
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for _, arr in items:
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointFormatError(
            f"truncated checkpoint: expected {n} bytes for {what}, got {len(data)}"
        )
    return data


def load_params(path, dtype=np.float64) -> NetworkParams:
    """Read a checkpoint written by `save_params`; exact value round trip."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != CKPT_MAGIC:
            raise CheckpointFormatError(
                f"bad magic {magic!r}, expected {CKPT_MAGIC!r}"
            )
        version, obs_h, obs_w = struct.unpack("<III", _read_exact(fh, 12, "header"))
        if version != CKPT_VERSION:
            raise CheckpointFormatError(
                f"unsupported checkpoint version {version} (expected {CKPT_VERSION})"
            )
        (n_conv,) = struct.unpack("<I", _read_exact(fh, 4, "conv count"))
        convs = []
        for _ in range(n_conv):
            kh, kw, stride, oc = struct.unpack("<IIII", _read_exact(fh, 16, "conv spec"))
            convs.append(ConvSpec(kh, kw, stride, oc))
        (fc_units,) = struct.unpack("<I", _read_exact(fh, 4, "fc units"))
        arch = Arch(convs=tuple(convs), fc_units=fc_units)
        (n_arrays,) = struct.unpack("<I", _read_exact(fh, 4, "array count"))
        table = []
        for _ in range(n_arrays):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, "name length"))
            name = _read_exact(fh, name_len, "name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, "ndim"))
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim, "shape"))
            table.append((name, shape))
        arrays = {}
        for name, shape in table:
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = _read_exact(fh, 4 * count, f"data of {name}")
            arrays[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(dtype)
        if fh.read(1):
            raise CheckpointFormatError("checkpoint has trailing bytes")

    try:
        params = init_params(obs_h, obs_w, seed=0, arch=arch, dtype=dtype)
    except (ValueError, ZeroDivisionError) as exc:
        raise CheckpointFormatError(f"inconsistent checkpoint geometry: {exc}") from exc
    expected = dict(params.param_items())
    if sorted(arrays) != sorted(expected):
        raise CheckpointFormatError(
            f"checkpoint arrays {sorted(arrays)} do not match network "
            f"layout {sorted(expected)}"
        )
    for name, current in expected.items():
        if arrays[name].shape != current.shape:
            raise CheckpointFormatError(
                f"array {name} has shape {arrays[name].shape}, "
                f"expected {current.shape}"
            )
        params.set_param(name, arrays[name])
    return params
