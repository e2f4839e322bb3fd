"""Reference-image datasets: patch sampling, clustering, and archive I/O.

Training references are fixed-size patches drawn from source images at
random positions and scales, optionally rotated by 90-degree multiples and
mirrored, then bilinearly resampled to the training size. A dataset can be
condensed by k-medoids clustering under the perceptual distance, keeping one
randomly chosen member per cluster.
"""

import io
import itertools
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .imageops import resize_bilinear
from .losses import FeatureStack

__all__ = [
    "Dataset",
    "DatasetFormatError",
    "cluster_representatives",
    "load_dataset",
    "prepare_dataset",
    "save_dataset",
]

ARCHIVE_MAGIC = b"PBDS"
ARCHIVE_VERSION = 1


class DatasetFormatError(Exception):
    """Raised when a dataset archive cannot be parsed."""


@dataclass
class Dataset:
    """Fixed-size reference patches plus per-patch running reward statistics."""

    patches: np.ndarray                      # (n, h, w, 3) float64 in [0, 1]
    reward_sum: np.ndarray = field(default=None)
    episode_count: np.ndarray = field(default=None)

    def __post_init__(self):
        self.patches = np.asarray(self.patches, dtype=np.float64)
        if self.patches.ndim != 4 or self.patches.shape[3] != 3 or len(self.patches) == 0:
            raise ValueError(
                f"patches must be a non-empty (n, h, w, 3) array, got {self.patches.shape}"
            )
        n = len(self.patches)
        if self.reward_sum is None:
            self.reward_sum = np.zeros(n)
        if self.episode_count is None:
            self.episode_count = np.zeros(n, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.patches)

    @property
    def patch_shape(self):
        return self.patches.shape[1:]

    def record_episode(self, index: int, episode_return: float) -> None:
        self.reward_sum[index] += episode_return
        self.episode_count[index] += 1

    def mean_rewards(self) -> np.ndarray:
        """Running mean episode return per patch; never-visited patches read
        as -inf so a mean-reward sampler tries them first."""
        out = np.full(len(self), -np.inf)
        seen = self.episode_count > 0
        out[seen] = self.reward_sum[seen] / self.episode_count[seen]
        return out

    def subset(self, n: int) -> "Dataset":
        if not 1 <= n <= len(self):
            raise ValueError(f"subset size {n} out of range 1..{len(self)}")
        return Dataset(self.patches[:n].copy())


def prepare_dataset(sources, n: int, out_size: int, scales=(1, 2, 3),
                    augment: bool = True, rng=None) -> Dataset:
    """Sample `n` training patches of out_size x out_size from source images.

    Each patch takes a random source, a random pyramid scale (crop size =
    out_size * scale, which must fit inside every source), and a random
    position; with `augment`, a random 90-degree rotation and optional
    horizontal mirror are applied before the bilinear resample to out_size.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    sources = [np.asarray(s, dtype=np.float64) for s in sources]
    if not sources:
        raise ValueError("need at least one source image")
    if n < 1:
        raise ValueError("n must be >= 1")
    scales = tuple(int(s) for s in scales)
    if not scales or any(s < 1 for s in scales):
        raise ValueError(f"scales must be positive integers, got {scales}")
    max_crop = out_size * max(scales)
    for i, src in enumerate(sources):
        if max_crop > src.shape[0] or max_crop > src.shape[1]:
            raise ValueError(
                f"crop of {max_crop}px (out_size*scale) exceeds source {i} "
                f"of {src.shape[0]}x{src.shape[1]}"
            )
    patches = np.empty((n, out_size, out_size, 3))
    for i in range(n):
        src = sources[int(rng.integers(len(sources)))]
        crop = out_size * scales[int(rng.integers(len(scales)))]
        top = int(rng.integers(src.shape[0] - crop + 1))
        left = int(rng.integers(src.shape[1] - crop + 1))
        patch = src[top : top + crop, left : left + crop]
        if augment:
            patch = np.rot90(patch, k=int(rng.integers(4)))
            if rng.integers(2):
                patch = np.fliplr(patch)
        patches[i] = resize_bilinear(patch, out_size, out_size)
    return Dataset(np.clip(patches, 0.0, 1.0))


def _pairwise_feature_distances(patches, stack: FeatureStack) -> np.ndarray:
    """Matrix of size-normalized squared feature distances between patches."""
    vecs = []
    for patch in patches:
        parts = [m.ravel() / math.sqrt(m.size) for m in stack.feature_maps(patch)]
        vecs.append(np.concatenate(parts))
    v = np.stack(vecs)
    sq = np.sum(v * v, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (v @ v.T)
    return np.maximum(d, 0.0)


def _best_medoids_exact(dist: np.ndarray, k: int):
    best_cost, best = math.inf, None
    for medoids in itertools.combinations(range(len(dist)), k):
        cost = dist[list(medoids)].min(axis=0).sum()
        if cost < best_cost:
            best_cost, best = cost, medoids
    return list(best)


def _best_medoids_swap(dist: np.ndarray, k: int):
    """Greedy build followed by single-swap descent (PAM style)."""
    n = len(dist)
    medoids = [int(np.argmin(dist.sum(axis=1)))]
    while len(medoids) < k:
        current = dist[medoids].min(axis=0)
        gains = np.maximum(current[None, :] - dist, 0.0).sum(axis=1)
        gains[medoids] = -1.0
        medoids.append(int(np.argmax(gains)))
    medoids = sorted(medoids)
    cost = dist[medoids].min(axis=0).sum()
    improved = True
    while improved:
        improved = False
        for mi in range(k):
            for cand in range(n):
                if cand in medoids:
                    continue
                trial = sorted(medoids[:mi] + [cand] + medoids[mi + 1 :])
                trial_cost = dist[trial].min(axis=0).sum()
                if trial_cost < cost - 1e-12:
                    medoids, cost, improved = trial, trial_cost, True
    return medoids


def cluster_representatives(dataset, stack: FeatureStack, k: int, rng=None,
                            exact_limit: int = 20000) -> Dataset:
    """Condense patches to `k` by k-medoids under the perceptual distance.

    Clusters are found by exhaustive medoid search when the number of
    candidate medoid sets is small (<= exact_limit), falling back to a
    build-and-swap descent otherwise; the returned dataset holds one
    randomly chosen member of each cluster, in medoid order.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    patches = dataset.patches if isinstance(dataset, Dataset) else np.asarray(dataset)
    n = len(patches)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    dist = _pairwise_feature_distances(patches, stack)
    if math.comb(n, k) <= exact_limit:
        medoids = _best_medoids_exact(dist, k)
    else:
        medoids = _best_medoids_swap(dist, k)
    assignment = np.argmin(dist[medoids], axis=0)
    chosen = []
    for ci in range(k):
        members = np.flatnonzero(assignment == ci)
        chosen.append(patches[members[int(rng.integers(len(members)))]])
    return Dataset(np.stack(chosen))


# --- archive format ---------------------------------------------------------
#
# Binary layout (integers little-endian):
#   magic "PBDS" | u32 version | u32 n | u32 h | u32 w
#   n*h*w*3 float32 patch planes, patch-major

def save_dataset(dataset: Dataset, path) -> None:
    n, h, w, _ = dataset.patches.shape
    buf = io.BytesIO()
    buf.write(ARCHIVE_MAGIC)
    buf.write(struct.pack("<IIII", ARCHIVE_VERSION, n, h, w))
    buf.write(np.ascontiguousarray(dataset.patches, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != ARCHIVE_MAGIC:
            raise DatasetFormatError(f"bad magic {magic!r}, expected {ARCHIVE_MAGIC!r}")
        header = fh.read(16)
        if len(header) != 16:
            raise DatasetFormatError("truncated dataset header")
        version, n, h, w = struct.unpack("<IIII", header)
        if version != ARCHIVE_VERSION:
            raise DatasetFormatError(
                f"unsupported dataset version {version} (expected {ARCHIVE_VERSION})"
            )
        count = n * h * w * 3
        raw = fh.read(4 * count)
        if len(raw) != 4 * count:
            raise DatasetFormatError(
                f"truncated dataset: expected {4 * count} data bytes, got {len(raw)}"
            )
        if fh.read(1):
            raise DatasetFormatError("dataset has trailing bytes")
    patches = np.frombuffer(raw, dtype="<f4").reshape(n, h, w, 3).astype(np.float64)
    return Dataset(patches)
