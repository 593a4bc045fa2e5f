"""Synthetic benchmarks with a known, feature-sparse ground-truth map.

Both benchmarks draw the source from the uniform measure on ``[0, 1]^d``.
The *constant* map exponentiates the first ``s`` coordinates of every point;
the *adaptive* map exponentiates whichever of the groups ``[0, s)`` and
``[s, 2s)`` has the larger squared norm (the second one on ties).

Randomness comes from numpy's PCG64 generator. The source, target and query
batches are separate streams keyed by ``(seed, 1)``, ``(seed, 2)`` and
``(seed, 3)``, so no two seeds ever share a batch.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from sparseot.sinkhorn import PointCloud

SOURCE_STREAM = 1
TARGET_STREAM = 2
QUERY_STREAM = 3


class Pattern(str, enum.Enum):
    CONSTANT = "constant"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    d: int
    s: int
    pattern: Pattern = Pattern.CONSTANT
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pattern", Pattern(self.pattern))
        if self.n < 1 or self.d < 1:
            raise ValueError(f"n and d must be >= 1, got n={self.n}, d={self.d}")
        if self.pattern is Pattern.CONSTANT and not 1 <= self.s <= self.d:
            raise ValueError(f"constant pattern needs 1 <= s <= d, got s={self.s}, d={self.d}")
        if self.pattern is Pattern.ADAPTIVE and not (self.s >= 1 and 2 * self.s <= self.d):
            raise ValueError(f"adaptive pattern needs 1 <= s <= d/2, got s={self.s}, d={self.d}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class Benchmark:
    spec: SyntheticSpec
    source: PointCloud
    target: PointCloud
    truth: Callable[[np.ndarray], np.ndarray]

    def support_mask(self, x) -> np.ndarray:
        """Boolean mask of the coordinates the true map moves at ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return true_support(x, self.spec.s, self.spec.pattern)


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream])))


def sample_uniform_cube(n: int, d: int, seed: int, stream: int = 0) -> PointCloud:
    if n < 1 or d < 1:
        raise ValueError(f"n and d must be >= 1, got n={n}, d={d}")
    return PointCloud(_rng(seed, stream).random((n, d)))


def apply_constant_map(x, s: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not 1 <= s <= x.shape[-1]:
        raise ValueError(f"need 1 <= s <= d, got s={s}, d={x.shape[-1]}")
    out = x.copy()
    out[..., :s] = np.exp(x[..., :s])
    return out


def _first_group_wins(x: np.ndarray, s: int) -> np.ndarray:
    n1 = np.sum(x[..., :s] ** 2, axis=-1)
    n2 = np.sum(x[..., s:2 * s] ** 2, axis=-1)
    return n1 > n2


def apply_adaptive_map(x, s: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not (s >= 1 and 2 * s <= x.shape[-1]):
        raise ValueError(f"need 1 <= s <= d/2, got s={s}, d={x.shape[-1]}")
    first = _first_group_wins(x, s)[..., None]
    out = x.copy()
    out[..., :s] = np.where(first, np.exp(x[..., :s]), x[..., :s])
    out[..., s:2 * s] = np.where(first, x[..., s:2 * s], np.exp(x[..., s:2 * s]))
    return out


def true_support(x, s: int, pattern: Pattern) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    mask = np.zeros(x.shape, dtype=bool)
    if Pattern(pattern) is Pattern.CONSTANT:
        mask[:, :s] = True
    else:
        first = _first_group_wins(x, s)
        mask[first, :s] = True
        mask[~first, s:2 * s] = True
    return mask


def ground_truth_map(spec: SyntheticSpec) -> Callable[[np.ndarray], np.ndarray]:
    if spec.pattern is Pattern.CONSTANT:
        return lambda x: apply_constant_map(x, spec.s)
    return lambda x: apply_adaptive_map(x, spec.s)


def make_benchmark(spec: SyntheticSpec) -> Benchmark:
    """Source samples and an independent pushed-forward target batch."""
    truth = ground_truth_map(spec)
    source = sample_uniform_cube(spec.n, spec.d, spec.seed, SOURCE_STREAM)
    fresh = sample_uniform_cube(spec.n, spec.d, spec.seed, TARGET_STREAM)
    target = PointCloud(truth(fresh.points))
    return Benchmark(spec, source, target, truth)


def query_points(spec: SyntheticSpec, n: int = None) -> np.ndarray:
    """Held-out draws from the source measure."""
    return sample_uniform_cube(n or spec.n, spec.d, spec.seed, QUERY_STREAM).points
