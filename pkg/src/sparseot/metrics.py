"""Evaluation quantities for estimated transport maps."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

import numpy as np

from sparseot.costs import CostModel, cost_matrix
from sparseot.exceptions import NumericFailure, UndefinedMetricError
from sparseot.sinkhorn import PointCloud, _softmin_cols, _softmin_rows, solve_dual_matrix


@dataclass(frozen=True)
class MetricRow:
    nmse: float
    support_error: float
    sinkhorn_div: float
    rbo: float
    mean_sparsity: float


def nmse(true_images, est_images) -> float:
    """``1/(n d) * sum_i ||T*(x_i) - T(x_i)||^2``."""
    A = np.atleast_2d(np.asarray(true_images, dtype=float))
    B = np.atleast_2d(np.asarray(est_images, dtype=float))
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.mean((A - B) ** 2))


def support_error(displacements, s: Optional[int] = None, support=None) -> float:
    """Mean fraction of displacement energy outside the true support.

    The support is either the first ``s`` coordinates or an explicit boolean
    mask broadcastable to ``displacements``. Rows with zero displacement are
    left out of the average.
    """
    D = np.atleast_2d(np.asarray(displacements, dtype=float))
    n, d = D.shape
    if support is None:
        if s is None or not 0 <= int(s) <= d:
            raise ValueError(f"support size must satisfy 0 <= s <= {d}, got {s}")
        mask = np.zeros(d, dtype=bool)
        mask[: int(s)] = True
    else:
        mask = np.broadcast_to(np.asarray(support, dtype=bool), D.shape)
    energy = D * D
    total = energy.sum(axis=1)
    off = np.where(mask, 0.0, energy).sum(axis=1)
    keep = total > 0
    if not np.any(keep):
        raise UndefinedMetricError("support error is undefined: every displacement is zero")
    return float(np.mean(off[keep] / total[keep]))


def mean_sparsity(displacements, threshold: float = 1e-8) -> float:
    """Average fraction of coordinates with ``|displacement| <= threshold``."""
    D = np.atleast_2d(np.asarray(displacements, dtype=float))
    return float(np.mean(np.abs(D) <= threshold))


def _self_divergence(X: PointCloud, cost, epsilon, tolerance, max_iterations):
    # symmetric problem: averaged fixed-point updates converge much faster than
    # alternating ones, which oscillate between two near-solutions
    C = cost_matrix(X.points, X.points, cost)
    loga = np.log(X.weights)
    f = _softmin_rows(C, np.zeros(X.n), loga, epsilon)
    for _ in range(int(max_iterations)):
        f_next = 0.5 * (f + _softmin_rows(C, f, loga, epsilon))
        done = np.max(np.abs(f_next - f)) <= tolerance * epsilon
        f = f_next
        if done:
            break
    if not np.all(np.isfinite(f)):
        raise NumericFailure("non-finite symmetric potential")
    return 2.0 * float(_softmin_rows(C, f, loga, epsilon) @ X.weights)


def _raw_divergence(X: PointCloud, Y: PointCloud, cost, epsilon, tolerance, max_iterations):
    C = cost_matrix(X.points, Y.points, cost)
    pots = solve_dual_matrix(C, X.weights, Y.weights, epsilon, tolerance, max_iterations)
    f_ext = _softmin_rows(C, pots.g, np.log(Y.weights), epsilon)
    g_ext = _softmin_cols(C, pots.f, np.log(X.weights), epsilon)
    return float(f_ext @ X.weights + g_ext @ Y.weights)


def sinkhorn_divergence(
    X: PointCloud,
    Y: PointCloud,
    cost: CostModel,
    epsilon: float,
    debias: bool = True,
    tolerance: float = 1e-9,
    max_iterations: int = 10_000,
) -> float:
    """Dual-objective value between two clouds, optionally debiased.

    Raw mode averages the extended potentials over each cloud; debiased mode
    returns ``S(X, Y) - S(X, X) / 2 - S(Y, Y) / 2``.
    """
    if X.d != Y.d:
        raise ValueError(f"dimension mismatch: {X.d} vs {Y.d}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    args = (cost, float(epsilon), tolerance, max_iterations)
    sxy = _raw_divergence(X, Y, *args)
    if not debias:
        return sxy
    return sxy - 0.5 * _self_divergence(X, *args) - 0.5 * _self_divergence(Y, *args)


def rbo(ranking_a: Sequence[Hashable], ranking_b: Sequence[Hashable], p: float = 0.9) -> float:
    """Rank-biased overlap truncated at the common list length ``L``.

    ``(1 - p) * sum_{t=1..L} p^(t-1) * |A[:t] & B[:t]| / t``; identical lists
    score ``1 - p^L``.
    """
    a, b = list(ranking_a), list(ranking_b)
    if len(a) != len(b):
        raise ValueError(f"rankings must have equal length, got {len(a)} and {len(b)}")
    if len(set(a)) != len(a) or len(set(b)) != len(b):
        raise ValueError("rankings must not contain duplicate ids")
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    seen_a, seen_b = set(), set()
    overlap = 0
    total = 0.0
    for depth, (ia, ib) in enumerate(zip(a, b), start=1):
        if ia == ib:
            overlap += 1
        else:
            overlap += (ia in seen_b) + (ib in seen_a)
        seen_a.add(ia)
        seen_b.add(ib)
        total += p ** (depth - 1) * overlap / depth
    return (1.0 - p) * total
