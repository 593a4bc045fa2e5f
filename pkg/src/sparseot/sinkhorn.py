"""Log-domain Sinkhorn solver for the entropic dual problem.

The discrete dual solved here is

    max_{f, g}  <f, a> + <g, b> - eps * sum_ij a_i b_j exp((f_i + g_j - C_ij) / eps) + eps

whose maximizers satisfy ``f_i = -eps log sum_j b_j exp((g_j - C_ij) / eps)``
and symmetrically for ``g``. With uniform weights these fixed-point maps are
exactly the soft-min extensions used to evaluate potentials off the samples.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from sparseot.costs import CostModel, cost_matrix
from sparseot.exceptions import DegenerateEpsilonError, NumericFailure

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PointCloud:
    """``n`` points in ``R^d`` with probability weights (uniform by default)."""

    points: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise ValueError(f"points must be a non-empty (n, d) array, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite coordinates")
        n = pts.shape[0]
        if self.weights is None:
            w = np.full(n, 1.0 / n)
        else:
            w = np.asarray(self.weights, dtype=float).reshape(-1)
            if w.shape[0] != n:
                raise ValueError(f"expected {n} weights, got {w.shape[0]}")
            if np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite and strictly positive")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class SolveConfig:
    """Solver settings.

    When ``epsilon`` is None it is set to ``epsilon_fraction * mean(C)``.
    """

    epsilon: Optional[float] = None
    epsilon_fraction: float = 0.1
    tolerance: float = 1e-6
    max_iterations: int = 10_000

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 < self.epsilon_fraction <= 1:
            raise ValueError(f"epsilon_fraction must lie in (0, 1], got {self.epsilon_fraction}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if int(self.max_iterations) < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")

    def resolve_epsilon(self, C: np.ndarray) -> float:
        if self.epsilon is not None:
            return float(self.epsilon)
        return epsilon_from_cost(C, self.epsilon_fraction)


@dataclass(frozen=True)
class DualPotentials:
    f: np.ndarray
    g: np.ndarray
    epsilon: float
    iterations: int
    marginal_error: float
    tolerance: float = 1e-6
    objective_trace: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def converged(self) -> bool:
        return self.marginal_error <= self.tolerance


def epsilon_from_cost(C, fraction: float = 0.1) -> float:
    """``fraction * mean(C)``, the usual 10%-of-mean-cost rule."""
    C = np.asarray(C, dtype=float)
    if C.size == 0 or not np.all(np.isfinite(C)):
        raise ValueError("cost matrix must be finite and non-empty")
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    eps = fraction * float(np.mean(C))
    if not eps > 0:
        raise DegenerateEpsilonError(f"mean cost is {np.mean(C)!r}; cannot derive epsilon")
    return eps


def _softmin_rows(C: np.ndarray, g: np.ndarray, logb: np.ndarray, eps: float) -> np.ndarray:
    return -eps * logsumexp((g[None, :] - C) / eps + logb[None, :], axis=1)


def _softmin_cols(C: np.ndarray, f: np.ndarray, loga: np.ndarray, eps: float) -> np.ndarray:
    return -eps * logsumexp((f[:, None] - C) / eps + loga[:, None], axis=0)


def dual_objective(C, f, g, a, b, eps: float) -> float:
    """Value of the regularized dual at ``(f, g)``."""
    logP = (f[:, None] + g[None, :] - C) / eps + np.log(a)[:, None] + np.log(b)[None, :]
    mass = float(np.exp(logsumexp(logP)))
    return float(f @ a + g @ b - eps * mass + eps)


def marginal_errors(C, f, g, a, b, eps: float) -> tuple:
    """L-infinity violations of the row and column marginals."""
    logP = (f[:, None] + g[None, :] - C) / eps + np.log(a)[:, None] + np.log(b)[None, :]
    rows = np.exp(logsumexp(logP, axis=1))
    cols = np.exp(logsumexp(logP, axis=0))
    return float(np.max(np.abs(rows - a))), float(np.max(np.abs(cols - b)))


def solve_dual_matrix(
    C: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    epsilon: float,
    tolerance: float = 1e-6,
    max_iterations: int = 10_000,
    record_objective: bool = False,
) -> DualPotentials:
    """Alternating log-domain updates on a precomputed cost matrix."""
    C = np.asarray(C, dtype=float)
    n, m = C.shape
    loga, logb = np.log(a), np.log(b)
    eps = float(epsilon)
    f = np.zeros(n)
    g = np.zeros(m)
    trace = [] if record_objective else None

    f = _softmin_rows(C, g, logb, eps)
    err = np.inf
    it = 0
    for it in range(1, int(max_iterations) + 1):
        g = _softmin_cols(C, f, loga, eps)
        f_next = _softmin_rows(C, g, logb, eps)
        if not (np.all(np.isfinite(f_next)) and np.all(np.isfinite(g))):
            raise NumericFailure(f"non-finite potentials at iteration {it} (eps={eps:g})")
        # after the g-update columns are exact; rows deviate by exp((f - f_next)/eps)
        err = float(np.max(np.abs(a * np.expm1((f - f_next) / eps))))
        if record_objective:
            trace.append(dual_objective(C, f, g, a, b, eps))
        if err <= tolerance:
            break
        f = f_next

    shift = float(f @ a)
    f = f - shift
    g = g + shift
    row_err, col_err = marginal_errors(C, f, g, a, b, eps)
    marginal_error = max(row_err, col_err)
    if not np.isfinite(marginal_error):
        raise NumericFailure("marginal error is not finite")
    if marginal_error > tolerance:
        logger.warning(
            "Sinkhorn stopped after %d iterations with marginal error %.3e > %.1e",
            it, marginal_error, tolerance,
        )
    return DualPotentials(
        f=f,
        g=g,
        epsilon=eps,
        iterations=it,
        marginal_error=marginal_error,
        tolerance=float(tolerance),
        objective_trace=None if trace is None else np.asarray(trace),
    )


def solve_dual(
    X: PointCloud,
    Y: PointCloud,
    cost: CostModel,
    config: SolveConfig = SolveConfig(),
    C: Optional[np.ndarray] = None,
    record_objective: bool = False,
) -> DualPotentials:
    """Discrete optimal dual potentials between two weighted clouds.

    Potentials are gauge-fixed so that ``<f, a> = 0``. Non-convergence is not
    an error: the returned ``marginal_error`` exceeds the tolerance and the
    caller decides.
    """
    if X.d != Y.d:
        raise ValueError(f"dimension mismatch: {X.d} vs {Y.d}")
    if C is None:
        C = cost_matrix(X.points, Y.points, cost)
    eps = config.resolve_epsilon(C)
    return solve_dual_matrix(
        C, X.weights, Y.weights, eps,
        tolerance=config.tolerance,
        max_iterations=config.max_iterations,
        record_objective=record_objective,
    )
