"""Entropic transport maps for elastic costs.

A fitted map extends the discrete dual potential on the target side to the
whole space with a soft-min,

    f_eps(x) = -eps * log sum_j b_j exp(-(h(x - y_j) - g_j) / eps),

differentiates it (a Gibbs-weighted average of ``grad h(x - y_j)``) and maps
``x`` to ``x - prox_tau(grad f_eps(x))``, using that ``grad h* = prox_tau``
for ``h = 0.5 ||.||^2 + tau``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp, softmax

from sparseot.costs import CostModel, _BLOCK_ENTRIES
from sparseot.sinkhorn import DualPotentials, PointCloud, SolveConfig, solve_dual

ACTIVE_THRESHOLD = 1e-8


class Direction(str, enum.Enum):
    FORWARD = "forward"
    REVERSE = "reverse"


@dataclass(frozen=True)
class GibbsWeights:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class DisplacementReport:
    input: np.ndarray
    output: np.ndarray
    displacement: np.ndarray
    active_set: np.ndarray
    sparsity: float

    @classmethod
    def from_points(cls, x, out, threshold: float = ACTIVE_THRESHOLD) -> "DisplacementReport":
        x = np.asarray(x, dtype=float)
        out = np.asarray(out, dtype=float)
        delta = out - x
        active = np.flatnonzero(np.abs(delta) > threshold)
        return cls(x, out, delta, active, 1.0 - active.size / x.size)


@dataclass(frozen=True)
class FittedMap:
    """Entropic map towards ``target`` under ``cost``.

    ``direction`` records which potential drives the map: the forward map
    (source -> target) uses ``g`` and the reverse map uses ``f`` with the
    source cloud as its target. The reverse map relies on ``h`` being even,
    which holds for every supported cost family.
    """

    cost: CostModel
    target: PointCloud
    potentials: DualPotentials
    direction: Direction = Direction.FORWARD

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        if self.potential.shape[0] != self.target.n:
            raise ValueError(
                f"potential has {self.potential.shape[0]} entries for {self.target.n} target points"
            )

    @property
    def epsilon(self) -> float:
        return self.potentials.epsilon

    @property
    def potential(self) -> np.ndarray:
        if self.direction is Direction.FORWARD:
            return self.potentials.g
        return self.potentials.f

    @property
    def d(self) -> int:
        return self.target.d

    # -- batched core ------------------------------------------------------

    def _prepare(self, x) -> tuple:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        Q = np.atleast_2d(x)
        if Q.shape[-1] != self.d:
            raise ValueError(f"query dimension {Q.shape[-1]} != map dimension {self.d}")
        if not np.all(np.isfinite(Q)):
            raise ValueError("query contains non-finite values")
        return Q, single

    def _evaluate(self, Q: np.ndarray, want_grad: bool):
        """Potential, Gibbs weights and (optionally) gradient at each row of Q."""
        Y = self.target.points
        logb = np.log(self.target.weights)
        pot = self.potential
        eps = self.epsilon
        q, d = Q.shape
        m = Y.shape[0]
        values = np.empty(q)
        probs = np.empty((q, m))
        grads = np.empty((q, d)) if want_grad else None
        step = max(1, _BLOCK_ENTRIES // max(1, m * d))
        for start in range(0, q, step):
            stop = min(q, start + step)
            diff = Q[start:stop, None, :] - Y[None, :, :]
            H = self.cost._h(diff)
            logits = -(H - pot[None, :]) / eps + logb[None, :]
            values[start:stop] = -eps * logsumexp(logits, axis=1)
            p = softmax(logits, axis=1)
            probs[start:stop] = p
            if want_grad:
                g = Q[start:stop] - p @ Y
                if not self.cost.is_trivial:
                    g = g + np.einsum("qm,qmd->qd", p, self.cost._grad_tau(diff))
                grads[start:stop] = g
        return values, probs, grads

    def potential_at(self, x) -> np.ndarray:
        Q, single = self._prepare(x)
        v = self._evaluate(Q, False)[0]
        return v[0] if single else v

    def weights_at(self, x) -> np.ndarray:
        Q, single = self._prepare(x)
        p = self._evaluate(Q, False)[1]
        return p[0] if single else p

    def gradient_at(self, x) -> np.ndarray:
        Q, single = self._prepare(x)
        g = self._evaluate(Q, True)[2]
        return g[0] if single else g

    def __call__(self, x) -> np.ndarray:
        """Transported points ``x - prox_tau(grad f_eps(x))``."""
        Q, single = self._prepare(x)
        g = self._evaluate(Q, True)[2]
        out = Q - self.cost.prox_tau(g)
        return out[0] if single else out

    def reversed(self, source: PointCloud) -> "FittedMap":
        """Map in the opposite direction, onto ``source``."""
        flip = Direction.REVERSE if self.direction is Direction.FORWARD else Direction.FORWARD
        return FittedMap(self.cost, source, self.potentials, flip)


def fit_map(
    source: PointCloud,
    target: PointCloud,
    cost: CostModel,
    config: SolveConfig = SolveConfig(),
    C: Optional[np.ndarray] = None,
) -> FittedMap:
    """Solve the dual between ``source`` and ``target`` and wrap the forward map."""
    pots = solve_dual(source, target, cost, config, C=C)
    return FittedMap(cost, target, pots, Direction.FORWARD)


# -- single-point operations --------------------------------------------------


def extend_potential(fmap: FittedMap, x) -> float:
    return float(fmap.potential_at(np.asarray(x, dtype=float).reshape(-1)))


def gibbs_weights(fmap: FittedMap, x) -> GibbsWeights:
    p = fmap.weights_at(np.asarray(x, dtype=float).reshape(-1))
    return GibbsWeights(p / p.sum())


def grad_f_eps(fmap: FittedMap, x) -> np.ndarray:
    return fmap.gradient_at(np.asarray(x, dtype=float).reshape(-1))


def transport(fmap: FittedMap, x, threshold: float = ACTIVE_THRESHOLD) -> DisplacementReport:
    x = np.asarray(x, dtype=float).reshape(-1)
    return DisplacementReport.from_points(x, fmap(x), threshold)


def bregman_centroid(cost: CostModel, points, weights) -> np.ndarray:
    """Minimizer of ``sum_j p_j D_h(z, z_j)``, i.e. ``prox_tau(sum_j p_j grad h(z_j))``."""
    Z = np.atleast_2d(np.asarray(points, dtype=float))
    p = np.asarray(weights, dtype=float).reshape(-1)
    if p.shape[0] != Z.shape[0]:
        raise ValueError(f"{p.shape[0]} weights for {Z.shape[0]} points")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("weights must lie on the simplex")
    return cost.prox_tau(p @ cost.grad_h(Z))


def _check_step(lam: float) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"step size must lie in [0, 1], got {lam}")
    return lam


def bregman_descent_step(fmap: FittedMap, x, lam: float) -> np.ndarray:
    """One mirror step in the geometry of ``h``.

    ``prox_tau((1 - lam) grad h(x) + lam grad h(T(x)))`` where ``T`` is the
    entropic map; ``lam = 1`` lands on ``T(x)``. Works on a point or a batch.
    """
    lam = _check_step(lam)
    x = np.asarray(x, dtype=float)
    if lam == 0.0:
        return x.copy()
    cost = fmap.cost
    w = (1.0 - lam) * cost.grad_h(x) + lam * cost.grad_h(fmap(x))
    return cost.prox_tau(w)


def wc_gradient_step(fmap: FittedMap, x, lam: float) -> np.ndarray:
    """Plain step ``x - lam * grad f_eps(x)``."""
    x = np.asarray(x, dtype=float)
    return x - float(lam) * fmap.gradient_at(x)


def flow(fmap: FittedMap, x, lam: float, steps: int, mode: str = "bregman") -> np.ndarray:
    """Trajectory of ``steps`` descent steps; returns shape ``(steps + 1, ...)``."""
    if int(steps) < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if mode not in ("bregman", "plain"):
        raise ValueError(f"unknown flow mode {mode!r}")
    _check_step(lam)
    step = bregman_descent_step if mode == "bregman" else wc_gradient_step
    traj = [np.asarray(x, dtype=float)]
    for _ in range(int(steps)):
        traj.append(step(fmap, traj[-1], lam))
    return np.stack(traj)
