"""Translation-invariant elastic costs ``h(z) = 0.5 ||z||^2 + tau(z)``."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from sparseot import prox

# Number of float64 entries in one (rows, cols, d) work block, sized to stay in cache.
_BLOCK_ENTRIES = 131_072


class CostFamily(str, enum.Enum):
    SQEUCLIDEAN = "sqeuclid"
    L1 = "l1"
    STVS = "stvs"
    KSUPPORT = "ksup"


@dataclass(frozen=True)
class CostModel:
    """An elastic-type cost.

    ``gamma`` is ignored by the squared-Euclidean family; ``k`` is only used
    (and required) by the k-support family, whose regularizer is
    ``(gamma / 2) * ||z||_(k)^2``.
    """

    family: CostFamily = CostFamily.SQEUCLIDEAN
    gamma: float = 0.0
    k: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "family", CostFamily(self.family))
        gamma = float(self.gamma)
        if not np.isfinite(gamma) or gamma < 0:
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")
        object.__setattr__(self, "gamma", gamma)
        if self.family is CostFamily.KSUPPORT:
            if self.k is None or int(self.k) < 1:
                raise ValueError("k-support cost requires an integer k >= 1")
            object.__setattr__(self, "k", int(self.k))

    @classmethod
    def sqeuclidean(cls) -> "CostModel":
        return cls(CostFamily.SQEUCLIDEAN)

    @classmethod
    def elastic_l1(cls, gamma: float) -> "CostModel":
        return cls(CostFamily.L1, gamma)

    @classmethod
    def elastic_stvs(cls, gamma: float) -> "CostModel":
        return cls(CostFamily.STVS, gamma)

    @classmethod
    def elastic_ksupport(cls, gamma: float, k: int) -> "CostModel":
        return cls(CostFamily.KSUPPORT, gamma, k)

    @property
    def is_trivial(self) -> bool:
        """True when the regularizer vanishes identically."""
        return self.family is CostFamily.SQEUCLIDEAN or self.gamma == 0.0

    def to_dict(self) -> dict:
        return {"family": self.family.value, "gamma": self.gamma, "k": self.k}

    @classmethod
    def from_dict(cls, data: dict) -> "CostModel":
        return cls(CostFamily(data["family"]), data.get("gamma", 0.0), data.get("k"))

    def label(self) -> str:
        if self.family is CostFamily.SQEUCLIDEAN:
            return "sqeuclid"
        if self.family is CostFamily.KSUPPORT:
            return f"ksup(k={self.k},gamma={self.gamma:g})"
        return f"{self.family.value}(gamma={self.gamma:g})"

    # -- regularizer -------------------------------------------------------

    def _check(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.ndim == 0:
            raise ValueError("expected a vector, got a scalar")
        if not np.all(np.isfinite(z)):
            raise ValueError("input contains non-finite values")
        if self.family is CostFamily.KSUPPORT and self.k > z.shape[-1]:
            raise ValueError(f"k={self.k} exceeds dimension d={z.shape[-1]}")
        return z

    def tau(self, z) -> np.ndarray:
        return self._tau(self._check(z))

    def _tau(self, z: np.ndarray) -> np.ndarray:
        if self.is_trivial:
            return np.zeros(z.shape[:-1])
        if self.family is CostFamily.L1:
            return prox.l1_value(z, self.gamma)
        if self.family is CostFamily.STVS:
            return prox.stvs_value(z, self.gamma)
        return 0.5 * self.gamma * prox.ksupport_norm_sq(z, self.k)

    def grad_tau(self, z) -> np.ndarray:
        """Gradient of the regularizer, with ``sign(0) = 0`` at kinks."""
        return self._grad_tau(self._check(z))

    def _grad_tau(self, z: np.ndarray) -> np.ndarray:
        if self.is_trivial:
            return np.zeros_like(z)
        if self.family is CostFamily.L1:
            return prox.l1_grad(z, self.gamma)
        if self.family is CostFamily.STVS:
            return prox.stvs_grad(z, self.gamma)
        return self.gamma * prox.ksupport_sq_grad(z, self.k)

    def prox_tau(self, w) -> np.ndarray:
        """``argmin_z 0.5 ||z - w||^2 + tau(z)``; also the gradient of ``h*``."""
        w = self._check(w)
        if self.is_trivial:
            return w.copy()
        if self.family is CostFamily.L1:
            return prox.soft_threshold(w, self.gamma)
        if self.family is CostFamily.STVS:
            return prox.stvs_threshold(w, self.gamma)
        return prox.ksupport_prox(w, self.k, self.gamma)

    # -- full cost ---------------------------------------------------------

    def h(self, z) -> np.ndarray:
        return self._h(self._check(z))

    def _h(self, z: np.ndarray) -> np.ndarray:
        # unchecked; callers guarantee finite input of matching dimension
        return 0.5 * np.einsum("...i,...i->...", z, z) + self._tau(z)

    def grad_h(self, z) -> np.ndarray:
        z = self._check(z)
        return z + self.grad_tau(z)

    def grad_h_conjugate(self, w) -> np.ndarray:
        return self.prox_tau(w)


def h_value(cost: CostModel, z) -> float:
    return float(cost.h(z))


def grad_tau(cost: CostModel, z) -> np.ndarray:
    return cost.grad_tau(z)


def prox_tau(cost: CostModel, w) -> np.ndarray:
    return cost.prox_tau(w)


def k_support_norm(z, k: int) -> float:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise ValueError("expected a 1-d vector")
    if not np.all(np.isfinite(z)):
        raise ValueError("input contains non-finite values")
    return float(prox.ksupport_norm(z, int(k)))


def _row_block(n_cols: int, d: int) -> int:
    return max(1, _BLOCK_ENTRIES // max(1, n_cols * d))


def cost_matrix(X, Y, cost: CostModel) -> np.ndarray:
    """Matrix ``C[i, j] = h(x_i - y_j)``.

    Accepts arrays or :class:`~sparseot.sinkhorn.PointCloud` objects. Rows are
    processed in blocks; every entry is computed independently, so the
    blocking does not change the result.
    """
    X = getattr(X, "points", X)
    Y = getattr(Y, "points", Y)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    n, d = X.shape
    m = Y.shape[0]
    if cost.family is CostFamily.KSUPPORT and cost.k > d:
        raise ValueError(f"k={cost.k} exceeds dimension d={d}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("point clouds contain non-finite values")

    C = np.empty((n, m))
    step = _row_block(m, d)
    for start in range(0, n, step):
        diff = X[start:start + step, None, :] - Y[None, :, :]
        C[start:start + step] = cost._h(diff)
    return C
