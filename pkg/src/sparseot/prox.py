"""Sparsity-inducing regularizers: values, gradients and proximal operators.

Every function acts on the last axis of its input, so a batch of vectors of
shape ``(..., d)`` is processed in one call.
"""
from __future__ import annotations

import numpy as np


def _safe_sign(z: np.ndarray) -> np.ndarray:
    # np.sign already maps 0 -> 0, which selects the minimal-norm subgradient.
    return np.sign(z)


# ---------------------------------------------------------------------------
# l1
# ---------------------------------------------------------------------------


def l1_value(z: np.ndarray, gamma: float) -> np.ndarray:
    return gamma * np.sum(np.abs(z), axis=-1)


def l1_grad(z: np.ndarray, gamma: float) -> np.ndarray:
    return gamma * _safe_sign(z)


def soft_threshold(w: np.ndarray, gamma: float) -> np.ndarray:
    """Soft-thresholding, ``(1 - gamma / |w|)_+ * w``, with ``0 -> 0``."""
    w = np.asarray(w, dtype=float)
    return np.sign(w) * np.maximum(np.abs(w) - gamma, 0.0)


# ---------------------------------------------------------------------------
# STVS (soft-thresholding with vanishing shrinkage)
# ---------------------------------------------------------------------------


def stvs_value(z: np.ndarray, gamma: float) -> np.ndarray:
    """Penalty whose proximal operator is :func:`stvs_threshold`.

    Per coordinate, ``gamma**2 * (s + 1/2 - exp(-2 s) / 2)`` with
    ``s = arcsinh(|z| / (2 gamma))``. The absolute value keeps the penalty
    even and nonnegative, vanishing only at 0.
    """
    z = np.asarray(z, dtype=float)
    if gamma == 0:
        return np.zeros(z.shape[:-1])
    # with t = u + sqrt(u^2 + 1), u = |z| / (2 gamma): s = log t and exp(-2 s) = 1 / t^2
    u = np.abs(z) / (2.0 * gamma)
    t = u + np.sqrt(u * u + 1.0)
    return gamma**2 * np.sum(np.log(t) + 0.5 - 0.5 / (t * t), axis=-1)


def stvs_grad(z: np.ndarray, gamma: float) -> np.ndarray:
    """Element-wise derivative of :func:`stvs_value`.

    Closed form ``sign(z) * (sqrt(z**2 + 4 gamma**2) - |z|) / 2``; at 0 the
    sign convention returns 0. The subtraction is rewritten to avoid
    cancellation for large ``|z|``.
    """
    z = np.asarray(z, dtype=float)
    if gamma == 0:
        return np.zeros_like(z)
    a = np.abs(z)
    g2 = 2.0 * gamma**2
    return _safe_sign(z) * g2 / (np.sqrt(a * a + 4.0 * gamma**2) + a)


def stvs_threshold(w: np.ndarray, gamma: float) -> np.ndarray:
    """STVS proximal map ``(1 - gamma**2 / w**2)_+ * w``, with ``0 -> 0``."""
    w = np.asarray(w, dtype=float)
    out = np.zeros_like(w)
    big = np.abs(w) > gamma
    wb = w[big]
    out[big] = wb - gamma**2 / wb
    return out


# ---------------------------------------------------------------------------
# k-support (k-overlap) norm
# ---------------------------------------------------------------------------


def _check_k(k: int, d: int) -> None:
    if not (1 <= k <= d):
        raise ValueError(f"k must satisfy 1 <= k <= d, got k={k}, d={d}")


def _ksupport_split(z: np.ndarray, k: int):
    """Locate the l2/l1 split of the sorted magnitudes of ``z``.

    Returns ``(order, zs, r, tail)`` where ``zs`` holds ``|z|`` sorted in
    decreasing order along the last axis (``order`` the stable sort
    permutation), ``r`` the split index in ``{0..k-1}`` and ``tail`` the sum
    ``zs[k-r-1:]`` (0-based), i.e. the l1 block.
    """
    a = np.abs(z)
    d = a.shape[-1]
    _check_k(k, d)
    order = np.argsort(-a, axis=-1, kind="stable")
    zs = np.take_along_axis(a, order, axis=-1)

    # suffix[..., i] = sum_{t >= i} zs[..., t]  (0-based), suffix[..., d] = 0
    suffix = np.concatenate(
        [np.cumsum(zs[..., ::-1], axis=-1)[..., ::-1], np.zeros(zs.shape[:-1] + (1,))],
        axis=-1,
    )
    r = np.arange(k)
    lo_idx = k - r - 1  # 0-based position of the first l1-block entry
    tails = suffix[..., lo_idx]  # (..., k)
    avg = tails / (r + 1)
    lower = zs[..., lo_idx]
    upper = np.where(
        lo_idx > 0,
        np.take(zs, np.maximum(lo_idx - 1, 0), axis=-1),
        np.inf,
    )
    # zs[lo] <= avg < zs[lo - 1]; pick the first r satisfying it, or the
    # least-violating r when rounding breaks both.
    violation = np.maximum(lower - avg, 0.0) + np.maximum(avg - upper, 0.0)
    exact = (lower <= avg) & (avg < upper)
    score = np.where(exact, -1.0, violation)
    r_sel = np.argmin(score, axis=-1)
    tail = np.take_along_axis(tails, r_sel[..., None], axis=-1)[..., 0]
    return order, zs, r_sel, tail


def ksupport_norm_sq(z: np.ndarray, k: int) -> np.ndarray:
    """Squared k-support norm along the last axis."""
    z = np.asarray(z, dtype=float)
    order, zs, r, tail = _ksupport_split(z, k)
    head_len = k - r - 1  # number of entries in the l2 block
    pos = np.arange(zs.shape[-1])
    head = np.sum(np.where(pos < head_len[..., None], zs * zs, 0.0), axis=-1)
    return head + tail * tail / (r + 1)


def ksupport_norm(z: np.ndarray, k: int) -> np.ndarray:
    """k-support norm ``||z||_(k)``; reduces to l1 for ``k=1`` and l2 for ``k=d``."""
    return np.sqrt(ksupport_norm_sq(z, k))


def ksupport_sq_grad(z: np.ndarray, k: int) -> np.ndarray:
    """Gradient of ``0.5 * ||z||_(k)^2``.

    Entries in the l2 block keep their value; entries in the l1 block get
    ``sign(z_i) * tail / (r + 1)``.
    """
    z = np.asarray(z, dtype=float)
    order, zs, r, tail = _ksupport_split(z, k)
    head_len = k - r - 1
    pos = np.arange(zs.shape[-1])
    in_head_sorted = pos < head_len[..., None]
    in_head = np.empty_like(in_head_sorted)
    np.put_along_axis(in_head, order, in_head_sorted, axis=-1)
    level = (tail / (r + 1))[..., None]
    return np.where(in_head, z, _safe_sign(z) * level)


def ksupport_prox(w: np.ndarray, k: int, gamma: float) -> np.ndarray:
    """Proximal operator of ``(gamma / 2) * ||.||_(k)^2``.

    Solves ``argmin_z 0.5 ||z - w||^2 + (gamma / 2) ||z||_(k)^2`` by searching
    the pair ``(r, l)`` that splits the sorted magnitudes into a shrunk head,
    a flattened middle block and a zeroed tail. All candidate pairs are
    scored at once; the exact pair has zero violation of the ordering
    constraints.
    """
    w = np.asarray(w, dtype=float)
    d = w.shape[-1]
    _check_k(k, d)
    if gamma == 0:
        return w.copy()
    beta = 1.0 / gamma
    a = np.abs(w)
    order = np.argsort(-a, axis=-1, kind="stable")
    zs = np.take_along_axis(a, order, axis=-1)
    batch = zs.shape[:-1]

    # 1-based padded array: zp[0] = +inf, zp[1..d] = zs, zp[d+1] = -inf
    zp = np.concatenate(
        [np.full(batch + (1,), np.inf), zs, np.full(batch + (1,), -np.inf)], axis=-1
    )
    prefix = np.concatenate([np.zeros(batch + (1,)), np.cumsum(zs, axis=-1)], axis=-1)

    r = np.arange(k)[:, None]  # (k, 1)
    ell = np.arange(k, d + 1)[None, :]  # (1, d-k+1)
    first = k - r  # 1-based start of the middle block
    T = prefix[..., ell] - prefix[..., first - 1]  # (..., k, L)
    denom = ell - k + (beta + 1.0) * r + beta + 1.0
    t = T / denom

    upper_a = zp[..., first - 1] / (beta + 1.0)
    lower_a = zp[..., first] / (beta + 1.0)
    upper_b = zp[..., ell]
    lower_b = zp[..., ell + 1]
    viol = (
        np.maximum(t - upper_a, 0.0)
        + np.maximum(lower_a - t, 0.0)
        + np.maximum(t - upper_b, 0.0)
        + np.maximum(lower_b - t, 0.0)
    )
    viol = np.where(np.isnan(viol), np.inf, viol)
    flat = viol.reshape(batch + (-1,))
    best = np.argmin(flat, axis=-1)
    r_sel = best // ell.shape[-1]
    l_sel = best % ell.shape[-1] + k
    t_sel = np.take_along_axis(t.reshape(batch + (-1,)), best[..., None], axis=-1)

    pos = np.arange(1, d + 1)  # 1-based sorted positions
    head = pos < (k - r_sel)[..., None]
    middle = (~head) & (pos <= l_sel[..., None])
    q_sorted = np.where(
        head, zs * (beta / (beta + 1.0)), np.where(middle, zs - t_sel, 0.0)
    )
    q_sorted = np.maximum(q_sorted, 0.0)
    q = np.empty_like(q_sorted)
    np.put_along_axis(q, order, q_sorted, axis=-1)
    return np.sign(w) * q
