"""Dense kernels: products, norms, Householder QR, column-pivoted QR and a
one-sided Jacobi singular value oracle.

Matrices are plain 2-D ``float64`` numpy arrays.  Functions never mutate
their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ShapeError(ValueError):
    pass


class ConfigError(ValueError):
    """Invalid parameters for an algorithm or generator."""


class ConvergenceError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class PivotedQR:
    """Result of ``qr_unpivoted`` / ``qr_column_pivoted``.

    ``a[:, perm] == q @ r`` up to rounding.
    """

    q: np.ndarray
    r: np.ndarray
    perm: np.ndarray
    pivoted: bool

    @property
    def r_values(self) -> np.ndarray:
        return np.abs(np.diag(self.r))


def as_matrix(a) -> np.ndarray:
    """Validate ``a`` as a 2-D float64 matrix.

    ndarray subclasses pass through untouched so wrappers (e.g. access
    counters in the tests) survive.
    """
    if isinstance(a, np.ndarray) and a.dtype == np.float64 and a.ndim == 2:
        return a
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def frobenius_norm(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    return float(np.sqrt(np.sum(a * a)))


def _householder(x: np.ndarray):
    """Reflector ``I - tau v v^T`` (``v[0] = 1``) mapping ``x`` to ``beta e_1``."""
    xmax = np.max(np.abs(x))
    if xmax == 0.0:
        return None, 0.0, 0.0
    xs = x / xmax
    beta = -np.copysign(xmax * np.sqrt(xs @ xs), x[0])
    v = x / (x[0] - beta)
    v[0] = 1.0
    tau = (beta - x[0]) / beta
    return v, tau, beta


def _accumulate_q(m: int, r: int, reflectors) -> np.ndarray:
    q = np.eye(m, r)
    for j in range(len(reflectors) - 1, -1, -1):
        v, tau = reflectors[j]
        if v is None:
            continue
        blk = q[j:, j:]
        blk -= tau * np.outer(v, v @ blk)
    return q


def _fix_signs(q: np.ndarray, r: np.ndarray) -> None:
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    r *= s[:, None]
    q *= s[None, :]


def qr_unpivoted(a) -> PivotedQR:
    """Thin Householder QR of a tall matrix; ``diag(r) >= 0``."""
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        raise ShapeError(f"thin QR needs rows >= cols, got {a.shape}")
    w = np.array(a, dtype=np.float64)
    reflectors = []
    for j in range(n):
        v, tau, alpha = _householder(w[j:, j])
        reflectors.append((v, tau))
        if v is None:
            continue
        if j + 1 < n:
            blk = w[j:, j + 1:]
            blk -= tau * np.outer(v, v @ blk)
        w[j, j] = alpha
        w[j + 1:, j] = 0.0
    r = np.triu(w[:n, :])
    q = _accumulate_q(m, n, reflectors)
    _fix_signs(q, r)
    return PivotedQR(q=q, r=r, perm=np.arange(n), pivoted=False)


# relative threshold on a downdated squared column norm before it is recomputed
_DOWNDATE_TOL = 1e-8


def qr_column_pivoted(a) -> PivotedQR:
    """Householder QR with greedy column pivoting, ``a[:, perm] = q r``.

    At each step the remaining column of largest residual norm is moved to
    the front (ties go to the lowest index).  Works for any shape: ``q`` is
    ``m x min(m, n)`` and ``r`` is ``min(m, n) x n``.
    """
    a = as_matrix(a)
    m, n = a.shape
    steps = min(m, n)
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    scale = scale if scale > 0 else 1.0
    # squared column norms below would underflow for tiny entries
    w = np.array(a, dtype=np.float64) / scale
    perm = np.arange(n)
    norms2 = np.einsum("ij,ij->j", w, w)
    ref = norms2.copy()
    reflectors = []
    for j in range(steps):
        piv = j + int(np.argmax(norms2[j:]))
        if piv != j:
            w[:, [j, piv]] = w[:, [piv, j]]
            perm[[j, piv]] = perm[[piv, j]]
            norms2[[j, piv]] = norms2[[piv, j]]
            ref[[j, piv]] = ref[[piv, j]]
        v, tau, alpha = _householder(w[j:, j])
        reflectors.append((v, tau))
        if v is not None:
            if j + 1 < n:
                blk = w[j:, j + 1:]
                blk -= tau * np.outer(v, v @ blk)
            w[j, j] = alpha
            w[j + 1:, j] = 0.0
        if j + 1 < n:
            norms2[j + 1:] -= w[j, j + 1:] ** 2
            bad = np.nonzero(norms2[j + 1:] <= _DOWNDATE_TOL * ref[j + 1:])[0] + j + 1
            if bad.size:
                tail = w[j + 1:, bad]
                norms2[bad] = np.einsum("ij,ij->j", tail, tail)
                ref[bad] = norms2[bad]
    r = np.triu(w[:steps, :]) * scale
    q = _accumulate_q(m, steps, reflectors)
    _fix_signs(q, r)
    return PivotedQR(q=q, r=r, perm=perm, pivoted=True)


def singular_values(a, *, tol: float = 1e-14, max_sweeps: int = 30) -> np.ndarray:
    """All ``min(m, n)`` singular values, non-increasing.

    One-sided (Hestenes) Jacobi.  The input is first reduced by pivoted QR
    and Jacobi runs on the transpose of the triangular factor.  Columns are
    kept in round-robin tournament order: column ``i`` is paired with column
    ``cols - 1 - i``, so each round rotates ``cols / 2`` disjoint pairs as
    array slices, then the tournament advances by cycling columns ``1:``.
    A sweep is ``cols - 1`` rounds; convergence means no pair has
    ``|w_p . w_q| > tol * |w_p| |w_q|``.
    """
    a = np.asarray(as_matrix(a), dtype=np.float64)
    m, n = a.shape
    if m < n:
        a = a.T
        m, n = n, m
    if n == 1:
        return np.array([np.linalg.norm(a[:, 0])])
    amax = float(np.max(np.abs(a)))
    if amax == 0.0:
        return np.zeros(n)
    a = a / amax
    # rows of x are the Jacobi columns, stored contiguously
    x = np.array(qr_column_pivoted(a).r)
    if n % 2:
        x = np.vstack([x, np.zeros((1, n))])
    cols = x.shape[0]
    h = cols // 2
    buf1, buf2 = np.empty((h, n)), np.empty((h, n))

    off = np.inf
    for _ in range(max_sweeps):
        off = 0.0
        for _ in range(cols - 1):
            xp, xq = x[:h], x[: h - 1 : -1] if h > 1 else x[-1:]
            alpha = np.einsum("ij,ij->i", xp, xp)
            beta = np.einsum("ij,ij->i", xq, xq)
            gamma = np.einsum("ij,ij->i", xp, xq)
            # product of roots: alpha * beta underflows for tiny trailing rows
            scale = np.sqrt(alpha) * np.sqrt(beta)
            act = (np.abs(gamma) > tol * scale) & (scale > 0.0)
            if act.any():
                off = max(off, float(np.max(np.abs(gamma[act]) / scale[act])))
                idx = np.nonzero(act)[0]
                g, al, be = gamma[idx], alpha[idx], beta[idx]
                with np.errstate(over="ignore"):
                    zeta = (be - al) / (2.0 * g)
                t = np.copysign(1.0, zeta) / (np.abs(zeta) + np.hypot(1.0, zeta))
                c = (1.0 / np.sqrt(1.0 + t * t))[:, None]
                s = c * t[:, None]
                if idx.size == h:
                    buf1[...] = xp
                    np.multiply(xp, c, out=xp)
                    np.multiply(xq, s, out=buf2)
                    xp -= buf2
                    np.multiply(xq, c, out=xq)
                    np.multiply(buf1, s, out=buf2)
                    xq += buf2
                else:
                    iq = cols - 1 - idx
                    vp, vq = x[idx], x[iq]
                    x[idx] = c * vp - s * vq
                    x[iq] = s * vp + c * vq
            x[1:] = np.roll(x[1:], 1, axis=0)
        if off == 0.0:
            sv = np.sqrt(np.einsum("ij,ij->i", x, x))
            return np.sort(sv)[::-1][:n] * amax
    raise ConvergenceError(
        f"Jacobi SVD did not converge in {max_sweeps} sweeps "
        f"(largest relative off-diagonal Gram entry {off:.3e})"
    )


def spectral_norm(a) -> float:
    return float(singular_values(a)[0])


def write_csv(path, a) -> None:
    np.savetxt(Path(path), as_matrix(a), fmt="%.17g", delimiter=",")


def read_csv(path) -> np.ndarray:
    return np.loadtxt(Path(path), delimiter=",", ndmin=2, dtype=np.float64)
