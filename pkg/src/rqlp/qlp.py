"""Pivoted QLP and its randomized variants.

Every algorithm returns a :class:`QlpFactorization` with ``A ~ Q L P^T``.
The randomized ones are built on a Gaussian range finder ``V`` and satisfy
``A - Q L P^T = A - V V^T A`` up to rounding.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .linalg import (
    ConfigError,
    ShapeError,
    as_matrix,
    frobenius_norm,
    qr_column_pivoted,
    qr_unpivoted,
    read_csv,
    write_csv,
)
from .rng import Rng, gaussian_matrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SketchConfig:
    """Target rank ``k``, oversampling ``p`` (sketch width ``k + p``),
    ERQLP inner iterations ``d``, BRQLP block size ``b``."""

    k: int
    p: int = 5
    d: int = 2
    b: int | None = None
    seed: int = 0

    @property
    def ell(self) -> int:
        return self.k + self.p

    def check(self, shape: tuple[int, int]) -> None:
        m, n = shape
        if self.k < 2 or self.p < 2:
            raise ConfigError(f"need k >= 2 and p >= 2, got k={self.k}, p={self.p}")
        if self.ell > min(m, n):
            raise ConfigError(
                f"sketch width k + p = {self.ell} exceeds min(m, n) = {min(m, n)}"
            )


@dataclass
class QlpFactorization:
    q: np.ndarray
    l_factor: np.ndarray
    p: np.ndarray
    algorithm: str
    config: SketchConfig | None = None
    # intermediates kept for the bound evaluators: basis V, reduced B, R factors
    info: dict = field(default_factory=dict, repr=False)

    @property
    def rank(self) -> int:
        return self.l_factor.shape[0]

    @property
    def l_values(self) -> np.ndarray:
        return np.abs(np.diag(self.l_factor))

    def product(self) -> np.ndarray:
        return self.q @ self.l_factor @ self.p.T

    def residual(self, a) -> float:
        return frobenius_norm(np.asarray(a) - self.product())

    def save(self, directory) -> Path:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "Q.csv", self.q)
        write_csv(out / "L.csv", self.l_factor)
        write_csv(out / "P.csv", self.p)
        meta = {
            "algorithm": self.algorithm,
            "config": None if self.config is None else asdict(self.config),
            "seed": None if self.config is None else self.config.seed,
        }
        (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
        return out

    @classmethod
    def load(cls, directory) -> "QlpFactorization":
        src = Path(directory)
        meta = json.loads((src / "meta.json").read_text())
        cfg = meta.get("config")
        return cls(
            q=read_csv(src / "Q.csv"),
            l_factor=read_csv(src / "L.csv"),
            p=read_csv(src / "P.csv"),
            algorithm=meta["algorithm"],
            config=None if cfg is None else SketchConfig(**cfg),
        )


def range_finder(a, ell: int, rng: Rng, omega: np.ndarray | None = None) -> np.ndarray:
    """Orthonormal ``m x ell`` basis for ``range(A @ Omega)``, Gaussian Omega."""
    a = as_matrix(a)
    m, n = a.shape
    if ell > min(m, n):
        raise ShapeError(f"ell = {ell} exceeds min{a.shape}")
    if omega is None:
        omega = gaussian_matrix(rng, n, ell)
    y = np.asarray(a @ omega)
    return qr_unpivoted(y).q


def error_indicator(a, b_reduced) -> float:
    """``||A - V V^T A||_F`` from ``B = V^T A`` alone: ``sqrt(||A||^2 - ||B||^2)``."""
    gap = frobenius_norm(a) ** 2 - frobenius_norm(b_reduced) ** 2
    return float(np.sqrt(max(gap, 0.0)))


def pivoted_qlp(a) -> QlpFactorization:
    """Stewart's pivoted QLP: CPQR of ``A``, then CPQR of ``R^T``.

    ``A P0 = Qh R`` and ``R^T P1 = Ph L^T`` give ``A = (Qh P1) L (P0 Ph)^T``.
    Any shape is accepted; the factorization has rank ``min(m, n)``.
    """
    a = as_matrix(a)
    first = qr_column_pivoted(a)
    second = qr_column_pivoted(first.r.T)
    q = first.q[:, second.perm]
    p = np.empty_like(second.q)
    p[first.perm] = second.q
    return QlpFactorization(
        q=q,
        l_factor=second.r.T.copy(),
        p=p,
        algorithm="qlp",
        info={"r_factors": [first.r, second.r]},
    )


def _sketch(a, cfg: SketchConfig):
    a = as_matrix(a)
    cfg.check(a.shape)
    v = range_finder(a, cfg.ell, Rng(cfg.seed))
    b = np.asarray(v.T @ a)
    return v, b


def rqlp(a, cfg: SketchConfig) -> QlpFactorization:
    """Randomized QLP: range finder, ``B = V^T A``, pivoted QLP of ``B``.

    ``A`` is touched by exactly two products, ``A @ Omega`` and ``V^T @ A``.
    """
    v, b = _sketch(a, cfg)
    inner = pivoted_qlp(b)
    return QlpFactorization(
        q=v @ inner.q,
        l_factor=inner.l_factor,
        p=inner.p,
        algorithm="rqlp",
        config=cfg,
        info={"basis": v, "reduced": b, "r_factors": inner.info["r_factors"]},
    )


def erqlp(a, cfg: SketchConfig) -> QlpFactorization:
    """Randomized QLP followed by ``cfg.d`` extra QLP iterations.

    After ``B Pi = Q0 R0`` the unpivoted step ``R_{i-1}^T = Q_i R_i`` is run
    ``d + 1`` times (the first step is the QLP step itself, so ``d = 0``
    would be RQLP without the second pivoting).  Unwinding the recursion,
    ``R_0 = Q_2 R_2 Q_1^T = ...``; even-numbered factors collect on the left,
    odd ones on the right.  For even ``d`` the last factor enters transposed
    and the middle matrix is lower triangular; for odd ``d`` it is the upper
    triangular ``R_{d+1}`` itself.
    """
    if cfg.d < 1:
        raise ConfigError("erqlp needs d >= 1 inner iterations; use rqlp for d = 0")
    v, b = _sketch(a, cfg)
    first = qr_column_pivoted(b)
    left, right = first.q, None
    r = first.r
    r_factors = [r]
    for i in range(1, cfg.d + 2):
        step = qr_unpivoted(r.T)
        r = step.r
        r_factors.append(r)
        if i == 1:
            right = step.q
        elif i % 2:
            right = right @ step.q
        else:
            left = left @ step.q
    p = np.empty_like(right)
    p[first.perm] = right
    middle = r.T if (cfg.d + 1) % 2 else r
    return QlpFactorization(
        q=v @ left,
        l_factor=middle,
        p=p,
        algorithm="erqlp",
        config=cfg,
        info={"basis": v, "reduced": b, "r_factors": r_factors},
    )


def brqlp(a, cfg: SketchConfig) -> QlpFactorization:
    """Block randomized QLP with ``h = ell / b`` blocks of ``b`` sketch columns.

    Each block is orthonormalised, reorthogonalised against the earlier
    blocks, deflated from a working copy of ``A`` and factored by pivoted
    QLP.  ``L`` is block diagonal.
    """
    a = as_matrix(a)
    cfg.check(a.shape)
    b = cfg.ell if cfg.b is None else cfg.b
    if b < 1 or cfg.ell % b:
        raise ConfigError(f"block size {b} does not divide k + p = {cfg.ell}")
    m, n = a.shape
    h = cfg.ell // b
    omega = gaussian_matrix(Rng(cfg.seed), n, cfg.ell)
    work = np.array(a, dtype=np.float64)  # A^(j); the input is never modified
    vs, qs, ps, ls, bs = [], [], [], [], []
    for j in range(h):
        y = np.asarray(a @ omega[:, j * b : (j + 1) * b])
        vj = qr_unpivoted(y).q
        if vs:
            prev = np.hstack(vs)
            # two passes: one loses orthogonality when Y_j is nearly inside span(prev)
            for _ in range(2):
                vj = qr_unpivoted(vj - prev @ (prev.T @ vj)).q
        bj = vj.T @ work
        work -= vj @ bj
        f = pivoted_qlp(bj)
        vs.append(vj)
        bs.append(bj)
        qs.append(vj @ f.q)
        ps.append(f.p)
        ls.append(f.l_factor)
    p = np.hstack(ps)
    drift = frobenius_norm(p.T @ p - np.eye(cfg.ell))
    if drift > 1e-6:
        log.warning("BRQLP: P columns from different blocks are not orthogonal (%.2e)", drift)
    l_factor = np.zeros((cfg.ell, cfg.ell))
    for j, lj in enumerate(ls):
        l_factor[j * b : (j + 1) * b, j * b : (j + 1) * b] = lj
    return QlpFactorization(
        q=np.hstack(qs),
        l_factor=l_factor,
        p=p,
        algorithm="brqlp",
        config=cfg,
        info={"basis": np.hstack(vs), "reduced": np.vstack(bs), "block_size": b},
    )


def truncate(f: QlpFactorization, k: int) -> QlpFactorization:
    """Keep the leading ``k`` columns of Q and P and the leading ``k x k`` of L."""
    if not 1 <= k <= f.rank:
        raise ConfigError(f"cannot truncate a rank-{f.rank} factorization to {k}")
    block = f.info.get("block_size")
    if block is not None and k % block:
        raise ConfigError(f"k = {k} is not on a block boundary (block size {block})")
    return QlpFactorization(
        q=f.q[:, :k],
        l_factor=f.l_factor[:k, :k],
        p=f.p[:, :k],
        algorithm=f.algorithm,
        config=f.config,
        info=dict(f.info),
    )


ALGORITHMS = {"qlp": None, "rqlp": rqlp, "erqlp": erqlp, "brqlp": brqlp}


def factorize(a, algorithm: str, cfg: SketchConfig | None = None) -> QlpFactorization:
    if algorithm == "qlp":
        return pivoted_qlp(a)
    try:
        fn = ALGORITHMS[algorithm]
    except KeyError:
        raise ConfigError(f"unknown algorithm {algorithm!r}") from None
    return fn(a, cfg)
