"""Experiment matrices: synthetic pds/eds spectra and the heat / phillips
discretisations from Hansen's Regularization Tools."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .linalg import ConfigError
from .rng import Rng, random_orthogonal


@dataclass(frozen=True)
class SpectrumSpec:
    n: int
    kind: str = "pds"
    t: int = 30
    s: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("pds", "eds"):
            raise ConfigError(f"unknown spectrum kind {self.kind!r}")
        if not 1 <= self.t <= self.n:
            raise ConfigError(f"need 1 <= t <= n, got t={self.t}, n={self.n}")
        if not self.s > 0:
            raise ConfigError(f"decay rate s must be positive, got {self.s}")


def spectrum(spec: SpectrumSpec) -> np.ndarray:
    """``t`` ones followed by a polynomial ((i+1)^-s) or exponential
    (2^(-i s)) tail, i = 1 .. n - t."""
    i = np.arange(1, spec.n - spec.t + 1, dtype=np.float64)
    if spec.kind == "pds":
        tail = (i + 1.0) ** -spec.s
    else:
        tail = 2.0 ** (-i * spec.s)
    return np.concatenate([np.ones(spec.t), tail])


def synthetic_matrix(spec: SpectrumSpec) -> np.ndarray:
    """``U diag(spectrum) V^T`` with Haar ``U`` then ``V`` drawn from ``spec.seed``."""
    rng = Rng(spec.seed)
    u = random_orthogonal(rng, spec.n)
    v = random_orthogonal(rng, spec.n)
    return (u * spectrum(spec)) @ v.T


def heat_matrix(n: int, kappa: float = 1.0) -> np.ndarray:
    """Inverse heat equation, Volterra kernel discretised by the midpoint rule.

    Lower-triangular Toeplitz; first column is
    ``h / (2 kappa sqrt(pi)) * t^-1.5 * exp(-1 / (4 kappa^2 t))`` at the
    midpoints ``t = h/2, 3h/2, ...`` with ``h = 1/n``.
    """
    if n < 2:
        raise ConfigError(f"heat needs n >= 2, got {n}")
    h = 1.0 / n
    t = (np.arange(n) + 0.5) * h
    c = h / (2.0 * kappa * np.sqrt(np.pi))
    d = c * t**-1.5 * np.exp(-1.0 / (4.0 * kappa**2 * t))
    return toeplitz(d, np.zeros(n))


def phillips_matrix(n: int) -> np.ndarray:
    """Phillips' test problem: Galerkin with box functions on [-6, 6] for the
    kernel ``1 + cos(pi x / 3)`` supported on ``|x| < 3``.  Symmetric banded
    Toeplitz; ``n`` must be a multiple of 4."""
    if n < 4 or n % 4:
        raise ConfigError(f"phillips needs n divisible by 4, got {n}")
    h = 12.0 / n
    n4 = n // 4
    c = np.cos(np.arange(-1, n4 + 1) * 4.0 * np.pi / n)
    r1 = np.zeros(n)
    r1[:n4] = h + 9.0 / (h * np.pi**2) * (2.0 * c[1 : n4 + 1] - c[:n4] - c[2 : n4 + 2])
    r1[n4] = h / 2.0 + 9.0 / (h * np.pi**2) * (np.cos(4.0 * np.pi / n) - 1.0)
    return toeplitz(r1)


FAMILIES = ("pds", "eds", "heat", "phillips")

# plateau length and decay rate used by the experiments
DEFAULT_SPECTRUM = {"pds": (30, 2.0), "eds": (30, 1.0 / 20.0)}


def make_matrix(family: str, n: int, *, t: int | None = None, s: float | None = None,
                seed: int = 0, kappa: float = 1.0) -> np.ndarray:
    if family in DEFAULT_SPECTRUM:
        t0, s0 = DEFAULT_SPECTRUM[family]
        return synthetic_matrix(SpectrumSpec(n, family, t0 if t is None else t,
                                             s0 if s is None else s, seed))
    if family == "heat":
        return heat_matrix(n, kappa)
    if family == "phillips":
        return phillips_matrix(n)
    raise ConfigError(f"unknown matrix family {family!r}; choose from {', '.join(FAMILIES)}")
