"""Error metrics, numerical evaluation of the L-value error bounds, and
singular-value tracking reports."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .linalg import ConfigError, as_matrix, qr_column_pivoted, singular_values
from .qlp import QlpFactorization, SketchConfig, erqlp, pivoted_qlp, rqlp


class HypothesisError(ValueError):
    pass


@dataclass
class BoundReport:
    """Ingredients and right-hand sides of the RQLP / ERQLP L-value bounds.

    ``per_j_bound[j]`` bounds the expected relative error
    ``(sigma_j(A) - sigma_j(L11)) / sigma_j(A)``.  The big-O term is
    evaluated with implied constant 1, so the numbers are indicative only.
    """

    c_const: float
    tau: np.ndarray
    gamma: float
    rho: float
    l21_norm: float
    gap_ratio: float
    per_j_bound: np.ndarray
    vacuous: bool
    hypotheses: dict = field(default_factory=dict)
    decay: float = 1.0

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("tau", "per_j_bound"):
            out[key] = [float(x) for x in out[key]]
        return out


@dataclass
class TrackReport:
    true_sv: np.ndarray
    approx_values: dict
    err: dict
    relative_err: dict

    def rows(self):
        names = list(self.approx_values)
        yield ["j", "sigma"] + names
        for j, s in enumerate(self.true_sv):
            yield [j + 1, s] + [self.approx_values[name][j] for name in names]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for i, row in enumerate(self.rows()):
                w.writerow(row if i == 0 else [row[0]] + [f"{x:.6e}" for x in row[1:]])

    def summary(self) -> dict:
        return {
            "k": len(self.true_sv),
            "err": {name: float(e) for name, e in self.err.items()},
            "total_abs_dev": {
                name: float(np.sum(np.abs(self.true_sv - v)))
                for name, v in self.approx_values.items()
            },
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def err_metric(a_sv, f: QlpFactorization | np.ndarray, k: int) -> float:
    """``max_{j <= k} |sigma_j(A) - |L_jj||``."""
    values = f.l_values if isinstance(f, QlpFactorization) else np.abs(np.asarray(f))
    a_sv = np.asarray(a_sv, dtype=np.float64)
    if k > min(len(a_sv), len(values)):
        raise ConfigError(f"k = {k} exceeds available values")
    return float(np.max(np.abs(a_sv[:k] - values[:k])))


def relative_errors(a_sv, values, k: int) -> np.ndarray:
    """``(sigma_j - v_j) / sigma_j``, falling back to the absolute error where sigma_j = 0."""
    s = np.asarray(a_sv[:k], dtype=np.float64)
    diff = s - np.asarray(values[:k])
    safe = np.where(s > 0, s, 1.0)
    return diff / safe


def frobenius_bound(a_sv, k: int, p: int) -> float:
    """Expected-error bound ``sqrt(1 + k/(p-1)) * ||sigma_{k+1:}||_2`` (needs p > 2)."""
    if p <= 2:
        raise HypothesisError(f"the expected Frobenius bound needs p > 2, got p = {p}")
    tail = np.asarray(a_sv, dtype=np.float64)[k:]
    return float(np.sqrt(1.0 + k / (p - 1.0)) * np.sqrt(np.sum(tail * tail)))


def sketch_constant(ell: int, n: int, p: int) -> float:
    return 4.0 * math.e * math.sqrt(ell) * (math.sqrt(n - ell + p) + math.sqrt(ell) + 7.0)


def _smin(m: np.ndarray) -> float:
    return float(singular_values(m)[-1]) if m.size else 0.0


def _snorm(m: np.ndarray) -> float:
    return float(singular_values(m)[0]) if m.size else 0.0


def _tau(a_sv: np.ndarray, k: int) -> np.ndarray:
    s = a_sv[:k]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s > 0, a_sv[k] / np.where(s > 0, s, 1.0), np.inf)


def _gap(b_sv: np.ndarray, k: int) -> float:
    if b_sv[k - 1] <= 0:
        return 1.0
    return float(min(b_sv[k] / b_sv[k - 1], 1.0))


def _second_term(numerator: float, rho: float, gamma: float) -> float:
    denom = (1.0 - rho * rho) * gamma * gamma
    if denom <= 0:
        return math.inf
    return numerator / denom


def rqlp_bound(a_sv, b, l_factor, k: int, p: int) -> BoundReport:
    """Evaluate the RQLP L-value bound for one run.

    Split ``L`` at ``k``: ``gamma = sigma_min(L11)``, ``rho = ||L22|| / gamma``.
    The bound is ``1 - 1/sqrt(1 + C^2 tau_j^2) + ||L21||^2 / ((1 - rho^2) gamma^2)``
    and is flagged vacuous when ``rho >= 1``, the rank-revealing hypotheses on
    ``gamma`` and ``||L22||`` fail, or ``sigma_k(B) = sigma_{k+1}(B)``.
    """
    a_sv = np.asarray(a_sv, dtype=np.float64)
    b = as_matrix(b)
    l_factor = as_matrix(l_factor)
    ell, n = b.shape
    if not 1 <= k < l_factor.shape[0]:
        raise ConfigError(f"need 1 <= k < ell, got k = {k}, ell = {l_factor.shape[0]}")
    b_sv = singular_values(b)
    l11, l21, l22 = l_factor[:k, :k], l_factor[k:, :k], l_factor[k:, k:]
    gamma, l22_norm, l21_norm = _smin(l11), _snorm(l22), _snorm(l21)
    rho = l22_norm / gamma if gamma > 0 else math.inf
    c = sketch_constant(ell, n, p)
    tau = _tau(a_sv, k)
    gap = _gap(b_sv, k)
    hyp = {
        "gamma_lower": bool(gamma >= b_sv[k - 1] / math.sqrt(k * (n - k + 1))),
        "l22_upper": bool(l22_norm <= b_sv[k] * math.sqrt((k + 1) * (n - k))),
        "rho_below_one": bool(rho < 1.0),
        "spectral_gap": bool(gap < 1.0),
    }
    first = 1.0 - 1.0 / np.sqrt(1.0 + (c * tau) ** 2)
    per_j = first + _second_term(l21_norm**2, rho, gamma)
    return BoundReport(
        c_const=c, tau=tau, gamma=gamma, rho=rho, l21_norm=l21_norm, gap_ratio=gap,
        per_j_bound=per_j, vacuous=not all(hyp.values()), hypotheses=hyp,
    )


def erqlp_bound(a_sv, b, r_factors, k: int, d: int) -> BoundReport:
    """Evaluate the ERQLP L-value bound.

    ``r_factors`` is ``[R0, ..., R_final]`` as recorded by :func:`erqlp`; the
    blocks of ``R0`` supply ``||R12||`` and the hypotheses, the last factor
    supplies ``gamma`` and ``rho``.  The second term is
    ``gap^(2d) * n^((4d+1)/2) * ||R12||^2 / ((1 - rho^2) gamma^2)``.
    """
    a_sv = np.asarray(a_sv, dtype=np.float64)
    b = as_matrix(b)
    ell, n = b.shape
    r0, rd = r_factors[0], r_factors[-1]
    if not 1 <= k < rd.shape[0]:
        raise ConfigError(f"need 1 <= k < ell, got k = {k}")
    b_sv = singular_values(b)
    gamma0 = _smin(r0[:k, :k])
    r22_0 = _snorm(r0[k:, k:])
    r12_0 = _snorm(r0[:k, k:])
    gamma, rd22 = _smin(rd[:k, :k]), _snorm(rd[k:, k:])
    rho = rd22 / gamma if gamma > 0 else math.inf
    c = sketch_constant(ell, n, ell - k)
    tau = _tau(a_sv, k)
    gap = _gap(b_sv, k)
    decay = gap ** (2 * d)
    rhos = []
    for r in r_factors[1:]:
        g = _smin(r[:k, :k])
        rhos.append(_snorm(r[k:, k:]) / g if g > 0 else math.inf)
    hyp = {
        "r22_upper": bool(r22_0 <= math.sqrt((k + 1) * (n - k)) * b_sv[k]),
        "gamma_lower": bool(gamma0 >= b_sv[k - 1] / math.sqrt(k * (n - k + 1))),
        "rho_below_one": bool(all(x < 1.0 for x in rhos)),
        "spectral_gap": bool(gap < 1.0),
    }
    first = 1.0 - 1.0 / np.sqrt(1.0 + (c * tau) ** 2)
    if decay == 0.0:
        second = 0.0
    else:
        second = decay * _second_term(n ** ((4 * d + 1) / 2) * r12_0**2, rho, gamma)
    return BoundReport(
        c_const=c, tau=tau, gamma=gamma, rho=rho, l21_norm=r12_0, gap_ratio=gap,
        per_j_bound=first + second, vacuous=not all(hyp.values()), hypotheses=hyp,
        decay=decay,
    )


TRACK_ALGORITHMS = ("cpqr", "qlp", "rqlp", "erqlp")


def track_report(a, k: int, algorithms=TRACK_ALGORITHMS, cfg: SketchConfig | None = None,
                 true_sv=None) -> TrackReport:
    """Compare the leading ``k`` R-values (CPQR) and L-values (QLP, RQLP,
    ERQLP) of ``a`` against its singular values.

    ``true_sv`` skips the SVD oracle when the spectrum is known.
    """
    a = as_matrix(a)
    cfg = cfg or SketchConfig(k=k)
    sv = singular_values(a) if true_sv is None else np.asarray(true_sv, dtype=np.float64)
    sv = sv[:k]
    values = {}
    for name in algorithms:
        if name == "cpqr":
            v = qr_column_pivoted(a).r_values
        elif name == "qlp":
            v = pivoted_qlp(a).l_values
        elif name == "rqlp":
            v = rqlp(a, cfg).l_values
        elif name == "erqlp":
            v = erqlp(a, cfg).l_values
        else:
            raise ConfigError(f"unknown algorithm {name!r}")
        values[name] = v[:k]
    return TrackReport(
        true_sv=sv,
        approx_values=values,
        err={name: float(np.max(np.abs(sv - v))) for name, v in values.items()},
        relative_err={name: relative_errors(sv, v, k) for name, v in values.items()},
    )
