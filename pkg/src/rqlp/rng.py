"""Reproducible Gaussian sampling.

The bit stream is SplitMix64 evaluated on a counter, so a state is just
``(seed, counter)`` and any block of draws can be produced with vectorised
uint64 arithmetic.  Normals come from Box-Muller with both outputs of each
pair used.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .linalg import qr_unpivoted

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _splitmix64(seed: int, start: int, count: int) -> np.ndarray:
    i = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(seed) + i * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@dataclass
class Rng:
    """Counter-based generator state.  ``counter`` counts 64-bit words drawn."""

    seed: int = 0
    counter: int = 0

    def __post_init__(self):
        if not 0 <= self.seed <= _MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def uniform(self, count: int) -> np.ndarray:
        """``count`` doubles in [0, 1) with 53 random bits each."""
        words = _splitmix64(self.seed, self.counter, count)
        self.counter += count
        return (words >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, count: int) -> np.ndarray:
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs)
        r = np.sqrt(-2.0 * np.log1p(-u[0::2]))  # 1 - u lies in (0, 1]
        theta = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:count]

    def split(self, index: int) -> "Rng":
        """Independent child stream derived from ``seed`` and ``index``."""
        digest = hashlib.blake2b(
            self.seed.to_bytes(8, "little") + int(index).to_bytes(8, "little"),
            digest_size=8,
        ).digest()
        return Rng(int.from_bytes(digest, "little"))


def gaussian_matrix(rng: Rng, rows: int, cols: int) -> np.ndarray:
    """``rows x cols`` i.i.d. N(0, 1), filled column by column."""
    if rows < 1 or cols < 1:
        raise ValueError(f"need positive dimensions, got {rows} x {cols}")
    return rng.normal(rows * cols).reshape((rows, cols), order="F")


def random_orthogonal(rng: Rng, n: int) -> np.ndarray:
    """Haar-distributed ``n x n`` orthogonal matrix.

    QR of a Gaussian matrix; the QR kernel already normalises ``diag(R) > 0``,
    which is the sign correction that makes the distribution Haar.
    """
    f = qr_unpivoted(gaussian_matrix(rng, n, n))
    return f.q * np.where(np.diag(f.r) < 0, -1.0, 1.0)
