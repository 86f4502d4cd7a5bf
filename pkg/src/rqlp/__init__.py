"""Pivoted QLP and randomized QLP (RQLP, ERQLP, BRQLP) low-rank factorizations."""
from .linalg import (
    ConfigError,
    ConvergenceError,
    PivotedQR,
    ShapeError,
    frobenius_norm,
    matmul,
    qr_column_pivoted,
    qr_unpivoted,
    singular_values,
    spectral_norm,
)
from .qlp import (
    QlpFactorization,
    SketchConfig,
    brqlp,
    erqlp,
    error_indicator,
    factorize,
    pivoted_qlp,
    range_finder,
    rqlp,
    truncate,
)
from .rng import Rng, gaussian_matrix, random_orthogonal

__version__ = "0.1.0"
