import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rqlp.linalg import ConfigError, ShapeError, frobenius_norm, singular_values
from rqlp.qlp import (
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
from rqlp.rng import Rng, gaussian_matrix, random_orthogonal

log = logging.getLogger(__name__)


class Counted(np.ndarray):
    """Counts matrix products that take this exact array as an operand.

    Views, transposes and results get ``counter = None`` and are not counted,
    except that a transpose of the wrapped matrix still counts as touching it.
    """

    def __array_finalize__(self, obj):
        self.counter = None

    @property
    def T(self):
        # A.T shares A's data, so products with it still touch A
        t = np.ndarray.T.__get__(self)
        t.counter = self.counter
        return t

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if ufunc is np.matmul:
            for x in inputs:
                if isinstance(x, Counted) and x.counter is not None:
                    x.counter[0] += 1
        plain = [x.view(np.ndarray) if isinstance(x, Counted) else x for x in inputs]
        return getattr(ufunc, method)(*plain, **kwargs)


def counted(a):
    c = np.asarray(a, dtype=np.float64).view(Counted)
    c.counter = [0]
    return c


def low_rank(rng, m, n, r):
    return rng.standard_normal((m, r)) @ rng.standard_normal((r, n))


def projector_residual(a, v):
    return frobenius_norm(a - v @ (v.T @ a))


def orth_err(q):
    return frobenius_norm(q.T @ q - np.eye(q.shape[1]))


# ---------------------------------------------------------------- config


@pytest.mark.parametrize("kw", [dict(k=1), dict(k=5, p=1), dict(k=60, p=5)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        SketchConfig(**kw).check((50, 40))


def test_config_ell():
    assert SketchConfig(k=60, p=5).ell == 65


# ---------------------------------------------------------------- range finder


def test_range_finder_full_capture():
    a = random_orthogonal(Rng(1), 12)
    v = range_finder(a, 12, Rng(2))
    assert projector_residual(a, v) <= 1e-10


def test_range_finder_exact_rank(rand):
    a = low_rank(rand, 40, 30, 3)
    v = range_finder(a, 5, Rng(0))
    assert projector_residual(a, v) <= 1e-10 * frobenius_norm(a)


def test_range_finder_residual_identity(rand):
    a = rand.standard_normal((100, 80))
    v = range_finder(a, 20, Rng(3))
    lhs = projector_residual(a, v) ** 2
    rhs = frobenius_norm(a) ** 2 - frobenius_norm(v.T @ a) ** 2
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_range_finder_orthonormal_and_uses_given_omega(rand):
    a = rand.standard_normal((30, 20))
    omega = gaussian_matrix(Rng(4), 20, 6)
    v = range_finder(a, 6, Rng(99), omega=omega)
    assert orth_err(v) <= 1e-13
    np.testing.assert_allclose(v, range_finder(a, 6, Rng(4)), atol=1e-14)


def test_range_finder_rejects_wide_sketch(rand):
    with pytest.raises(ShapeError):
        range_finder(rand.standard_normal((10, 8)), 9, Rng(0))


# ---------------------------------------------------------------- error indicator


def test_error_indicator_full_basis(rand):
    a = rand.standard_normal((6, 4))
    assert error_indicator(a, a) == 0.0


def test_error_indicator_empty_b(rand):
    a = rand.standard_normal((6, 4))
    assert error_indicator(a, np.zeros((0, 4))) == pytest.approx(frobenius_norm(a), rel=1e-15)


def test_error_indicator_matches_direct(rand):
    a = rand.standard_normal((200, 150))
    v = range_finder(a, 40, Rng(5))
    direct = projector_residual(a, v)
    assert abs(error_indicator(a, v.T @ a) - direct) <= 1e-8 * frobenius_norm(a)


def test_error_indicator_clamps_rounding():
    a = np.eye(3)
    assert error_indicator(a, a * (1 + 1e-16)) == 0.0


# ---------------------------------------------------------------- pivoted QLP


def test_qlp_diagonal():
    f = pivoted_qlp(np.diag([3.0, 2.0, 1.0]))
    np.testing.assert_array_equal(f.l_values, [3.0, 2.0, 1.0])


def test_qlp_orthogonal_input():
    f = pivoted_qlp(random_orthogonal(Rng(6), 20))
    np.testing.assert_allclose(f.l_values, np.ones(20), atol=1e-12)


def test_qlp_exact_reconstruction(rand):
    a = rand.standard_normal((50, 50))
    f = pivoted_qlp(a)
    assert f.residual(a) <= 1e-12 * frobenius_norm(a)
    assert orth_err(f.q) <= 1e-12 and orth_err(f.p) <= 1e-12
    assert np.all(np.triu(f.l_factor, 1) == 0)
    sv = singular_values(a)
    track = np.max(np.abs(sv - f.l_values)) / sv[0]
    log.info("pivoted QLP tracking on random 50x50: max |sigma_j - L_j| / sigma_1 = %.3f", track)


def test_qlp_wide_input(rand):
    a = rand.standard_normal((5, 12))
    f = pivoted_qlp(a)
    assert f.q.shape == (5, 5) and f.p.shape == (12, 5)
    assert f.residual(a) <= 1e-13 * frobenius_norm(a)


# ---------------------------------------------------------------- RQLP


def check_factorization(a, f, tol=1e-11):
    ell = f.rank
    assert f.q.shape == (a.shape[0], ell) and f.p.shape == (a.shape[1], ell)
    assert orth_err(f.q) <= tol
    v = f.info["basis"]
    assert f.residual(a) == pytest.approx(projector_residual(a, v), rel=1e-10, abs=1e-12)


def test_rqlp_shapes_and_contract(rand):
    a = rand.standard_normal((90, 70))
    f = rqlp(a, SketchConfig(k=10, p=5, seed=1))
    check_factorization(a, f)
    assert orth_err(f.p) <= 1e-11
    assert np.all(np.triu(f.l_factor, 1) == 0)
    assert f.algorithm == "rqlp" and f.config.seed == 1


def test_rqlp_exact_rank(rand):
    a = low_rank(rand, 120, 100, 10)
    f = rqlp(a, SketchConfig(k=10, p=5))
    assert f.residual(a) <= 1e-9 * frobenius_norm(a)


@pytest.mark.parametrize("algo,cfg,expected", [
    ("rqlp", SketchConfig(k=8, p=4), 2),
    ("erqlp", SketchConfig(k=8, p=4, d=2), 2),
    ("erqlp", SketchConfig(k=8, p=4, d=3), 2),
    ("brqlp", SketchConfig(k=8, p=4, b=3), 4),
    ("brqlp", SketchConfig(k=8, p=4, b=12), 1),
])
def test_access_count(rand, algo, cfg, expected):
    a = counted(rand.standard_normal((40, 30)))
    factorize(a, algo, cfg)
    assert a.counter[0] == expected


def test_counting_wrapper_sees_plain_products(rand):
    a = counted(rand.standard_normal((4, 3)))
    _ = a @ np.ones((3, 2))
    _ = np.ones((2, 4)) @ a
    _ = a.T @ np.ones((4, 1))
    _ = (a + 1.0) @ np.ones((3, 1))
    assert a.counter[0] == 3


def test_rqlp_rejects_oversized_sketch(rand):
    with pytest.raises(ConfigError, match="exceeds"):
        rqlp(rand.standard_normal((20, 10)), SketchConfig(k=8, p=4))


def test_rqlp_does_not_mutate(rand):
    a = rand.standard_normal((30, 25))
    before = a.copy()
    for algo, cfg in [("rqlp", SketchConfig(5, 5)), ("erqlp", SketchConfig(5, 5, d=3)),
                      ("brqlp", SketchConfig(5, 5, b=5))]:
        factorize(a, algo, cfg)
    np.testing.assert_array_equal(a, before)


# ---------------------------------------------------------------- ERQLP


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_erqlp_identity(d):
    f = erqlp(np.eye(12), SketchConfig(k=4, p=3, d=d, seed=2))
    np.testing.assert_allclose(f.l_values, np.ones(7), atol=1e-12)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
def test_erqlp_contract(rand, d):
    a = rand.standard_normal((60, 50))
    f = erqlp(a, SketchConfig(k=10, p=5, d=d, seed=4))
    check_factorization(a, f)
    assert orth_err(f.p) <= 1e-11
    # even d: lower triangular L; odd d: the middle factor is upper triangular
    tri = np.triu(f.l_factor, 1) if d % 2 == 0 else np.tril(f.l_factor, -1)
    assert np.all(tri == 0)
    assert len(f.info["r_factors"]) == d + 2


def test_erqlp_residual_matches_rqlp(rand):
    a = rand.standard_normal((80, 70))
    base = rqlp(a, SketchConfig(k=12, p=5, seed=9)).residual(a)
    for d in (2, 4):
        r = erqlp(a, SketchConfig(k=12, p=5, d=d, seed=9)).residual(a)
        assert r == pytest.approx(base, rel=1e-10)


def test_erqlp_rejects_d0(rand):
    with pytest.raises(ConfigError, match="rqlp"):
        erqlp(rand.standard_normal((20, 20)), SketchConfig(k=4, p=2, d=0))


def test_erqlp_improves_l_values(pds400):
    a, sv = pds400
    errs = {}
    for d in (1, 2, 4):
        f = erqlp(a, SketchConfig(k=60, p=5, d=d, seed=1))
        errs[d] = np.max(np.abs(sv[:60] - f.l_values[:60]))
    errs[0] = np.max(np.abs(sv[:60] - rqlp(a, SketchConfig(k=60, p=5, seed=1)).l_values[:60]))
    log.info("ERQLP err by d on pds(400), seed 1: %s", errs)
    assert errs[4] <= errs[2] <= errs[0]


# ---------------------------------------------------------------- BRQLP


def test_brqlp_single_block_equals_rqlp(rand):
    a = rand.standard_normal((70, 60))
    cfg = SketchConfig(k=10, p=5, seed=7)
    blocked = brqlp(a, SketchConfig(k=10, p=5, b=15, seed=7))
    plain = rqlp(a, cfg)
    v = plain.info["basis"]
    assert frobenius_norm(blocked.product() - v @ (v.T @ a)) <= 1e-10 * frobenius_norm(a)
    assert frobenius_norm(blocked.product() - plain.product()) <= 1e-10 * frobenius_norm(a)


@pytest.mark.parametrize("b", [2, 4, 5, 10, 20])
def test_brqlp_projector_matches_unblocked(rand, b):
    a = rand.standard_normal((120, 100))
    f = brqlp(a, SketchConfig(k=16, p=4, b=b, seed=3))
    v = rqlp(a, SketchConfig(k=16, p=4, seed=3)).info["basis"]
    vb = f.info["basis"]
    diff = frobenius_norm(vb @ (vb.T @ a) - v @ (v.T @ a))
    assert diff <= 1e-9 * frobenius_norm(a)
    check_factorization(a, f)


@pytest.mark.slow
def test_brqlp_many_blocks_stay_orthogonal(pds400):
    a, _ = pds400
    f = brqlp(a, SketchConfig(k=59, p=5, b=8, seed=1))
    assert orth_err(f.q) <= 1e-10
    assert np.all(np.triu(f.l_factor, 1) == 0)


def test_brqlp_block_diagonal_l(rand):
    a = rand.standard_normal((50, 40))
    f = brqlp(a, SketchConfig(k=7, p=5, b=4))
    mask = np.kron(np.eye(3), np.ones((4, 4))) == 0
    assert np.all(f.l_factor[mask] == 0)


def test_brqlp_warns_on_p_drift(rand, caplog):
    with caplog.at_level(logging.WARNING, logger="rqlp.qlp"):
        brqlp(rand.standard_normal((50, 40)), SketchConfig(k=6, p=4, b=5))
    assert "not orthogonal" in caplog.text


def test_brqlp_rejects_bad_block(rand):
    with pytest.raises(ConfigError, match="does not divide"):
        brqlp(rand.standard_normal((30, 30)), SketchConfig(k=8, p=4, b=5))


# ---------------------------------------------------------------- truncate


def test_truncate_full_is_identity(rand):
    a = rand.standard_normal((40, 30))
    f = rqlp(a, SketchConfig(k=8, p=4))
    g = truncate(f, f.rank)
    np.testing.assert_array_equal(g.product(), f.product())


def test_truncate_exact_rank_loses_nothing(rand):
    a = low_rank(rand, 60, 50, 8)
    f = rqlp(a, SketchConfig(k=8, p=4))
    # pivoted QLP of a rank-8 B puts all of it in the leading 8 columns
    assert truncate(f, 8).residual(a) == pytest.approx(f.residual(a), abs=1e-10 * frobenius_norm(a))


def test_truncate_monotone(rand):
    a = rand.standard_normal((60, 50))
    f = erqlp(a, SketchConfig(k=10, p=5, d=2))
    res = [truncate(f, k).residual(a) for k in range(1, f.rank + 1)]
    assert all(x >= y - 1e-12 for x, y in zip(res, res[1:]))


def test_truncate_block_alignment(rand):
    f = brqlp(rand.standard_normal((40, 40)), SketchConfig(k=8, p=4, b=4))
    assert truncate(f, 8).rank == 8
    with pytest.raises(ConfigError, match="block boundary"):
        truncate(f, 6)
    with pytest.raises(ConfigError):
        truncate(f, 13)


# ---------------------------------------------------------------- serialization


def test_save_load_round_trip(tmp_path, rand):
    f = erqlp(rand.standard_normal((30, 20)), SketchConfig(k=5, p=3, d=2, seed=11))
    g = QlpFactorization.load(f.save(tmp_path / "f"))
    assert g.algorithm == "erqlp" and g.config == f.config
    for x, y in [(f.q, g.q), (f.l_factor, g.l_factor), (f.p, g.p)]:
        np.testing.assert_array_equal(x, y)


def test_factorize_unknown():
    with pytest.raises(ConfigError, match="unknown algorithm"):
        factorize(np.eye(3), "svd")


# ---------------------------------------------------------------- properties


@st.composite
def problems(draw):
    m = draw(st.integers(8, 40))
    n = draw(st.integers(8, m))
    k = draw(st.integers(2, n - 2))
    p = draw(st.integers(2, n - k))
    seed = draw(st.integers(0, 2**32 - 1))
    return m, n, k, p, seed


@settings(max_examples=60, deadline=None)
@given(problems(), st.sampled_from(["rqlp", "erqlp", "brqlp"]))
def test_residual_identity_property(prob, algo):
    m, n, k, p, seed = prob
    a = np.random.default_rng(seed).standard_normal((m, n))
    cfg = SketchConfig(k=k, p=p, d=1 + seed % 4, b=k + p if algo != "brqlp" else 1, seed=seed)
    f = factorize(a, algo, cfg)
    b = f.info["reduced"]
    lhs = f.residual(a) ** 2 + frobenius_norm(b) ** 2
    assert lhs == pytest.approx(frobenius_norm(a) ** 2, rel=1e-8)


@settings(max_examples=60, deadline=None)
@given(problems())
def test_orthogonal_invariance_of_product(prob):
    m, n, k, p, seed = prob
    a = np.random.default_rng(seed).standard_normal((m, n))
    ref = rqlp(a, SketchConfig(k=k, p=p, seed=seed)).residual(a)
    for algo, cfg in [("erqlp", SketchConfig(k, p, d=2, seed=seed)),
                      ("erqlp", SketchConfig(k, p, d=3, seed=seed)),
                      ("brqlp", SketchConfig(k, p, b=1, seed=seed))]:
        assert factorize(a, algo, cfg).residual(a) == pytest.approx(ref, rel=1e-9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(problems())
def test_interlacing_chain(prob):
    m, n, k, p, seed = prob
    a = np.random.default_rng(seed).standard_normal((m, n))
    f = rqlp(a, SketchConfig(k=k, p=p, seed=seed))
    s_a = singular_values(a)
    s_b = singular_values(f.info["reduced"])
    s_l = singular_values(f.l_factor)
    tol = 1e-9 * s_a[0]
    assert np.all(s_l <= s_b + tol)
    assert np.all(s_b <= s_a[: len(s_b)] + tol)


def test_l_value_ordering_logged(pds400):
    a, _ = pds400
    lv = rqlp(a, SketchConfig(k=60, p=5, seed=1)).l_values[:60]
    violations = int(np.sum(lv[1:] > 1.05 * lv[:-1]))
    log.info("RQLP L-values: %d ordering violations beyond 5%% in the first 60", violations)
