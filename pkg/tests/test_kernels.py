import numpy as np
import pytest

from sbtensor import kernels
from sbtensor.kernels import Op


def _fvec(arr):
    return np.asfortranarray(arr).reshape(-1, order="F")


@pytest.mark.parametrize("opa", [Op.Normal, Op.Transpose])
@pytest.mark.parametrize("opb", [Op.Normal, Op.Transpose])
def test_gemm_op_combinations(opa, opb):
    rng = np.random.default_rng(0)
    m, n, k = 4, 5, 3
    A = rng.standard_normal((m, k) if opa is Op.Normal else (k, m))
    B = rng.standard_normal((k, n) if opb is Op.Normal else (n, k))
    C = rng.standard_normal((m, n))
    want = 1.5 * (A if opa is Op.Normal else A.T) @ \
        (B if opb is Op.Normal else B.T) + 0.5 * C
    c = _fvec(C).copy()
    kernels.gemm(opa, opb, m, n, k, 1.5, _fvec(A), A.shape[0],
                 _fvec(B), B.shape[0], 0.5, c, m)
    np.testing.assert_allclose(c, _fvec(want), atol=1e-13)


def test_gemm_beta_zero_ignores_nan_in_c():
    m, n, k = 2, 2, 2
    a = np.ones(4)
    b = np.ones(4)
    c = np.full(4, np.nan)
    kernels.gemm(Op.Normal, Op.Normal, m, n, k, 1.0, a, m, b, k, 0.0, c, m)
    np.testing.assert_array_equal(c, np.full(4, 2.0))


def test_gemm_rejects_extended_ops():
    a = np.zeros(4)
    with pytest.raises(ValueError):
        kernels.gemm(Op.ExtendedNormal, Op.Normal, 2, 2, 2, 1.0, a, 2,
                     a, 2, 0.0, a.copy(), 2)


def test_gemm_rejects_small_ld():
    a = np.zeros(16)
    with pytest.raises(ValueError):
        kernels.gemm(Op.Normal, Op.Normal, 4, 2, 2, 1.0, a, 2, a, 2,
                     0.0, a.copy(), 4)


def test_gemv_ger_dot():
    rng = np.random.default_rng(1)
    m, n = 5, 3
    A = rng.standard_normal((m, n))
    x = rng.standard_normal(n)
    y = rng.standard_normal(m)
    out = y.copy()
    kernels.gemv(Op.Normal, m, n, 2.0, _fvec(A), m, x, 1, 0.25, out, 1)
    np.testing.assert_allclose(out, 2.0 * A @ x + 0.25 * y, atol=1e-13)
    out = x.copy()
    kernels.gemv(Op.Transpose, m, n, 1.0, _fvec(A), m, y, 1, 0.0, out, 1)
    np.testing.assert_allclose(out, A.T @ y, atol=1e-13)
    c = np.zeros(m * n)
    kernels.ger(m, n, 3.0, y, 1, x, 1, c, m)
    np.testing.assert_allclose(c.reshape((m, n), order="F"),
                               3.0 * np.outer(y, x), atol=1e-13)
    assert kernels.dot(n, x, 1, x, 1) == pytest.approx(x @ x, abs=1e-13)


def test_strided_batched_gemm_matches_einsum():
    rng = np.random.default_rng(2)
    m, n, k, P = 4, 5, 3, 6
    A = rng.standard_normal((m, k, P))
    B = rng.standard_normal((k, n, P))
    c = np.zeros(m * n * P)
    kernels.strided_batched_gemm(Op.Normal, Op.Normal, m, n, k, 1.0,
                                 _fvec(A), m, m * k, _fvec(B), k, k * n,
                                 0.0, c, m, m * n, P)
    want = np.einsum("ikp,knp->inp", A, B)
    np.testing.assert_allclose(c.reshape((m, n, P), order="F"), want,
                               atol=1e-13)


def test_strided_batched_gemm_zero_lo_broadcasts():
    # lob = 0 reuses the same B for every batch entry (nested batching)
    rng = np.random.default_rng(3)
    m, n, k, P = 3, 4, 2, 5
    A = rng.standard_normal((m, k, P))
    B = rng.standard_normal((k, n))
    c = np.zeros(m * n * P)
    kernels.strided_batched_gemm(Op.Normal, Op.Normal, m, n, k, 1.0,
                                 _fvec(A), m, m * k, _fvec(B), k, 0,
                                 0.0, c, m, m * n, P)
    want = np.einsum("ikp,kn->inp", A, B)
    np.testing.assert_allclose(c.reshape((m, n, P), order="F"), want,
                               atol=1e-13)


def test_strided_batched_gemm_rejects_overlapping_c():
    a = np.zeros(64)
    with pytest.raises(ValueError):
        kernels.strided_batched_gemm(Op.Normal, Op.Normal, 4, 4, 2, 1.0,
                                     a, 4, 0, a, 2, 0, 0.0, a.copy(), 4, 1, 3)


def test_strided_batched_gemm_zero_batch_is_noop():
    c = np.full(8, 5.0)
    kernels.strided_batched_gemm(Op.Normal, Op.Normal, 2, 2, 2, 1.0,
                                 np.zeros(8), 2, 4, np.zeros(8), 2, 4,
                                 0.0, c, 2, 4, 0)
    np.testing.assert_array_equal(c, np.full(8, 5.0))


@pytest.mark.parametrize("exop", [Op.ExtendedNormal, Op.ExtendedTranspose])
def test_extended_matches_reference(exop):
    rng = np.random.default_rng(4)
    m, n, k, P = 3, 4, 2, 5
    # extended operand: batch is the unit-stride first mode
    a = rng.standard_normal(P * m * k + 7)
    b = rng.standard_normal(max(k, n) * max(k, n) + 40)
    lda, loa = (P, P * m) if exop is Op.ExtendedNormal else (P, P * k)
    c1 = np.zeros(m * n * P)
    c2 = np.zeros(m * n * P)
    args = (exop, Op.Normal, m, n, k, 1.0, a, lda, loa, b, k, 0, 0.0)
    kernels.strided_batched_gemm_ex(*args, c1, m, m * n, P, offc=0)
    kernels.strided_batched_gemm_ex_reference(*args, c2, m, m * n, P, offc=0)
    np.testing.assert_array_equal(c1, c2)


def test_extended_requires_exactly_one_extended_operand():
    a = np.zeros(32)
    with pytest.raises(ValueError):
        kernels.strided_batched_gemm_ex(Op.Normal, Op.Normal, 2, 2, 2, 1.0,
                                        a, 2, 4, a, 2, 4, 0.0, a.copy(),
                                        2, 4, 2)


def test_threads_give_identical_results():
    rng = np.random.default_rng(5)
    m, n, k, P = 6, 7, 4, 9
    A = rng.standard_normal((m, k, P))
    B = rng.standard_normal((k, n, P))
    outs = []
    for threads in (1, 3):
        c = np.zeros(m * n * P)
        kernels.strided_batched_gemm(Op.Normal, Op.Normal, m, n, k, 1.0,
                                     _fvec(A), m, m * k, _fvec(B), k, k * n,
                                     0.0, c, m, m * n, P, threads=threads)
        outs.append(c)
    np.testing.assert_array_equal(outs[0], outs[1])


def test_blocked_gemm_matches_gemm():
    rng = np.random.default_rng(6)
    m, n, k = 17, 13, 9
    a = rng.standard_normal(m * k)
    b = rng.standard_normal(k * n)
    ref = np.zeros(m * n)
    got = np.zeros(m * n)
    kernels.gemm(Op.Normal, Op.Normal, m, n, k, 1.0, a, m, b, k, 0.0, ref, m)
    kernels.blocked_gemm(m, n, k, 1.0, a, m, b, k, 0.0, got, m, tiles=(8, 4, 4))
    np.testing.assert_allclose(got, ref, atol=1e-13)


def test_tile_search_validates_and_reports():
    best, rows = kernels.blocked_gemm_tile_search((16, 12, 4, 8),
                                                  candidates=(2, 4, 8),
                                                  reps=3, seed=0)
    assert all(t in (2, 4, 8) for t in best)
    assert len(rows) == 3 ** 4
    assert all(r["status"] in ("ok", "skipped") for r in rows)
    # tiles larger than the p extent are skipped
    assert any(r["status"] == "skipped" for r in rows
               if r["tp"] > 4)
    with pytest.raises(ValueError):
        kernels.blocked_gemm_tile_search((4, 4, 4, 4), candidates=(3,))


def test_tile_table_csv(tmp_path):
    _, rows = kernels.blocked_gemm_tile_search((8, 8, 2, 4),
                                               candidates=(2, 4), reps=3)
    path = tmp_path / "tiles.csv"
    kernels.tile_table_to_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "tm,tn,tp,tk,micros,status"
    assert len(lines) == 1 + len(rows)
