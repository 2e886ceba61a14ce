import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from l0attack.linalg import (INT, REAL, Fp, Ring, RingMatrix, RingVector, frac, frac_exact,
                             greedy_independent_columns, leverage_scores, matvec, numeric_rank,
                             rank_fp)
from fractions import Fraction


def test_ring_parse_roundtrip():
    assert Ring.parse("int") == INT
    assert Ring.parse("real") == REAL
    assert Ring.parse("fp:101") == Fp(101)
    assert Fp(101).tag() == "fp:101"
    with pytest.raises(ValueError):
        Fp(100)


def test_matvec_identity():
    A = RingMatrix(INT, np.eye(3, dtype=int))
    x = RingVector(INT, [5, -2, 0])
    assert matvec(A, x).data.tolist() == [5, -2, 0]


def test_matvec_mod3():
    A = RingMatrix(Fp(3), [[1, 1], [0, 1]])
    assert matvec(A, RingVector(Fp(3), [2, 2])).data.tolist() == [1, 2]


def test_matvec_unit_vector_selects_column():
    rng = np.random.default_rng(0)
    A = RingMatrix(INT, rng.integers(-9, 10, size=(4, 8)))
    for j in range(8):
        x = np.zeros(8, dtype=int)
        x[j] = 1
        assert matvec(A, RingVector(INT, x)).data.tolist() == A.data[:, j].tolist()


def test_matvec_errors():
    A = RingMatrix(INT, np.eye(3, dtype=int))
    with pytest.raises(ValueError):
        matvec(A, RingVector(INT, [1, 2]))
    with pytest.raises(ValueError):
        matvec(A, RingVector(Fp(5), [1, 2, 3]))


def test_matvec_big_entries_exact():
    # products overflow int64 but the accumulation is exact
    big = 2 ** 32
    A = RingMatrix(INT, [[big, big, big]])
    x = RingVector(INT, [big, big, big])
    assert int(matvec(A, x).data[0]) == 3 * big * big


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from(["int", "fp:7", "fp:101"]))
def test_matvec_linear(seed, tag):
    ring = Ring.parse(tag)
    rng = np.random.default_rng(seed)
    hi = ring.p if ring.kind == "fp" else 50
    A = RingMatrix(ring, rng.integers(0 if ring.kind == "fp" else -hi, hi, size=(3, 6)))
    x = RingVector(ring, rng.integers(0, hi, size=6))
    y = RingVector(ring, rng.integers(0, hi, size=6))
    lhs = matvec(A, x + y).data
    rhs = matvec(A, x).data + matvec(A, y).data
    if ring.kind == "fp":
        rhs = rhs % ring.p
    assert lhs.tolist() == rhs.tolist()


def test_rank_examples():
    assert rank_fp(RingMatrix(Fp(5), np.eye(3, dtype=int))) == 3
    assert rank_fp(RingMatrix(Fp(5), np.zeros((3, 3), dtype=int))) == 0
    assert rank_fp(RingMatrix(Fp(7), [[1, 2], [2, 4]])) == 1
    with pytest.raises(ValueError):
        rank_fp(RingMatrix(INT, [[1]]))


def _span_size(cols, p):
    """Brute-force |span| over F_p of a small set of column vectors."""
    vecs = {tuple([0] * len(cols[0]))} if cols else {()}
    for c in cols:
        vecs = {tuple((a + k * b) % p for a, b in zip(v, c)) for v in vecs for k in range(p)}
    return len(vecs)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([2, 3, 5]), st.integers(1, 3), st.integers(1, 4))
def test_rank_cross_checks(seed, p, r, n):
    rng = np.random.default_rng(seed)
    A = RingMatrix(Fp(p), rng.integers(0, p, size=(r, n)))
    rk = rank_fp(A)
    assert rk == rank_fp(A, col_order=list(reversed(range(n))))
    assert rk == len(greedy_independent_columns(A, range(n)))
    assert rk == len(greedy_independent_columns(A, reversed(range(n))))
    cols = [list(A.data[:, j]) for j in range(n)]
    assert p ** rk == _span_size(cols, p)


def test_frac_examples():
    assert frac([0.3, -0.3, 2.5]).tolist() == pytest.approx([0.3, -0.3, 0.5])
    assert frac([2.5])[0] == 0.5
    assert frac([-0.5])[0] == 0.5
    assert np.all(frac([3, -7, 0]) == 0)
    assert frac([1.75])[0] == -0.25
    with pytest.raises(ValueError):
        frac([np.inf])


def test_frac_exact_ties():
    assert frac_exact(Fraction(5, 2)) == Fraction(1, 2)
    assert frac_exact(Fraction(-1, 2)) == Fraction(1, 2)
    assert frac_exact(Fraction(7, 4)) == Fraction(-1, 4)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_frac_reconstructs(x):
    f = float(frac([x])[0])
    assert -0.5 < f <= 0.5
    nearest = np.ceil(x - 0.5)
    assert f + nearest == pytest.approx(x, abs=np.spacing(abs(x) + 1.0))


def test_leverage_examples():
    assert leverage_scores(np.eye(3)).tolist() == pytest.approx([1, 1, 1])
    assert leverage_scores(np.ones((1, 4))).tolist() == pytest.approx([0.25] * 4)
    assert leverage_scores(np.array([[1, 1, 0], [0, 0, 1]])).tolist() == pytest.approx([0.5, 0.5, 1.0])
    with pytest.raises(ValueError):
        leverage_scores(np.zeros((2, 2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 5), st.integers(1, 12), st.booleans())
def test_leverage_matches_svd(seed, r, n, deficient):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((r, n))
    if deficient and r > 1:
        A[-1] = A[0] * 2.0
    lev = leverage_scores(A)
    assert np.all(lev >= 0) and np.all(lev <= 1)
    rk = numeric_rank(A)
    assert abs(lev.sum() - rk) <= 1e-6
    U, sv, Vt = np.linalg.svd(A, full_matrices=False)
    ref = np.sum(Vt[:rk] ** 2, axis=0)
    assert np.allclose(lev, ref, atol=1e-8)


def test_matrix_json_roundtrip(tmp_path):
    from l0attack.linalg import load_matrix, save_matrix
    A = RingMatrix(Fp(7), [[1, 2, 3], [4, 5, 6]])
    save_matrix(A, tmp_path / "A.json")
    B = load_matrix(tmp_path / "A.json")
    assert A == B
    assert A.to_json()["ring"] == "fp:7"
    assert A.to_json()["rows"] == 2 and A.to_json()["cols"] == 3


def test_int_bound_enforced():
    with pytest.raises(ValueError):
        RingMatrix(INT, [[2 ** 40]])
    with pytest.raises(ValueError):
        RingMatrix(INT, [[0.5]])
