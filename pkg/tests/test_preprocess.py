import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from l0attack.linalg import INT, RingMatrix
from l0attack.preprocess import (check_witness, decompose, exact_pushforward_tv, heaviness,
                                 pushforward, pushforward_enumerated, replay, search_witness,
                                 single_coordinate_tv, tv_exact, verify_reconstruction,
                                 verify_removal_log)

F = Fraction


def M(rows):
    return RingMatrix(INT, rows)


def test_check_witness_spike_row():
    A = [[2, 2, 2, 1]]
    assert check_witness(A, [F(1, 2)], 3, 4)
    assert heaviness(A, [F(1, 2)], 3) == 1
    assert not check_witness(A, [F(1, 2)], 0, 4)


def test_check_witness_unit_row():
    A = [[0, 1, 0, 0], [3, 5, 7, 9]]
    # the indicator itself is integral; half of it puts all fractional mass on column 1
    assert not check_witness(A, [1, 0], 1, 4)
    for s in (1, 2, 4):
        assert check_witness(A, [F(1, 2), 0], 1, s)


def test_check_witness_integer_y_all_ones():
    n = 5
    A = [[1] * n]
    for y in (0, 1, -3, 7):
        for j in range(n):
            assert not check_witness(A, [y], j, n + 1)


def test_check_witness_float_path_and_errors():
    A = [[2, 2, 2, 1]]
    assert check_witness(A, [0.5], 3, 4)
    assert not check_witness(A, [1.0], 3, 4)
    with pytest.raises(ValueError):
        check_witness(A, [F(1, 2)], 3, 0.5)
    with pytest.raises(ValueError):
        check_witness(A, [F(1, 2), F(1, 2)], 3, 4)


def test_search_witness_examples():
    assert search_witness([[2, 2, 2, 1]], 3, 4) == [F(1, 2)]
    y = search_witness([[0, 0, 1, 0], [1, 1, 1, 1]], 2, 3)
    assert y is not None and check_witness([[0, 0, 1, 0], [1, 1, 1, 1]], y, 2, 3)


def test_search_all_ones():
    n = 5
    A = [[1] * n]
    # with s = n+1 the uniform half-vector is itself a witness: 1/n >= 1/(n+1)
    assert search_witness(A, 0, n + 1) == [F(1, 2)]
    assert check_witness(A, [F(1, 2)], 0, n + 1)
    # with s < n no combination of a single all-ones row can put a 1/s share on one column
    assert search_witness(A, 0, n - 1) is None


def test_decompose_unit_rows():
    dec = decompose(M([[1, 0, 0], [0, 1, 0]]), 2)
    assert dec.significant == [0, 1]
    assert not np.any(dec.D.data)
    assert sorted(dec.S_rows) == [0, 1]


def test_decompose_all_ones():
    A = M([[1] * 6])
    dec = decompose(A, 4)
    assert dec.significant == []
    assert dec.D == A


def test_decompose_spike_row_cascades():
    # y = 1/4 gives column 0 a 4/13 share, so every column goes one after another
    dec = decompose(M([[2, 2, 2, 1]]), 4)
    assert dec.significant == [0, 1, 2, 3]
    assert not np.any(dec.D.data)


def test_decompose_spike_row_wide():
    A = M([[2] * 8 + [1]])
    dec = decompose(A, 4)
    assert dec.significant == [8]
    assert dec.D.data.tolist() == [[2] * 8 + [0]]
    assert [str(v) for v in dec.removal_log[0]["y"]] == ["1/2"]


def test_decompose_supplied_witnesses():
    A = M([[2] * 8 + [1]])
    dec = decompose(A, 4, witness_source=[(8, ["1/2"])])
    assert dec.significant == [8]
    dec = decompose(A, 4, witness_source=[(8, ["1/3"])])
    assert dec.significant == []


def _random_int(seed, r, n, hi=4):
    rng = np.random.default_rng(seed)
    A = rng.integers(-hi, hi + 1, size=(r, n))
    # plant a few sparse-ish columns so removals actually happen
    for j in rng.choice(n, size=2, replace=False):
        A[:, j] = 0
        A[rng.integers(r), j] = 1
    return M(A)


@pytest.mark.parametrize("seed", range(6))
def test_decomposition_invariants(seed):
    A = _random_int(seed, 2, 7)
    dec = decompose(A, 3, budget=400, rng=np.random.default_rng(seed))
    assert verify_removal_log(A, dec) == []
    assert replay(A, dec.removal_log) == dec.D
    assert verify_reconstruction(A, dec)
    # D and unit rows are column-disjoint
    for j in dec.S_rows:
        assert not np.any(dec.D.data[:, j])
    # logged witnesses do not re-certify anything on D
    for e in dec.removal_log:
        for j in range(A.cols):
            assert not check_witness(dec.D, e["y"], j, 3)
    assert not dec.flagged
    S = dec.strengthened()
    assert S.rows == A.rows + len(dec.S_rows)


def test_decomposition_json():
    dec = decompose(M([[2] * 8 + [1]]), 4)
    obj = dec.to_json()
    assert obj["removal_log"][0]["y"] == ["1/2"]
    assert obj["significant"] == [8]


# ---------------------------------------------------------------- exact TV

A6_TV = F(5691043034435051, 31223221739061248)


def test_pushforward_zero_matrix(fam1):
    D = M([[0, 0, 0]])
    assert exact_pushforward_tv(D, fam1, fam1.alpha, fam1.beta) == 0


def test_pushforward_same_parameter(fam3):
    D = M([[1, 1, 1, 1]])
    assert exact_pushforward_tv(D, fam3, fam3.alpha, fam3.alpha) == 0


def test_all_ones_row_fixture(fam3):
    D = M([[1, 1, 1, 1]])
    tv = exact_pushforward_tv(D, fam3, fam3.alpha, fam3.beta)
    single = single_coordinate_tv(fam3, fam3.alpha, fam3.beta)
    assert single == F(1, 4)
    assert tv == A6_TV
    assert tv <= single


@pytest.mark.parametrize("rows", [[[1, 1, 1]], [[1, -2, 0]], [[1, 1], [0, 3]], [[2, 1, 1]]])
def test_convolution_equals_enumeration(fam1, rows):
    D = M(rows)
    p = (fam1.alpha + fam1.beta) / 2
    assert pushforward(D, fam1, p) == pushforward_enumerated(D, fam1, p)
    assert sum(pushforward(D, fam1, p).values()) == 1


def test_tv_symmetry_and_triangle(fam1):
    D = M([[1, 2, -1]])
    a, b = fam1.alpha, fam1.beta
    ps = [a, a + (b - a) / 3, b]
    tv = {(x, y): exact_pushforward_tv(D, fam1, x, y) for x in ps for y in ps}
    for x, y in itertools.product(ps, ps):
        assert tv[x, y] == tv[y, x]
    for x, y, z in itertools.permutations(ps, 3):
        assert tv[x, z] <= tv[x, y] + tv[y, z]


def test_tv_monotone_under_row_deletion(fam1):
    D = M([[1, 1, 0], [0, 1, 2]])
    full = exact_pushforward_tv(D, fam1, fam1.alpha, fam1.beta)
    for k in range(2):
        sub = M([D.data[1 - k].tolist()])
        assert exact_pushforward_tv(sub, fam1, fam1.alpha, fam1.beta) <= full
    assert full <= 3 * single_coordinate_tv(fam1, fam1.alpha, fam1.beta)


def test_enumeration_limit(fam3):
    with pytest.raises(ValueError):
        exact_pushforward_tv(M([[1] * 9]), fam3, fam3.alpha, fam3.beta)


def test_tv_exact_basic():
    P = {(0,): F(1, 2), (1,): F(1, 2)}
    Q = {(0,): F(1)}
    assert tv_exact(P, Q) == F(1, 2)
    assert tv_exact(P, P) == 0
