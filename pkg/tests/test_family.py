import json
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from numpy.polynomial import chebyshev as C
from scipy.optimize import linprog
from scipy.stats import chisquare

from l0attack.family import (FamilyError, MomentFamily, arcsine_cdf, build_family, draw_real_round,
                             draw_round, family_from_json, family_to_json, load_family, moment,
                             p_grid, phi, phi_vec, pmf, sample_arcsine, sample_family, sample_real,
                             save_family, verify_family)
from l0attack.stats import ks_statistic

F = Fraction


# values frozen from exact construction; cross-checked below where an
# independent route exists
U1 = {0: F(1), 1: F(-4, 3), 4: F(1, 3)}
U3 = {0: F(1), 1: F(-108, 91), 10: F(54, 221), 27: F(-20, 221), 36: F(3, 91)}


def test_k1_frozen(fam1):
    assert fam1.R == 4
    assert dict(fam1.u) == U1
    assert fam1.U == F(8, 3)
    assert fam1.alpha == F(3, 16)
    assert fam1.beta == F(3, 8)


def test_k3_frozen(fam3):
    assert fam3.R == 36
    assert dict(fam3.u) == U3
    assert fam3.U == F(304, 119)
    assert fam3.alpha == F(119, 608)


def _primal_lp_optimum(K, R):
    """min sum_i |C(R,i) Q(i)| over deg Q <= R-K-1 with Q(0) = 1, solved directly."""
    d = R - K - 1
    V = C.chebvander(2 * np.arange(R + 1) / R - 1, d)
    w = np.array([comb(R, i) for i in range(R + 1)], float)
    scale = w.max()
    w /= scale
    nv = d + 1 + R + 1
    A = np.zeros((2 * (R + 1), nv))
    for i in range(R + 1):
        A[2 * i, :d + 1] = w[i] * V[i]
        A[2 * i + 1, :d + 1] = -w[i] * V[i]
        A[2 * i, d + 1 + i] = A[2 * i + 1, d + 1 + i] = -1
    Aeq = np.zeros((1, nv))
    Aeq[0, :d + 1] = V[0] * w[0]
    res = linprog(np.r_[np.zeros(d + 1), np.ones(R + 1)], A_ub=A, b_ub=np.zeros(2 * (R + 1)),
                  A_eq=Aeq, b_eq=[1], bounds=[(None, None)] * (d + 1) + [(0, None)] * (R + 1),
                  method="highs")
    assert res.status == 0
    return res.fun


@pytest.mark.parametrize("K", [1, 2])
def test_construction_is_lp_optimal(K):
    fam = build_family(K)
    assert float(fam.U / fam.u[0]) == pytest.approx(_primal_lp_optimum(K, fam.R), rel=1e-7)


def _lagrange_eval(xs, ys, x):
    total = F(0)
    for a, ya in zip(xs, ys):
        term = F(ya)
        for b in xs:
            if b != a:
                term *= F(x - b, a - b)
        total += term
    return total


@pytest.mark.parametrize("K", [1, 3])
def test_q_coefficients_agree_with_u(K):
    fam = build_family(K)
    R, d = fam.R, fam.d
    coef = fam.Q.coefficients()
    assert len(coef) - 1 <= d
    vals = [sum(c * F(i) ** k for k, c in enumerate(coef)) for i in range(R + 1)]
    for i in range(R + 1):
        assert (-1) ** i * comb(R, i) * vals[i] == fam.u_at(i)
    # interpolate through d+1 points and predict the rest: degree really is <= d
    xs = list(range(d + 1))
    for i in range(d + 1, R + 1):
        assert _lagrange_eval(xs, vals[: d + 1], i) == vals[i]
    assert vals[0] > 0


@pytest.mark.parametrize("K", [1, 2, 3, 5])
def test_family_exact_invariants(K):
    fam = build_family(K)
    assert verify_family(fam, grid=5) == []
    assert fam.R == 4 * K * K
    assert fam.u[0] > fam.U / 4
    assert sum(fam.u.values()) == 0


def test_k1_first_moment_only(fam1):
    assert all(moment(fam1, p, 1) == 0 for p in p_grid(fam1, 7))
    # matching through order 1 says nothing about order 2: sum u(i) i^2 = 4
    assert moment(fam1, fam1.alpha, 2) - moment(fam1, fam1.beta, 2) == F(-3, 4)


def test_k2_second_moment_constant():
    fam = build_family(2)
    assert len({moment(fam, p, 2) for p in p_grid(fam, 7)}) == 1


def test_k3_moment_identities(fam3):
    for k in (1, 2, 3):
        assert sum(v * F(i) ** k for i, v in fam3.u.items()) == 0


def test_moments_match_up_to_K_and_then_split(fam3):
    for k in range(4):
        assert moment(fam3, fam3.alpha, k) == moment(fam3, fam3.beta, k)
    # odd orders vanish by symmetry for every p, so the first order that can
    # differ is the first even one above K
    assert moment(fam3, fam3.alpha, 5) == moment(fam3, fam3.beta, 5) == 0
    assert moment(fam3, fam3.alpha, 4) - moment(fam3, fam3.beta, 4) == F(-144585, 76)
    assert moment(fam3, fam3.alpha, 6) - moment(fam3, fam3.beta, 6) == F(-549567585, 76)


def test_pmf_examples(fam3):
    a, b = fam3.alpha, fam3.beta
    for i in range(-fam3.R, fam3.R + 1):
        assert pmf(fam3, a, i) == fam3.base(i)
    mid = (a + b) / 2
    assert sum(pmf(fam3, mid, i) for i in range(-fam3.R, fam3.R + 1)) == 1
    assert pmf(fam3, a, 0) == a
    assert pmf(fam3, b, 0) == b == 2 * a


def test_pmf_errors(fam1):
    with pytest.raises(FamilyError):
        pmf(fam1, F(1, 2), 0)
    with pytest.raises(FamilyError):
        pmf(fam1, fam1.alpha, 5)
    with pytest.raises(FamilyError):
        moment(fam1, fam1.alpha, -1)
    with pytest.raises(FamilyError):
        build_family(0)


def test_endpoint_tv_is_quarter(fam3):
    tv = sum(abs(pmf(fam3, fam3.alpha, i) - pmf(fam3, fam3.beta, i))
             for i in fam3.outcomes()) / 2
    assert tv == F(1, 4)


def test_large_family(fam50):
    assert fam50.K == 50 and fam50.R == 10000
    assert len(fam50.support) == 52
    assert fam50.ratio() > F(1, 4)
    assert verify_family(fam50, grid=0) == []
    assert float(fam50.alpha) == pytest.approx(0.19660, abs=1e-5)


def test_json_roundtrip(tmp_path, fam3, fam50):
    for fam in (fam3, fam50):
        save_family(fam, tmp_path / "f.json")
        back = load_family(tmp_path / "f.json")
        assert back == fam
    obj = family_to_json(fam3)
    assert obj["alpha"] == "119/608"
    assert obj["Q"]["form"] == "coefficients"
    assert family_to_json(fam50)["Q"]["form"] == "product"
    obj["U"] = "1/1"
    with pytest.raises(FamilyError):
        family_from_json(obj)


def test_arcsine_ks():
    rng = np.random.default_rng(1)
    a, b = 0.19, 0.38
    x = sample_arcsine(a, b, rng, 10 ** 5)
    assert np.all((x >= a) & (x <= b))
    assert ks_statistic(x, lambda t: arcsine_cdf(t, a, b)) < 0.01


def test_arcsine_density_shape():
    # density C / sqrt(p(1-p)): compare histogram mass on two halves with
    # numeric integration of the density
    from scipy.integrate import quad
    a, b = 0.1, 0.9
    x = sample_arcsine(a, b, np.random.default_rng(2), 10 ** 5)
    dens = lambda p: 1.0 / np.sqrt(p * (1 - p))
    total = quad(dens, a, b)[0]
    left = quad(dens, a, 0.3)[0] / total
    assert np.mean(x < 0.3) == pytest.approx(left, abs=0.01)


@pytest.mark.parametrize("which", ["alpha", "mid", "beta"])
def test_sampler_matches_pmf(fam3, which):
    p = {"alpha": fam3.alpha, "beta": fam3.beta, "mid": (fam3.alpha + fam3.beta) / 2}[which]
    rng = np.random.default_rng(3)
    x = sample_family(fam3, float(p), 10 ** 5, rng)
    vals = fam3.outcomes()
    obs = np.array([np.sum(x == v) for v in vals])
    assert obs.sum() == x.size
    exp = np.array([float(pmf(fam3, p, v)) for v in vals]) * x.size
    assert np.all(obs[exp == 0] == 0)
    live = exp > 0
    assert chisquare(obs[live], exp[live]).pvalue > 0.001


def test_zero_fraction_at_alpha(fam50):
    rng = np.random.default_rng(4)
    a = float(fam50.alpha)
    x = sample_family(fam50, a, 10 ** 5, rng)
    sd = np.sqrt(a * (1 - a) / x.size)
    assert abs(np.mean(x == 0) - a) < 3 * sd


def test_draw_round_consistent(fam3):
    s = draw_round(fam3, 200, np.random.default_rng(5))
    assert fam3.alpha <= s.p <= fam3.beta
    assert np.array_equal(s.c == 1, s.v != 0)
    assert np.all(np.abs(s.v) <= fam3.R)


def test_phi_examples():
    assert phi(0.5, 1) == pytest.approx(-1.0)
    assert phi(0.5, -1) == pytest.approx(1.0)
    assert phi(0, 1) == 0 and phi(1, -1) == 0
    p = 0.3
    assert p * phi(p, -1) + (1 - p) * phi(p, 1) == pytest.approx(0, abs=1e-12)
    assert p * phi(p, -1) ** 2 + (1 - p) * phi(p, 1) ** 2 == pytest.approx(1, abs=1e-12)
    with pytest.raises(ValueError):
        phi(1.5, 1)


@pytest.mark.parametrize("p", np.linspace(0.01, 0.99, 25))
def test_phi_identities_grid(p):
    c = np.array([-1, 1])
    w = phi_vec(p, c)
    assert w.tolist() == [phi(p, -1), phi(p, 1)]
    assert abs(p * w[0] + (1 - p) * w[1]) < 1e-12
    assert abs(p * w[0] ** 2 + (1 - p) * w[1] ** 2 - 1) < 1e-12


def test_real_round_p_one():
    s = draw_real_round(1.0, 10 ** 4, np.random.default_rng(6))
    assert np.mean(s.v == 0) == 0
    assert np.array_equal(s.c == 1, s.v != 0)


def test_real_family_moments():
    rng = np.random.default_rng(7)
    x = sample_real(0.25, 10 ** 6, rng)
    assert abs(np.mean(x)) < 1e-2
    assert np.mean(x * x) == pytest.approx(1.0, abs=0.01)
    z = np.mean(x == 0)
    sd = np.sqrt(0.25 * 0.75 / x.size)
    assert abs(z - 0.75) < 4 * sd
    with pytest.raises(FamilyError):
        sample_real(0.0, 3, rng)


def test_convention_guard(fam3):
    # integer family: Pr[0] = p; real family: Pr[0] = 1 - p; only c/v consistency is shared
    rng = np.random.default_rng(8)
    iv = draw_round(fam3, 5000, rng)
    rv = draw_real_round(0.8, 5000, rng)
    for s in (iv, rv):
        assert np.array_equal(s.c == 1, s.v != 0)
    assert np.mean(rv.v == 0) == pytest.approx(0.2, abs=0.03)
