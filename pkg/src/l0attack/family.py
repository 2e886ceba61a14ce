"""Moment-matched distribution family on {-R..R}, arcsine mixing, score weights,
and the Bernoulli-Gaussian family used over the reals."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.optimize import linprog

log = logging.getLogger(__name__)

# Q is serialized with explicit coefficients only up to this degree; beyond it
# the product form over the non-support points is emitted instead.
MAX_EXPLICIT_DEGREE = 400


class FamilyError(ValueError):
    pass


# ---------------------------------------------------------------- Q / LP

def _lp_support(K: int, R: int) -> np.ndarray:
    """Support of the l1-minimal weight vector u with u(0)=1 and vanishing moments <= K.

    Solved through the LP dual (K+2 variables): max y0 s.t.
    |y0*[i=0] + sum_t w_t T_t(2i/R-1)| <= 1 for every i. The primal optimum u is
    read off the inequality multipliers.
    """
    x = 2.0 * np.arange(R + 1) / R - 1.0
    V = cheb.chebvander(x, K)
    e0 = np.zeros((R + 1, 1))
    e0[0] = 1.0
    M = np.hstack([e0, V])
    A_ub = np.vstack([M, -M])
    b_ub = np.ones(2 * (R + 1))
    c = np.zeros(K + 2)
    c[0] = -1.0
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * (K + 2), method="highs")
    if res.status != 0:
        raise FamilyError(f"LP failed for K={K}, R={R}: {res.message}")
    m = res.ineqlin.marginals
    u = -(m[: R + 1] - m[R + 1:])
    supp = np.nonzero(np.abs(u) > 1e-9)[0]
    if supp.size != K + 2 or supp[0] != 0:
        log.info("LP support has %d points (want %d); keeping the largest", supp.size, K + 2)
        order = np.argsort(-np.abs(u))
        pick = [0] + [int(i) for i in order if i != 0][: K + 1]
        supp = np.array(sorted(pick))
    return supp


def exact_weights(support: Sequence[int]) -> Dict[int, Fraction]:
    """The unique u on `support` (|support| = K+2) with u(0)=1 and sum_i u(i) i^t = 0 for t <= K.

    These are divided-difference weights: u(j) proportional to 1/prod_{k != j}(j - k).
    """
    S = [int(s) for s in support]
    if 0 not in S:
        raise FamilyError("support must contain 0")
    w = {}
    for j in S:
        prod = 1
        for k in S:
            if k != j:
                prod *= (j - k)
        w[j] = Fraction(1, prod)
    w0 = w[0]
    return {j: w[j] / w0 for j in S}


@dataclass(frozen=True)
class QPolynomial:
    """Q with Q(0)=1 that vanishes on [0,R] outside `support`.

    Q(x) = scale * prod_{k in [0,R] \\ support}(x - k), so deg Q = R + 1 - |support|.
    """
    R: int
    support: Tuple[int, ...]

    @property
    def degree(self) -> int:
        return self.R + 1 - len(self.support)

    @cached_property
    def _roots(self) -> List[int]:
        s = set(self.support)
        return [k for k in range(self.R + 1) if k not in s]

    @cached_property
    def scale(self) -> Fraction:
        prod = 1
        for k in self._roots:
            prod *= -k
        return Fraction(1, prod)

    def __call__(self, x) -> Fraction:
        x = Fraction(x)
        if x.denominator == 1 and 0 <= x <= self.R and int(x) not in self.support:
            return Fraction(0)
        val = self.scale
        for k in self._roots:
            val *= (x - k)
        return val

    def coefficients(self) -> List[Fraction]:
        """Monomial coefficients, lowest degree first."""
        coef = [Fraction(1)]
        for k in self._roots:
            nxt = [Fraction(0)] * (len(coef) + 1)
            for a, cval in enumerate(coef):
                nxt[a + 1] += cval
                nxt[a] -= k * cval
            coef = nxt
        return [self.scale * cval for cval in coef]


def _binom_signed(R: int, i: int) -> int:
    return (-1) ** i * math.comb(R, i)


# ---------------------------------------------------------------- family

@dataclass(frozen=True)
class MomentFamily:
    R: int
    K: int
    u: Dict[int, Fraction]  # sparse: u(i) for i in the support, zero elsewhere

    @property
    def d(self) -> int:
        return self.R - self.K - 1

    @cached_property
    def support(self) -> Tuple[int, ...]:
        return tuple(sorted(self.u))

    @cached_property
    def Q(self) -> QPolynomial:
        return QPolynomial(self.R, self.support)

    @cached_property
    def U(self) -> Fraction:
        return sum((abs(v) for v in self.u.values()), Fraction(0))

    @cached_property
    def alpha(self) -> Fraction:
        return abs(self.u[0]) / (2 * self.U)

    @cached_property
    def beta(self) -> Fraction:
        return 2 * self.alpha

    def u_at(self, i: int) -> Fraction:
        return self.u.get(int(i), Fraction(0))

    def ratio(self) -> Fraction:
        return abs(self.u[0]) / self.U

    def base(self, i: int) -> Fraction:
        """Base pmf B(i)."""
        a = abs(int(i))
        if a > self.R:
            raise FamilyError(f"|i| = {a} exceeds R = {self.R}")
        if a == 0:
            return abs(self.u_at(0)) / (2 * self.U)
        if a == 1:
            return Fraction(1, 2) * (Fraction(1, 2) + abs(self.u_at(1)) / (2 * self.U))
        return Fraction(1, 2) * abs(self.u_at(a)) / (2 * self.U)

    def outcomes(self) -> List[int]:
        """Values with nonzero probability under some D_p (sorted)."""
        pos = sorted(set(self.support) | {1})
        pos = [i for i in pos if i != 0]
        return sorted([-i for i in pos] + [0] + pos)

    def describe(self) -> dict:
        return {"R": self.R, "K": self.K, "alpha": float(self.alpha), "beta": float(self.beta)}

    # samplers built lazily; the family itself stays immutable
    @cached_property
    def _alias(self):
        vals = np.array(self.outcomes(), dtype=np.int64)
        lo = AliasTable([float(pmf(self, self.alpha, int(v))) for v in vals])
        hi = AliasTable([float(pmf(self, self.beta, int(v))) for v in vals])
        return vals, lo, hi


def _check_p(fam: MomentFamily, p) -> Fraction:
    p = Fraction(p)
    if not (fam.alpha <= p <= fam.beta):
        raise FamilyError(f"p = {p} outside [alpha, beta]")
    return p


def pmf(fam: MomentFamily, p, i: int) -> Fraction:
    """D_p(i), exact."""
    p = _check_p(fam, p)
    a = abs(int(i))
    if a > fam.R:
        raise FamilyError(f"|i| = {a} exceeds R = {fam.R}")
    lam = p / fam.alpha - 1
    if a == 0:
        return fam.base(0) + lam * fam.u_at(0) / (2 * fam.U)
    return fam.base(a) + lam * fam.u_at(a) / (4 * fam.U)


def moment(fam: MomentFamily, p, k: int) -> Fraction:
    if k < 0:
        raise FamilyError("moment order must be >= 0")
    total = Fraction(0)
    for i in fam.outcomes():
        total += pmf(fam, p, i) * Fraction(i) ** k
    return total


def _auto_R(K: int, c_R: int) -> int:
    return c_R * K * K


def build_family(K: int, R: Optional[int] = None, c_R: int = 4, retries: int = 3) -> MomentFamily:
    if K < 1:
        raise FamilyError("K must be >= 1")
    R = _auto_R(K, c_R) if R is None else int(R)
    for attempt in range(retries + 1):
        if R < K + 2:
            R = K + 2
        supp = _lp_support(K, R)
        u = exact_weights(supp)
        fam = MomentFamily(R, K, u)
        if fam.ratio() > Fraction(1, 4) and not verify_family(fam, grid=0):
            return fam
        log.info("K=%d R=%d: ratio %.4f does not exceed 1/4, doubling R", K, R, float(fam.ratio()))
        R *= 2
    raise FamilyError(f"no feasible Q for K={K} after {retries} doublings; raise c_R")


def p_grid(fam: MomentFamily, count: int = 5) -> List[Fraction]:
    return [fam.alpha + (fam.beta - fam.alpha) * Fraction(k, count - 1) for k in range(count)]


def verify_family(fam: MomentFamily, grid: int = 5) -> List[str]:
    """Exact invariant checks; returns a list of violations (empty when valid)."""
    bad = []
    R, K, u, U = fam.R, fam.K, fam.u, fam.U
    if fam.Q.degree > R - K - 1:
        bad.append(f"deg Q = {fam.Q.degree} exceeds R-K-1 = {R - K - 1}")
    if any(i < 0 or i > R for i in u):
        bad.append("u has support outside [0, R]")
    if not u.get(0, 0) > 0:
        bad.append("u(0) must be positive")
    for t in range(K + 1):
        if sum((v * Fraction(i) ** t for i, v in u.items()), Fraction(0)) != 0:
            bad.append(f"moment identity fails at t={t}")
    if not fam.ratio() > Fraction(1, 4):
        bad.append(f"ratio {fam.ratio()} does not exceed 1/4")
    if R <= MAX_EXPLICIT_DEGREE:
        # u(i) must equal (-1)^i C(R,i) Q(i) on all of [0, R]
        for i in range(R + 1):
            if _binom_signed(R, i) * fam.Q(i) != fam.u_at(i):
                bad.append(f"u({i}) disagrees with Q")
                break
    if not (0 < fam.alpha < fam.beta <= 1):
        bad.append("need 0 < alpha < beta <= 1")
    for p in (p_grid(fam, grid) if grid else []):
        total = Fraction(0)
        for i in fam.outcomes():
            v = pmf(fam, p, i)
            if v < 0 or v > 1:
                bad.append(f"D_{p}({i}) = {v} outside [0,1]")
            if v != pmf(fam, p, -i):
                bad.append(f"D_{p} not symmetric at {i}")
            total += v
        if total != 1:
            bad.append(f"D_{p} has mass {total}")
        if pmf(fam, p, 0) != p:
            bad.append(f"D_{p}(0) != p")
        if pmf(fam, p, 1) < Fraction(1, 4) - abs(fam.u_at(1)) / (2 * U):
            bad.append(f"D_{p}(1) below its lower bound")
    if grid:
        ref = [moment(fam, fam.alpha, k) for k in range(K + 1)]
        for p in p_grid(fam, grid):
            for k in range(K + 1):
                if moment(fam, p, k) != ref[k]:
                    bad.append(f"moment {k} differs at p={p}")
    return bad


# ---------------------------------------------------------------- JSON

def _q(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _unq(s: str) -> Fraction:
    return Fraction(s)


def family_to_json(fam: MomentFamily) -> dict:
    obj = {
        "R": fam.R, "K": fam.K, "d": fam.d,
        "support": list(fam.support),
        "u": {str(i): _q(v) for i, v in sorted(fam.u.items())},
        "U": _q(fam.U), "alpha": _q(fam.alpha), "beta": _q(fam.beta),
        "B": {str(i): _q(fam.base(i)) for i in fam.outcomes() if i >= 0},
    }
    if fam.Q.degree <= MAX_EXPLICIT_DEGREE:
        obj["Q"] = {"form": "coefficients",
                    "coefficients": [_q(cv) for cv in fam.Q.coefficients()]}
    else:
        obj["Q"] = {"form": "product", "degree": fam.Q.degree,
                    "note": "Q(x) is the product of (x-k) over k in [0,R] outside support, scaled so Q(0)=1"}
    return obj


def family_from_json(obj: dict) -> MomentFamily:
    u = {int(i): _unq(v) for i, v in obj["u"].items()}
    fam = MomentFamily(int(obj["R"]), int(obj["K"]), u)
    stored = obj.get("Q", {})
    if stored.get("form") == "coefficients":
        coef = [_unq(cv) for cv in stored["coefficients"]]
        if coef != fam.Q.coefficients():
            raise FamilyError("stored Q coefficients disagree with the support")
    if _unq(obj["U"]) != fam.U or _unq(obj["alpha"]) != fam.alpha:
        raise FamilyError("stored U/alpha disagree with u")
    return fam


def save_family(fam: MomentFamily, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(family_to_json(fam), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_family(path) -> MomentFamily:
    with open(path, encoding="utf-8") as fh:
        return family_from_json(json.load(fh))


# ---------------------------------------------------------------- sampling

class AliasTable:
    """Vose's alias method over indices 0..k-1."""

    def __init__(self, probs: Sequence[float]):
        p = np.asarray(probs, dtype=np.float64)
        if np.any(p < 0) or p.sum() <= 0:
            raise ValueError("bad probabilities")
        p = p / p.sum()
        k = p.size
        scaled = p * k
        prob = np.zeros(k)
        alias = np.zeros(k, dtype=np.int64)
        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            s, g = small.pop(), large.pop()
            prob[s] = scaled[s]
            alias[s] = g
            scaled[g] = scaled[g] + scaled[s] - 1.0
            (small if scaled[g] < 1.0 else large).append(g)
        for i in large + small:
            prob[i] = 1.0
            alias[i] = i
        self.prob, self.alias, self.k = prob, alias, k

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        idx = rng.integers(0, self.k, size=size)
        coin = rng.random(size)
        return np.where(coin < self.prob[idx], idx, self.alias[idx])


@dataclass
class RoundSample:
    p: float
    v: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        if not np.array_equal(self.c, np.where(self.v != 0, 1, -1)):
            raise ValueError("c inconsistent with v")


def arcsine_bounds(alpha: float, beta: float) -> Tuple[float, float]:
    return math.asin(2 * float(alpha) - 1), math.asin(2 * float(beta) - 1)


def arcsine_constant(alpha, beta) -> float:
    """C_{alpha,beta}: normalizer of the density C / sqrt(p(1-p)) on [alpha, beta]."""
    a, b = arcsine_bounds(alpha, beta)
    return 1.0 / (b - a)


def arcsine_cdf(x, alpha, beta):
    a, b = arcsine_bounds(alpha, beta)
    x = np.clip(np.asarray(x, dtype=np.float64), float(alpha), float(beta))
    return (np.arcsin(2 * x - 1) - a) / (b - a)


def sample_arcsine(alpha, beta, rng: np.random.Generator, size=None):
    a, b = arcsine_bounds(alpha, beta)
    t = rng.random(size)
    return 0.5 * (1.0 + np.sin((1.0 - t) * a + t * b))


def sample_family(fam: MomentFamily, p, shape, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. draws from D_p, as the mixture (1-lam) D_alpha + lam D_beta."""
    p = float(p)
    a, b = float(fam.alpha), float(fam.beta)
    if not (a - 1e-12 <= p <= b + 1e-12):
        raise FamilyError(f"p = {p} outside [alpha, beta]")
    lam = min(max(p / a - 1.0, 0.0), 1.0)
    vals, lo, hi = fam._alias
    pick_hi = rng.random(shape) < lam
    out = np.empty(shape, dtype=np.int64)
    k = int(pick_hi.sum())
    out[pick_hi] = hi.sample(rng, k)
    out[~pick_hi] = lo.sample(rng, out.size - k)
    return vals[out]


def draw_round(fam: MomentFamily, n: int, rng: np.random.Generator) -> RoundSample:
    p = float(sample_arcsine(fam.alpha, fam.beta, rng))
    v = sample_family(fam, p, n, rng)
    return RoundSample(p, v, np.where(v != 0, 1, -1))


def sample_real(p: float, shape, rng: np.random.Generator) -> np.ndarray:
    """Bernoulli(p) times N(0, 1/p): zero w.p. 1-p, mean 0, variance 1."""
    if not (0 < p <= 1):
        raise FamilyError("real family needs p in (0, 1]")
    keep = rng.random(shape) < p
    return np.where(keep, rng.standard_normal(shape) / math.sqrt(p), 0.0)


def draw_real_round(p: float, n: int, rng: np.random.Generator) -> RoundSample:
    v = sample_real(p, n, rng)
    return RoundSample(float(p), v, np.where(v != 0, 1, -1))


# ---------------------------------------------------------------- scores

def phi(p: float, c: int) -> float:
    """Mean-0, variance-1 weight for a sign c that is -1 with probability p."""
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must lie in [0, 1]")
    if p == 0.0 or p == 1.0:
        return 0.0
    if c == 1:
        return -math.sqrt(p / (1.0 - p))
    if c == -1:
        return math.sqrt((1.0 - p) / p)
    raise ValueError("c must be +1 or -1")


def phi_vec(p: float, c: np.ndarray) -> np.ndarray:
    if p <= 0.0 or p >= 1.0:
        return np.zeros(c.shape)
    return np.where(c == 1, -math.sqrt(p / (1.0 - p)), math.sqrt((1.0 - p) / p))
