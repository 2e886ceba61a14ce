"""Score attack over the reals, plus leverage-score column removal and the
Gaussian KL / subspace-embedding checks used to reason about it."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .attack_int import AttackResult, ScoreAttack
from .checks import CheckParams, RealDescriptor
from .family import arcsine_constant, sample_arcsine, sample_real
from .linalg import RingMatrix, leverage_scores

log = logging.getLogger(__name__)


@dataclass
class RealAttackParams:
    n: int
    r: int
    s: int = 2
    c_h: float = 1.0
    c_sigma: float = 1.0
    c_ell: float = 2.0
    alpha: float = 0.1
    beta: float = 0.9
    gamma: Optional[float] = None  # defaults to r
    kappa: float = 1e-6
    checks: CheckParams = field(default_factory=CheckParams)
    max_rounds: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.alpha < self.beta < 1:
            raise ValueError("need 0 < alpha < beta < 1")
        if self.s < 1:
            raise ValueError("need s >= 1")
        if self.gamma is None:
            self.gamma = float(self.r)
        if isinstance(self.checks, dict):
            self.checks = CheckParams(**self.checks)

    @property
    def h(self) -> float:
        return self.c_h * self.r ** 2 * self.s * math.log(max(self.r, 2))

    @property
    def sigma(self) -> float:
        return self.c_sigma * self.h * math.log(self.n)

    @property
    def ell(self) -> int:
        return int(math.ceil(self.c_ell * self.h * self.sigma))

    @property
    def rounds(self) -> int:
        return self.ell if self.max_rounds is None else min(self.ell, self.max_rounds)

    def to_json(self) -> dict:
        d = asdict(self)
        d.update(h=self.h, sigma=self.sigma, ell=self.ell,
                 C_alpha_beta=arcsine_constant(self.alpha, self.beta))
        return d


class RealAttack(ScoreAttack):
    def __init__(self, oracle, params: RealAttackParams, rng, check_rng,
                 check_failures: bool = True):
        if oracle.ring.kind != "real":
            raise ValueError("real attack needs a real-ring oracle")
        super().__init__(oracle, params.n, params.sigma, params.rounds, params.checks, rng,
                         check_rng, check_failures, params.to_json())
        self.params = params

    def draw(self):
        p = float(sample_arcsine(self.params.alpha, self.params.beta, self.rng))
        return p, sample_real(p, self.n, self.rng)

    def zero_prob(self, p):
        return 1.0 - p

    def endpoint_descriptors(self, mask):
        return [RealDescriptor(self.params.alpha, self.n, mask, "alpha"),
                RealDescriptor(self.params.beta, self.n, mask, "beta")]


def run_real_attack(oracle, params: RealAttackParams, rng, check_rng=None,
                    check_failures: bool = True, until=None) -> AttackResult:
    check_rng = check_rng if check_rng is not None else rng
    return RealAttack(oracle, params, rng, check_rng, check_failures).run(until)


# ---------------------------------------------------------------- removal

@dataclass
class RemovalReport:
    removed: List[int]
    leverage_at_removal: List[float]
    rank_drops: List[int]
    final_max_leverage: float
    bound: float
    flagged: bool

    def to_json(self) -> dict:
        return asdict(self)


def _svd_leverage(M: np.ndarray, cutoff: float = 1e-10) -> np.ndarray:
    """Leverage as squared column norms of the top right singular vectors."""
    if not np.any(M):
        return np.zeros(M.shape[1])
    _, sv, Vt = np.linalg.svd(M, full_matrices=False)
    keep = sv * sv > cutoff * sv[0] ** 2
    return np.sum(Vt[keep] ** 2, axis=0)


def remove_heavy_columns(A, s: float, c_T: float = 1.0, tol: float = 1e-12):
    """Zero the max-leverage column while it exceeds 1/s."""
    M = np.array(A.data if isinstance(A, RingMatrix) else A, dtype=np.float64)
    r, n = M.shape
    removed, levs, drops = [], [], []
    while np.any(M):
        lev = leverage_scores(M)
        j = int(np.argmax(lev))
        if lev[j] <= 1.0 / s + tol:
            break
        if lev[j] >= 1.0 - 1e-9:
            drops.append(j)
        removed.append(j)
        levs.append(float(lev[j]))
        M[:, j] = 0.0
    final = float(np.max(_svd_leverage(M))) if np.any(M) else 0.0
    bound = c_T * r * r * s * math.log(max(n * r, 2))
    report = RemovalReport(removed, levs, drops, final, bound, len(removed) > bound)
    out = RingMatrix(A.ring, M) if isinstance(A, RingMatrix) else M
    return out, report


# ---------------------------------------------------------------- Gaussians

def kl_gaussian(mu1, S1, mu2, S2) -> float:
    """KL(N(mu1, S1) || N(mu2, S2))."""
    mu1, mu2 = np.atleast_1d(np.asarray(mu1, float)), np.atleast_1d(np.asarray(mu2, float))
    S1, S2 = np.atleast_2d(np.asarray(S1, float)), np.atleast_2d(np.asarray(S2, float))
    k = mu1.size
    sign2, logdet2 = np.linalg.slogdet(S2)
    if sign2 <= 0 or np.linalg.cond(S2) > 1e12:
        raise np.linalg.LinAlgError("second covariance is singular")
    sign1, logdet1 = np.linalg.slogdet(S1)
    if sign1 <= 0:
        raise np.linalg.LinAlgError("first covariance is singular")
    diff = mu2 - mu1
    tr = np.trace(np.linalg.solve(S2, S1))
    quad = float(diff @ np.linalg.solve(S2, diff))
    return 0.5 * (logdet2 - logdet1 - k + tr + quad)


def gaussian_tv_empirical(mu1, s1, mu2, s2, m: int, rng) -> float:
    """|P1(S) - P2(S)| on samples, S = {f1 > f2} the set attaining the 1-d TV."""
    x1 = rng.normal(mu1, s1, m)
    x2 = rng.normal(mu2, s2, m)

    def in_s(x):
        l1 = -0.5 * ((x - mu1) / s1) ** 2 - math.log(s1)
        l2 = -0.5 * ((x - mu2) / s2) ** 2 - math.log(s2)
        return l1 > l2
    return abs(float(np.mean(in_s(x1)) - np.mean(in_s(x2))))


def pinsker_bound(kl: float) -> float:
    return math.sqrt(kl / 2.0)


# ---------------------------------------------------------------- embedding

def embedding_check(A, p: float, gamma: float, trials: int, rng, directions: int = 32) -> float:
    """Fraction of trials where column sampling (kept columns scaled by 1/sqrt(p))
    breaks the (1 +- 1/(gamma r)) two-sided bound for some tested direction."""
    M = np.asarray(A.data if isinstance(A, RingMatrix) else A, dtype=np.float64)
    r, n = M.shape
    eps = 1.0 / (gamma * r)
    X = rng.standard_normal((directions, r))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    X = np.vstack([X, np.eye(r)])
    full = np.sum((X @ M) ** 2, axis=1)
    bad = 0
    for _ in range(trials):
        keep = rng.random(n) < p
        B = M[:, keep] / math.sqrt(p)
        samp = np.sum((X @ B) ** 2, axis=1)
        ok = ((1 - eps) * samp <= full + 1e-12) & (full <= (1 + eps) * samp + 1e-12)
        bad += int(not np.all(ok))
    return bad / trials


# ---------------------------------------------------------------- victims

def validate_subdeterminants(A, kappa: float, max_order: int = 4, budget: int = 200_000) -> dict:
    """Smallest nonzero |minor| up to `max_order`, or an attestation when enumeration is too large."""
    M = np.asarray(A.data if isinstance(A, RingMatrix) else A, dtype=np.float64)
    r, n = M.shape
    nz_rows = np.count_nonzero(M, axis=1)
    if np.all(nz_rows == 1) and np.all(np.isin(M[M != 0], (1.0, -1.0))):
        # unit rows: every square minor is 0 or +-1
        return {"ok": kappa <= 1.0, "min_nonzero": 1.0, "method": "unit-row structure"}
    count = sum(math.comb(r, k) * math.comb(n, k) for k in range(1, min(max_order, r) + 1))
    if count > budget:
        return {"ok": None, "min_nonzero": None, "method": "attestation required"}
    best = math.inf
    for k in range(1, min(max_order, r) + 1):
        for rows in itertools.combinations(range(r), k):
            sub = M[list(rows)]
            for cols in itertools.combinations(range(n), k):
                d = abs(np.linalg.det(sub[:, list(cols)]))
                if d > 1e-12:
                    best = min(best, d)
    return {"ok": bool(best >= kappa), "min_nonzero": float(best), "method": "enumeration"}
