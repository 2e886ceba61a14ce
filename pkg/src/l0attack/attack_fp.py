"""Column-independence attack over F_p.

Grows a set T of sketch columns that are linearly independent, detecting a
new independent column as a change in the victim's output distribution when
one more random column joins the support. Once T spans the column space,
uniform queries on T and uniform queries on all of F_p^n give identical
sketch distributions but need opposite answers.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from .checks import (CheckParams, FailureCertificate, UniformSupportDescriptor,
                     check_failure, participating)
from .linalg import rank_fp
from .stats import hoeffding_radius

log = logging.getLogger(__name__)


@dataclass
class FpAttackParams:
    p: int
    n: int
    r: int
    c3: float = 4.0
    c4: float = 8.0
    delta: float = 1e-6
    checks: CheckParams = field(default_factory=CheckParams)
    audit: bool = True
    max_outer: Optional[int] = None

    def __post_init__(self):
        if self.r < 2:
            raise ValueError("need r >= 2")
        if isinstance(self.checks, dict):
            self.checks = CheckParams(**self.checks)

    @property
    def log_r(self) -> float:
        return math.log2(self.r)

    @property
    def levels(self) -> int:
        return int(math.ceil(5 + math.log2(self.log_r) + self.log_r)) if self.log_r > 1 else 5 + int(math.ceil(self.log_r))

    def m3(self, lvl: int) -> int:
        return max(1, int(math.ceil(self.c3 * (self.r / 2 ** lvl) * self.log_r)))

    def m4(self, lvl: int) -> int:
        return max(1, int(math.ceil(self.c4 * 4 ** lvl * self.log_r ** 2)))

    def tau(self, lvl: int) -> float:
        return 1.0 / (2 ** (lvl + 3) * self.log_r)

    def to_json(self) -> dict:
        d = asdict(self)
        d.update(levels=self.levels,
                 schedule=[{"level": l, "m3": self.m3(l), "m4": self.m4(l), "tau": self.tau(l)}
                           for l in range(1, self.levels + 1)])
        return d


@dataclass
class TVTest:
    distinct: bool
    estimate: float
    radius: float
    m: int


def tv_binary_test(oracle, desc_a, desc_b, m: int, tau: float, delta: float,
                   rng: np.random.Generator) -> TVTest:
    """Compare Pr[+1] under two query laws with m samples each.

    Distinct iff the gap estimate reaches tau/2 and also clears the Hoeffding
    radius at confidence 1 - delta, so equal laws are called distinct with
    probability at most delta whatever m is.
    """
    ya = oracle.query_many(desc_a.sample_cols(m, rng), desc_a.cols())
    yb = oracle.query_many(desc_b.sample_cols(m, rng), desc_b.cols())
    est = abs(float(np.mean(ya == 1)) - float(np.mean(yb == 1)))
    rad = hoeffding_radius(m, delta)
    return TVTest(est >= max(tau / 2.0, rad), est, rad, m)


def find_column(oracle, T: List[int], Rset: List[int], lvl: int, params: FpAttackParams,
                rng: np.random.Generator, ledger: Optional[list] = None, outer: int = 0) -> Optional[int]:
    if set(T) & set(Rset):
        raise ValueError("Rset must avoid T")
    m4, tau = params.m4(lvl), params.tau(lvl)
    for attempt in range(params.m3(lvl)):
        i = int(rng.integers(0, len(Rset)))
        da = UniformSupportDescriptor(params.p, params.n, list(T) + list(Rset[:i]))
        db = UniformSupportDescriptor(params.p, params.n, list(T) + list(Rset[: i + 1]))
        res = tv_binary_test(oracle, da, db, m4, tau, params.delta, rng)
        if ledger is not None:
            ledger.append({"outer": outer, "level": lvl, "attempt": attempt, "i": i,
                           "column": int(Rset[i]), "m": m4, "tau": tau,
                           "estimate": res.estimate, "radius": res.radius,
                           "distinct": res.distinct})
        if res.distinct:
            return int(Rset[i])
    return None


@dataclass
class FpResult:
    certificate: Optional[FailureCertificate]
    T: List[int]
    evidence: List[dict]
    query_count: int
    audit_ok: Optional[bool]
    transcript: dict

    @property
    def certified(self) -> bool:
        return self.certificate is not None


def _check_gap(oracle, params: FpAttackParams):
    gap = oracle.gap
    if params.n < 3 * params.r:
        raise ValueError(f"need n >= 3r for support headroom, got n={params.n}, r={params.r}")
    if gap.theta_lo < params.r:
        raise ValueError(f"theta_lo={gap.theta_lo} must be >= r={params.r} so support-T queries need -1")
    full = UniformSupportDescriptor(params.p, params.n, range(params.n))
    lo, hi = full.l0_tail(gap)
    if hi < 0.9:
        raise ValueError(f"theta_hi={gap.theta_hi} too large for uniform F_p^n queries")


def run_fp_attack(oracle, params: FpAttackParams, rng: np.random.Generator,
                  check_rng: Optional[np.random.Generator] = None) -> FpResult:
    if oracle.ring.kind != "fp" or oracle.ring.p != params.p:
        raise ValueError("oracle ring must be F_p with the configured p")
    _check_gap(oracle, params)
    check_rng = check_rng if check_rng is not None else rng
    n, r, p = params.n, params.r, params.p
    T: List[int] = []
    evidence: List[dict] = []
    ledger: List[dict] = []
    early: List[dict] = []
    skipped: List[dict] = []
    audit_ok: Optional[bool] = True if params.audit else None
    cert = None
    outer = 0
    saturated = False
    while len(T) < r:
        if params.max_outer is not None and outer >= params.max_outer:
            break
        outer += 1
        rest = np.setdiff1d(np.arange(n), T)
        Rset = [int(j) for j in rng.choice(rest, size=2 * r, replace=False)]
        descs = [UniformSupportDescriptor(p, n, T, "x1"),
                 UniformSupportDescriptor(p, n, T + Rset, "x2")]
        keep, skip = participating(descs, oracle.gap)
        for s in skip:
            s["outer"] = outer
        skipped.extend(skip)
        for d in keep:
            before = oracle.query_count
            cert = check_failure(oracle, d, params.checks, check_rng, round_index=outer)
            early.append({"outer": outer, "label": d.label, "queries": oracle.query_count - before,
                          "certified": cert is not None})
            if cert is not None:
                break
        if cert is not None:
            break
        found = None
        for lvl in range(1, params.levels + 1):
            found = find_column(oracle, T, Rset, lvl, params, rng, ledger, outer)
            if found is not None:
                T.append(found)
                ev = {"column": found, "level": lvl, "outer": outer,
                      "estimate": ledger[-1]["estimate"], "m": ledger[-1]["m"]}
                if params.audit:
                    A = oracle.analyst_matrix
                    rk_new = rank_fp(A.submatrix(T))
                    ev["rank_after"] = rk_new
                    ev["independent"] = rk_new == len(T)
                    if rk_new != len(T):
                        audit_ok = False
                        log.warning("audit: column %d is dependent on T", found)
                evidence.append(ev)
                break
        if found is None:
            saturated = True
            break
    final = None
    if cert is None:
        final_descs = [UniformSupportDescriptor(p, n, T, "support_T"),
                       UniformSupportDescriptor(p, n, range(n), "full")]
        for d in final_descs:
            before = oracle.query_count
            cert = check_failure(oracle, d, params.checks, check_rng, screen=False)
            final = {"label": d.label, "queries": oracle.query_count - before}
            if cert is not None:
                break
    test_queries = sum(2 * e["m"] for e in ledger)
    early_queries = sum(e["queries"] for e in early)
    final_queries = final["queries"] if final else 0
    transcript = {
        "params": params.to_json(),
        "T": list(T), "evidence": evidence, "tests": ledger, "early_exit": early,
        "skipped_checks": skipped, "final": final, "saturated": saturated,
        "certificate": cert.to_json() if cert else None, "no_certificate": cert is None,
        "query_count": oracle.query_count,
        "accounting": {"tests": test_queries, "early_exit": early_queries,
                       "final": final_queries,
                       "total": test_queries + early_queries + final_queries},
        "audit_ok": audit_ok,
    }
    return FpResult(cert, T, evidence, oracle.query_count, audit_ok, transcript)


def support_pushforward(A, support) -> dict:
    """Exact law of Ax for x uniform over F_p on `support` (zero elsewhere), as counts.

    Enumerates all p^|support| vectors; keys are sketch tuples, values the
    number of x mapping there (divide by p^|support| for probabilities).
    """
    p = A.ring.p
    cols = [int(j) for j in support]
    M = np.asarray(A.data, dtype=np.int64)[:, cols]
    out: dict = {}
    for x in itertools.product(range(p), repeat=len(cols)):
        key = tuple(int(v) for v in (M @ np.array(x, dtype=np.int64)) % p) if cols else \
            tuple([0] * A.rows)
        out[key] = out.get(key, 0) + 1
    return out
