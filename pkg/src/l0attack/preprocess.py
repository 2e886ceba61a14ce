"""Analysis-side sketch decomposition for integer sketches.

A column j is significant when some combination y of the rows puts a 1/s
share of the fractional mass ||Frac(y^T A)||^2 on coordinate j. Significant
columns are zeroed one at a time and replaced by unit rows; the remaining
dense part D is what the moment-matched queries must fool.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .family import MomentFamily, pmf
from .linalg import INT, RingMatrix, frac, frac_exact

log = logging.getLogger(__name__)

Witness = List[Fraction]


def _as_int_rows(A) -> List[List[int]]:
    M = A.data if isinstance(A, RingMatrix) else np.asarray(A)
    return [[int(v) for v in row] for row in M]


def _rational(y) -> Optional[Witness]:
    out = []
    for v in y:
        if isinstance(v, (Fraction, int, np.integer)):
            out.append(Fraction(int(v)) if not isinstance(v, Fraction) else v)
        elif isinstance(v, str):
            out.append(Fraction(v))
        else:
            return None
    return out


def frac_profile(rows: List[List[int]], y: Witness) -> List[Fraction]:
    n = len(rows[0]) if rows else 0
    comb = [Fraction(0)] * n
    for yk, row in zip(y, rows):
        if yk == 0:
            continue
        for c, a in enumerate(row):
            if a:
                comb[c] += yk * a
    return [frac_exact(v) for v in comb]


def heaviness(A, y, j: int) -> Optional[Fraction]:
    """|Frac((y^T A)_j)|^2 / ||Frac(y^T A)||^2 exactly, or None when Frac vanishes."""
    rows = _as_int_rows(A)
    yq = _rational(y)
    if yq is None:
        raise TypeError("heaviness needs rational y")
    F = frac_profile(rows, yq)
    tot = sum(f * f for f in F)
    if tot == 0:
        return None
    return F[j] * F[j] / tot


def check_witness(A, y, j: int, s: float) -> bool:
    """|Frac((y^T A)_j)|^2 >= ||Frac(y^T A)||^2 / s (false when Frac(y^T A) = 0)."""
    if s < 1:
        raise ValueError("need s >= 1")
    rows = _as_int_rows(A)
    if len(y) != len(rows):
        raise ValueError("witness length must equal the number of rows")
    yq = _rational(y)
    if yq is not None:
        F = frac_profile(rows, yq)
        tot = sum(f * f for f in F)
        if tot == 0:
            return False
        return F[j] * F[j] >= tot / Fraction(s)
    F = frac(np.asarray(y, dtype=np.float64) @ np.asarray(rows, dtype=np.float64))
    tot = float(F @ F)
    if tot <= 1e-18:
        return False
    return F[j] ** 2 >= tot / s - 1e-9


def _candidates_a(rows, j) -> Iterable[Witness]:
    """Single rows scaled by reciprocals of their entries, plus half the column-j reciprocal."""
    m = len(rows)
    for k, row in enumerate(rows):
        scales = []
        for a in sorted({abs(v) for v in row if v}):
            scales.append(Fraction(1, a))
        if row[j]:
            scales.append(Fraction(1, 2 * abs(row[j])))
        seen = set()
        for sc in scales:
            if sc in seen:
                continue
            seen.add(sc)
            y = [Fraction(0)] * m
            y[k] = sc
            yield y


def _candidates_b(rows, rng: np.random.Generator, max_den: int = 64) -> Iterable[Witness]:
    m = len(rows)
    while True:
        y = [Fraction(0)] * m
        picks = rng.choice(m, size=min(m, int(rng.integers(1, 3))), replace=False)
        for k in picks:
            den = int(rng.integers(2, max_den + 1))
            num = int(rng.integers(1, den))
            y[int(k)] = Fraction(num, den)
        yield y


def search_witness(A, j: int, s: float, budget: int = 2000,
                   rng: Optional[np.random.Generator] = None) -> Optional[Witness]:
    """Best-effort witness search; None when nothing passes within `budget` candidates."""
    rows = _as_int_rows(A)
    if not rows:
        return None
    rng = rng if rng is not None else np.random.default_rng(0)
    thr = Fraction(1) / Fraction(s)
    best: Tuple[Fraction, Optional[Witness]] = (Fraction(-1), None)
    used = 0

    def score(y):
        F = frac_profile(rows, y)
        tot = sum(f * f for f in F)
        return None if tot == 0 else F[j] * F[j] / tot

    gen_b = _candidates_b(rows, rng)
    for y in itertools.chain(_candidates_a(rows, j), gen_b):
        if used >= budget // 2 and best[1] is not None:
            break
        if used >= budget:
            break
        used += 1
        h = score(y)
        if h is None:
            continue
        if h >= thr:
            return y
        if h > best[0]:
            best = (h, y)
    # coordinate descent from the best candidate
    if best[1] is None:
        return None
    y, h = list(best[1]), best[0]
    steps = [Fraction(1, d) for d in (2, 3, 4, 6, 8, 16, 32, 64)]
    improved = True
    while improved and used < budget:
        improved = False
        for k in range(len(rows)):
            for st in steps:
                for sign in (1, -1):
                    if used >= budget:
                        break
                    cand = list(y)
                    cand[k] += sign * st
                    used += 1
                    hc = score(cand)
                    if hc is not None and hc > h:
                        y, h, improved = cand, hc, True
                        if h >= thr:
                            return y
    return None


@dataclass
class Decomposition:
    D: RingMatrix
    S_rows: List[int]
    significant: List[int]
    s: float
    removal_log: List[dict]
    flagged: bool
    bound: float

    def strengthened(self) -> RingMatrix:
        """[D; e_j rows for significant j]."""
        n = self.D.cols
        units = np.zeros((len(self.S_rows), n), dtype=np.int64)
        for t, j in enumerate(self.S_rows):
            units[t, j] = 1
        return RingMatrix(INT, np.vstack([np.asarray(self.D.data, dtype=np.int64), units]))

    def to_json(self) -> dict:
        return {"D": self.D.to_json(), "S_rows": self.S_rows, "significant": self.significant,
                "s": self.s, "flagged": self.flagged, "bound": self.bound,
                "removal_log": [{"t": e["t"], "j": e["j"],
                                 "y": [f"{v.numerator}/{v.denominator}" for v in e["y"]],
                                 "column": e["column"]} for e in self.removal_log]}


def removal_bound(r: int, n: int, s: float, c_T: float = 1.0) -> float:
    return c_T * r * s * math.log(max(n, 2)) * max(math.log(s), 1.0)


def decompose(A, s: float, witness_source: Union[str, Sequence[Tuple[int, Sequence]]] = "search",
              budget: int = 2000, rng: Optional[np.random.Generator] = None,
              c_T: float = 1.0) -> Decomposition:
    """Zero certified columns until no candidate witness certifies any remaining column."""
    rows = _as_int_rows(A)
    r, n = len(rows), len(rows[0])
    rng = rng if rng is not None else np.random.default_rng(0)
    W = [list(row) for row in rows]
    removal: List[dict] = []
    thr = Fraction(1) / Fraction(s)
    supplied = None if witness_source == "search" else [(int(j), _rational(y)) for j, y in witness_source]

    def certifies(y, j):
        h = heaviness(W, y, j)
        return h is not None and h >= thr

    changed = True
    while changed:
        changed = False
        for j in range(n):
            if not any(W[k][j] for k in range(r)):
                continue
            cands = [e["y"] for e in removal]
            if supplied is not None:
                cands += [y for jj, y in supplied if jj == j]
            hit = next((y for y in cands if certifies(y, j)), None)
            if hit is None and supplied is None:
                y = search_witness(W, j, s, budget, rng)
                if y is not None and certifies(y, j):
                    hit = y
            if hit is None:
                continue
            removal.append({"t": len(removal) + 1, "j": j, "y": list(hit),
                            "column": [W[k][j] for k in range(r)]})
            for k in range(r):
                W[k][j] = 0
            changed = True
    sig = [e["j"] for e in removal]
    bound = removal_bound(r, n, s, c_T)
    flagged = len(sig) > bound
    if flagged:
        log.warning("removed %d columns, above the configured bound %.1f", len(sig), bound)
    return Decomposition(RingMatrix(INT, np.array(W, dtype=object)), list(sig), sorted(sig), s,
                         removal, flagged, bound)


def replay(A, removal_log: List[dict]) -> RingMatrix:
    W = np.array(_as_int_rows(A), dtype=object)
    for e in removal_log:
        W[:, e["j"]] = 0
    return RingMatrix(INT, W)


def verify_removal_log(A, dec: Decomposition) -> List[str]:
    """Re-check every logged witness against the intermediate matrix it was found on."""
    bad = []
    W = [list(row) for row in _as_int_rows(A)]
    thr = Fraction(1) / Fraction(dec.s)
    for e in dec.removal_log:
        h = heaviness(W, e["y"], e["j"])
        if h is None or h < thr:
            bad.append(f"witness at t={e['t']} does not certify column {e['j']}")
        if [W[k][e["j"]] for k in range(len(W))] != list(e["column"]):
            bad.append(f"logged column {e['j']} differs from the intermediate matrix")
        for k in range(len(W)):
            W[k][e["j"]] = 0
    if len(set(dec.S_rows)) != len(dec.S_rows):
        bad.append("unit rows repeat a column")
    return bad


def verify_reconstruction(A, dec: Decomposition) -> bool:
    """A equals D plus the logged columns placed back, so Ax is a function of A'x."""
    W = np.array(_as_int_rows(dec.D), dtype=object)
    for e in dec.removal_log:
        W[:, e["j"]] = np.array(e["column"], dtype=object)
    return bool(np.all(W == np.array(_as_int_rows(A), dtype=object)))


# ---------------------------------------------------------------- exact TV

ENUMERATION_LIMIT = 10 ** 7


def _check_size(fam: MomentFamily, n: int, limit: int):
    k = len(fam.outcomes())
    if k ** n > limit:
        raise ValueError(f"{k}^{n} query vectors exceed the enumeration limit {limit}")


def pushforward(D, fam: MomentFamily, p, limit: int = ENUMERATION_LIMIT) -> Dict[tuple, Fraction]:
    """Exact law of Dx for x ~ D_p^n, by convolving one column at a time."""
    rows = _as_int_rows(D)
    r, n = len(rows), len(rows[0])
    _check_size(fam, n, limit)
    law = [(v, pmf(fam, p, v)) for v in fam.outcomes()]
    law = [(v, w) for v, w in law if w]
    dist: Dict[tuple, Fraction] = {tuple([0] * r): Fraction(1)}
    for j in range(n):
        col = [rows[k][j] for k in range(r)]
        nxt: Dict[tuple, Fraction] = {}
        for key, w0 in dist.items():
            for v, w in law:
                k2 = tuple(a + v * c for a, c in zip(key, col))
                nxt[k2] = nxt.get(k2, Fraction(0)) + w0 * w
        dist = nxt
    return dist


def pushforward_enumerated(D, fam: MomentFamily, p, limit: int = ENUMERATION_LIMIT) -> Dict[tuple, Fraction]:
    """Same law by listing every query vector; the slow reference."""
    rows = _as_int_rows(D)
    r, n = len(rows), len(rows[0])
    _check_size(fam, n, limit)
    law = [(v, pmf(fam, p, v)) for v in fam.outcomes()]
    dist: Dict[tuple, Fraction] = {}
    for combo in itertools.product(law, repeat=n):
        w = Fraction(1)
        for _, wv in combo:
            w *= wv
        if not w:
            continue
        key = tuple(sum(rows[k][j] * combo[j][0] for j in range(n)) for k in range(r))
        dist[key] = dist.get(key, Fraction(0)) + w
    return dist


def tv_exact(P: Dict, Q: Dict) -> Fraction:
    keys = set(P) | set(Q)
    return sum((abs(P.get(k, Fraction(0)) - Q.get(k, Fraction(0))) for k in keys), Fraction(0)) / 2


def exact_pushforward_tv(D, fam: MomentFamily, p, q, limit: int = ENUMERATION_LIMIT) -> Fraction:
    return tv_exact(pushforward(D, fam, p, limit), pushforward(D, fam, q, limit))


def single_coordinate_tv(fam: MomentFamily, p, q) -> Fraction:
    return sum((abs(pmf(fam, p, v) - pmf(fam, q, v)) for v in fam.outcomes()), Fraction(0)) / 2
