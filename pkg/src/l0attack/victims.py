"""Linear-sketch gap-norm victims, reachable only through a query oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .linalg import INT, REAL, Ring, RingMatrix, RingVector, ring_dot

Estimator = Callable[[np.ndarray], np.ndarray]  # (m, r) sketches -> (m,) in {-1, +1}


@dataclass(frozen=True)
class GapSpec:
    """Answer -1 required when l0 <= theta_lo, +1 when l0 >= theta_hi (absolute counts)."""
    theta_lo: float
    theta_hi: float

    def __post_init__(self):
        if not self.theta_lo < self.theta_hi:
            raise ValueError("need theta_lo < theta_hi")

    @classmethod
    def from_fractions(cls, lo: float, hi: float, n: int) -> "GapSpec":
        return cls(lo * n, hi * n)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.theta_lo + self.theta_hi)

    def required(self, l0) -> np.ndarray:
        """Required answer per l0 value; 0 where the promise is silent."""
        l0 = np.asarray(l0)
        return np.where(l0 <= self.theta_lo, -1, np.where(l0 >= self.theta_hi, 1, 0))

    def to_json(self) -> dict:
        return {"theta_lo": self.theta_lo, "theta_hi": self.theta_hi}


class SketchOracle:
    """f(Ax) behind a counter; the estimator sees only the sketch."""

    def __init__(self, A: RingMatrix, estimator: Estimator, gap: GapSpec, *,
                 kind: str = "custom", rng: Optional[np.random.Generator] = None,
                 truth: Optional[dict] = None):
        self._A = A
        self._f = estimator
        self.gap = gap
        self.kind = kind
        self.rng = rng
        self._truth = truth or {}
        self.query_count = 0

    @property
    def ring(self) -> Ring:
        return self._A.ring

    @property
    def n(self) -> int:
        return self._A.cols

    # analyst access, for verification only
    @property
    def analyst_matrix(self) -> RingMatrix:
        return self._A

    @property
    def analyst_truth(self) -> dict:
        return dict(self._truth)

    def query(self, x: RingVector) -> int:
        if x.ring != self.ring:
            raise ValueError(f"ring mismatch: {x.ring} vs {self.ring}")
        if x.dim != self.n:
            raise ValueError(f"dimension mismatch: {x.dim} vs {self.n}")
        return int(self._answer(x.data[None, :])[0])

    def query_many(self, X: np.ndarray, cols: Optional[Sequence[int]] = None) -> np.ndarray:
        """Answer each row of X; with `cols`, X holds only those coordinates (others zero)."""
        X = np.asarray(X)
        if X.ndim != 2:
            raise ValueError("expected a 2-d batch")
        if cols is None:
            if X.shape[1] != self.n:
                raise ValueError(f"dimension mismatch: {X.shape[1]} vs {self.n}")
            return self._answer(X)
        cols = np.asarray(cols, dtype=np.int64)
        if X.shape[1] != cols.size:
            raise ValueError("support batch width must match the column list")
        return self._answer(X, cols)

    def _answer(self, X: np.ndarray, cols=None) -> np.ndarray:
        if self.ring.kind == "fp":
            X = np.mod(X, self.ring.p)
        M = self._A.data if cols is None else self._A.data[:, cols]
        if X.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        sk = ring_dot(self.ring, M, X.T).T
        self.query_count += X.shape[0]
        out = np.asarray(self._f(sk), dtype=np.int64)
        return out


def _check_shape(n: int, r: int):
    if r > n:
        raise ValueError(f"sketch has more rows ({r}) than columns ({n})")
    if r < 1:
        raise ValueError("need at least one row")


def fraction_estimator(threshold: float) -> Estimator:
    """+1 iff the fraction of nonzero sketch entries is at least `threshold`."""
    def f(sk):
        return np.where(np.mean(sk != 0, axis=1) >= threshold - 1e-12, 1, -1)
    return f


def make_sampling_victim(n: int, r: int, gap: GapSpec, rng: np.random.Generator,
                         ring: Ring = INT) -> SketchOracle:
    """Rows are unit vectors on r hidden coordinates; answer by observed nonzero fraction."""
    _check_shape(n, r)
    hidden = np.sort(rng.choice(n, size=r, replace=False))
    A = np.zeros((r, n), dtype=np.float64 if ring.kind == "real" else np.int64)
    A[np.arange(r), hidden] = 1
    f = fraction_estimator(gap.midpoint / n)
    return SketchOracle(RingMatrix(ring, A), f, gap, kind="sampling",
                        truth={"hidden": [int(h) for h in hidden]})


def make_coordinate_victim(n: int, coordinate: int, gap: GapSpec, ring: Ring = INT) -> SketchOracle:
    """Observes one coordinate and answers +1 iff it is nonzero."""
    A = np.zeros((1, n), dtype=np.float64 if ring.kind == "real" else np.int64)
    A[0, coordinate] = 1
    return SketchOracle(RingMatrix(ring, A), fraction_estimator(1.0), gap, kind="coordinate",
                        truth={"hidden": [int(coordinate)]})


def make_constant_victim(n: int, r: int, gap: GapSpec, ring: Ring = INT, value: int = 1,
                         rng: Optional[np.random.Generator] = None) -> SketchOracle:
    _check_shape(n, r)
    rng = rng or np.random.default_rng(0)
    if ring.kind == "real":
        A = rng.standard_normal((r, n))
    elif ring.kind == "fp":
        A = rng.integers(0, ring.p, size=(r, n))
    else:
        A = rng.integers(-3, 4, size=(r, n))
    f = lambda sk: np.full(sk.shape[0], value, dtype=np.int64)
    return SketchOracle(RingMatrix(ring, A), f, gap, kind="constant", truth={"hidden": []})


def make_matrix_victim(A: RingMatrix, estimator: Estimator, gap: GapSpec) -> SketchOracle:
    return SketchOracle(A, estimator, gap, kind="matrix")


def bucket_estimator(levels: int, buckets: int, n: int, threshold: float) -> Estimator:
    """Linear-counting l0 estimate from the shallowest unsaturated level."""
    def f(sk):
        nz = (sk != 0).reshape(sk.shape[0], levels, buckets).sum(axis=2)  # (m, levels)
        ok = nz < buckets / 2.0
        first = np.where(ok.any(axis=1), ok.argmax(axis=1), -1)
        est = np.full(sk.shape[0], np.inf)
        has = first >= 0
        b = nz[has, first[has]]
        est[has] = (2.0 ** first[has]) * buckets * np.log(buckets / (buckets - b))
        return np.where(est >= threshold, 1, -1)
    return f


def make_bucket_victim(n: int, levels: int, buckets: int, ring: Ring, gap: GapSpec,
                       rng: np.random.Generator) -> SketchOracle:
    """Block l subsamples columns w.p. 2^-l and hashes them into `buckets` rows."""
    if levels < 1 or buckets < 2:
        raise ValueError("need levels >= 1 and buckets >= 2")
    r = levels * buckets
    _check_shape(n, r)
    A = np.zeros((r, n), dtype=np.float64 if ring.kind == "real" else np.int64)
    for lvl in range(levels):
        kept = np.nonzero(rng.random(n) < 2.0 ** (-lvl))[0]
        rows = lvl * buckets + rng.integers(0, buckets, size=kept.size)
        if ring.kind == "fp":
            coef = rng.integers(1, ring.p, size=kept.size)
        elif ring.kind == "int":
            coef = rng.choice(np.array([-1, 1]), size=kept.size) * rng.integers(1, 8, size=kept.size)
        else:
            coef = rng.standard_normal(kept.size)
        A[rows, kept] = coef
    f = bucket_estimator(levels, buckets, n, gap.midpoint)
    return SketchOracle(RingMatrix(ring, A), f, gap, kind="bucket",
                        truth={"levels": levels, "buckets": buckets})


def victim_from_config(cfg: dict, rng: np.random.Generator) -> SketchOracle:
    """Build a victim from its JSON config (thresholds are fractions of n unless gap_units='count')."""
    kind = cfg["kind"]
    n = int(cfg["n"])
    ring = Ring.parse(cfg.get("ring", "int"))
    lo, hi = float(cfg["theta_lo"]), float(cfg["theta_hi"])
    gap = GapSpec(lo, hi) if cfg.get("gap_units", "fraction") == "count" else GapSpec.from_fractions(lo, hi, n)
    if kind == "sampling":
        return make_sampling_victim(n, int(cfg["r"]), gap, rng, ring)
    if kind == "bucket":
        return make_bucket_victim(n, int(cfg["levels"]), int(cfg["buckets"]), ring, gap, rng)
    if kind == "constant":
        return make_constant_victim(n, int(cfg.get("r", 1)), gap, ring, int(cfg.get("value", 1)), rng)
    if kind == "coordinate":
        coord = int(cfg["coordinate"]) if "coordinate" in cfg else int(rng.integers(n))
        return make_coordinate_victim(n, coord, gap, ring)
    raise ValueError(f"unknown victim kind {kind!r}")


def calibration_error(oracle: SketchOracle, l0: int, trials: int, rng: np.random.Generator,
                      batch: int = 100) -> float:
    """Error rate on oblivious inputs with exactly `l0` nonzeros at random positions.

    Nonzero values are uniform in [-8, 8] minus 0 (integers), nonzero residues
    (F_p) or standard normals (reals).
    """
    n = oracle.n
    need = int(oracle.gap.required(l0))
    if need == 0:
        raise ValueError(f"l0={l0} lies inside the gap")
    wrong = 0
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        X = np.zeros((m, n), dtype=np.float64 if oracle.ring.kind == "real" else np.int64)
        for t in range(m):
            pos = rng.choice(n, size=l0, replace=False)
            if oracle.ring.kind == "real":
                X[t, pos] = rng.standard_normal(l0)
            elif oracle.ring.kind == "fp":
                X[t, pos] = rng.integers(1, oracle.ring.p, size=l0)
            else:
                X[t, pos] = rng.integers(1, 9, size=l0) * rng.choice(np.array([-1, 1]), size=l0)
        wrong += int(np.sum(oracle.query_many(X) != need))
        done += m
    return wrong / trials
