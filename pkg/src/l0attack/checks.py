"""Query distributions with analytic l0 laws, and the screen-then-confirm failure test."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binom

from .family import MomentFamily, sample_family, sample_real
from .stats import binomial_ci
from .victims import GapSpec, SketchOracle

# a descriptor has a required answer when its l0 lands on one side of the gap
# with at least this probability
CONCENTRATION = 0.9


class PreconditionError(ValueError):
    pass


class Descriptor:
    """A product distribution over query vectors; coordinates outside `cols` are zero."""
    n: int

    def cols(self) -> np.ndarray:
        raise NotImplementedError

    def nonzero_prob(self) -> float:
        raise NotImplementedError

    def sample_cols(self, m: int, rng: np.random.Generator) -> np.ndarray:
        """(m, len(cols)) values on the free coordinates."""
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        X = np.zeros((m, self.n), dtype=self._dtype)
        X[:, self.cols()] = self.sample_cols(m, rng)
        return X

    _dtype = np.int64

    def l0_tail(self, gap: GapSpec):
        k = len(self.cols())
        q = self.nonzero_prob()
        lo = float(binom.cdf(np.floor(gap.theta_lo), k, q))
        hi = float(binom.sf(np.ceil(gap.theta_hi) - 1, k, q))
        return lo, hi

    def required_answer(self, gap: GapSpec) -> int:
        cache = self.__dict__.setdefault("_required_cache", {})
        if gap not in cache:
            cache[gap] = self._required(gap)
        return cache[gap]

    def _required(self, gap: GapSpec) -> int:
        lo, hi = self.l0_tail(gap)
        if lo >= CONCENTRATION:
            return -1
        if hi >= CONCENTRATION:
            return 1
        raise PreconditionError(
            f"l0 of {self.describe()} does not concentrate outside the gap "
            f"(P[<=lo]={lo:.3f}, P[>=hi]={hi:.3f})")


def _free(n: int, mask: Optional[np.ndarray]) -> np.ndarray:
    if mask is None:
        return np.arange(n)
    return np.nonzero(~np.asarray(mask, dtype=bool))[0]


@dataclass
class FamilyDescriptor(Descriptor):
    """D_p^n over the integers with the masked coordinates zeroed."""
    fam: MomentFamily
    p: float
    n: int
    mask: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        self._cols = _free(self.n, self.mask)

    def cols(self):
        return self._cols

    def nonzero_prob(self):
        return 1.0 - float(self.p)

    def sample_cols(self, m, rng):
        return sample_family(self.fam, self.p, (m, self._cols.size), rng)

    def describe(self):
        return {"kind": "family", "label": self.label, "p": float(self.p), "n": self.n,
                "R": self.fam.R, "K": self.fam.K,
                "masked": [int(i) for i in np.setdiff1d(np.arange(self.n), self._cols)]}


@dataclass
class RealDescriptor(Descriptor):
    """Bernoulli(p) * N(0, 1/p) coordinates with the masked ones zeroed."""
    p: float
    n: int
    mask: Optional[np.ndarray] = None
    label: str = ""
    _dtype = np.float64

    def __post_init__(self):
        self._cols = _free(self.n, self.mask)

    def cols(self):
        return self._cols

    def nonzero_prob(self):
        return float(self.p)

    def sample_cols(self, m, rng):
        return sample_real(float(self.p), (m, self._cols.size), rng)

    def describe(self):
        return {"kind": "real", "label": self.label, "p": float(self.p), "n": self.n,
                "masked": [int(i) for i in np.setdiff1d(np.arange(self.n), self._cols)]}


@dataclass
class UniformSupportDescriptor(Descriptor):
    """Uniform over F_p on `support`, zero elsewhere."""
    prime: int
    n: int
    support: Sequence[int] = ()
    label: str = ""

    def __post_init__(self):
        self._cols = np.asarray(sorted(int(i) for i in self.support), dtype=np.int64)

    def cols(self):
        return self._cols

    def nonzero_prob(self):
        return 1.0 - 1.0 / self.prime

    def sample_cols(self, m, rng):
        return rng.integers(0, self.prime, size=(m, self._cols.size))

    def describe(self):
        return {"kind": "uniform_support", "label": self.label, "p": self.prime, "n": self.n,
                "support": [int(i) for i in self._cols]}


@dataclass
class CheckParams:
    screen_samples: int = 8
    fail_threshold: float = 1.0 / 3.0
    confirm_samples: int = 200
    confidence: float = 0.99
    declared_rate: float = 0.2

    def __post_init__(self):
        if self.screen_samples < 1 or self.confirm_samples < 1:
            raise ValueError("sample counts must be >= 1")
        if not 0 < self.fail_threshold <= 0.5:
            raise ValueError("fail_threshold must lie in (0, 1/2]")


@dataclass
class FailureCertificate:
    descriptor: dict
    required: int
    errors: int
    trials: int
    ci: tuple
    confidence: float
    declared_rate: float
    query_count: int
    round: Optional[int] = None

    @property
    def error_rate(self) -> float:
        return self.errors / self.trials

    def to_json(self) -> dict:
        return {"descriptor": self.descriptor, "required": self.required, "errors": self.errors,
                "trials": self.trials, "ci": [float(self.ci[0]), float(self.ci[1])],
                "confidence": self.confidence, "declared_rate": self.declared_rate,
                "query_count": self.query_count, "round": self.round}


def count_errors(oracle: SketchOracle, desc: Descriptor, m: int, rng) -> tuple:
    """(errors, trials) where a trial errs if its l0 has a required answer the victim misses."""
    Xc = desc.sample_cols(m, rng)
    ans = oracle.query_many(Xc, desc.cols())
    req = oracle.gap.required(np.count_nonzero(Xc, axis=1))
    return int(np.sum((req != 0) & (ans != req))), m


def check_failure(oracle: SketchOracle, desc: Descriptor, params: CheckParams,
                  rng: np.random.Generator, screen: bool = True,
                  round_index: Optional[int] = None) -> Optional[FailureCertificate]:
    required = desc.required_answer(oracle.gap)
    if screen:
        err, m = count_errors(oracle, desc, params.screen_samples, rng)
        if err / m < params.fail_threshold:
            return None
    err, m = count_errors(oracle, desc, params.confirm_samples, rng)
    ci = binomial_ci(err, m, params.confidence)
    if ci[0] < params.declared_rate:
        return None
    return FailureCertificate(desc.describe(), required, err, m, ci, params.confidence,
                              params.declared_rate, oracle.query_count, round_index)


def participating(descs, gap: GapSpec):
    """Split descriptors into those with a required answer and those skipped (with reasons)."""
    keep, skipped = [], []
    for d in descs:
        try:
            d.required_answer(gap)
            keep.append(d)
        except PreconditionError as exc:
            skipped.append({"descriptor": d.describe(), "reason": str(exc)})
    return keep, skipped
