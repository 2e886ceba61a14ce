"""Adaptive fingerprinting-score attack over the integers.

Each round draws p from the arcsine density, a query v ~ D_p^n with accused
coordinates zeroed, and adds the answer-weighted score to every coordinate.
Coordinates whose score crosses sigma are accused and masked from then on.
Before each round the victim is screened for failure on the masked endpoint
distributions; a confirmed failure ends the attack with a certificate.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .checks import (CheckParams, Descriptor, FailureCertificate, FamilyDescriptor,
                     check_failure, participating)
from .family import MomentFamily, phi_vec, sample_arcsine, sample_family
from .linalg import RingVector

log = logging.getLogger(__name__)


def oriented_weights(zero_prob: float, c: np.ndarray) -> np.ndarray:
    """Per-coordinate score weight -phi^q(c), q = Pr[coordinate is zero].

    The gap convention answers +1 on dense inputs, so a coordinate the victim
    reads pushes the answer up exactly when it is nonzero; negating phi makes
    that correlation positive. Mean 0 and variance 1 under the round's law.
    """
    return -phi_vec(zero_prob, c)


@dataclass
class IntAttackParams:
    n: int
    r: int
    s: int = 8
    c_h: float = 1.0
    c_sigma: float = 1.0
    c_ell: float = 2.0
    c_K: float = 1.0
    checks: CheckParams = field(default_factory=CheckParams)
    max_rounds: Optional[int] = None

    def __post_init__(self):
        if min(self.n, self.r, self.s) < 1:
            raise ValueError("n, r and s must be >= 1")
        if isinstance(self.checks, dict):
            self.checks = CheckParams(**self.checks)

    @property
    def h(self) -> float:
        return self.c_h * self.r * self.s * math.log(self.n)

    @property
    def sigma(self) -> float:
        return self.c_sigma * self.h * math.log(self.n)

    @property
    def ell(self) -> int:
        return int(math.ceil(self.c_ell * self.h * self.sigma))

    @property
    def rounds(self) -> int:
        return self.ell if self.max_rounds is None else min(self.ell, self.max_rounds)

    def family_K(self) -> int:
        return int(math.ceil(self.c_K * self.r * math.log(self.n)))

    def to_json(self) -> dict:
        d = asdict(self)
        d.update(h=self.h, sigma=self.sigma, ell=self.ell)
        return d


@dataclass
class AttackResult:
    certificate: Optional[FailureCertificate]
    accused: List[int]
    rounds: int
    query_count: int
    exhausted: bool
    transcript: dict

    @property
    def certified(self) -> bool:
        return self.certificate is not None


class ScoreAttack:
    """Round loop shared by the integer and real attacks."""

    def __init__(self, oracle, n: int, sigma: float, max_rounds: int, checks: CheckParams,
                 rng: np.random.Generator, check_rng: np.random.Generator,
                 check_failures: bool = True, params_json: Optional[dict] = None):
        if oracle.n != n:
            raise ValueError(f"oracle dimension {oracle.n} != {n}")
        self.oracle = oracle
        self.n = n
        self.sigma = sigma
        self.max_rounds = max_rounds
        self.checks = checks
        self.rng = rng
        self.check_rng = check_rng
        self.check_failures = check_failures
        self.scores = np.zeros(n)
        self.accused = np.zeros(n, dtype=bool)
        self.order: List[int] = []
        self.j = 0
        self.records: List[dict] = []
        self.skipped: List[dict] = []
        self.certificate: Optional[FailureCertificate] = None
        self.params_json = params_json or {}
        self._descs: Optional[list] = None

    # subclasses supply the round law
    def draw(self):
        raise NotImplementedError

    def zero_prob(self, p: float) -> float:
        raise NotImplementedError

    def endpoint_descriptors(self, mask: np.ndarray) -> List[Descriptor]:
        raise NotImplementedError

    def _active_descriptors(self):
        if self._descs is None:
            descs = self.endpoint_descriptors(self.accused.copy())
            self._descs, skipped = participating(descs, self.oracle.gap)
            for s in skipped:
                s["round"] = self.j + 1
                log.info("failure check skipped: %s", s["reason"])
            self.skipped.extend(skipped)
        return self._descs

    def step(self) -> Optional[FailureCertificate]:
        """One round: failure checks, then the scored query."""
        self.j += 1
        if self.check_failures:
            for d in self._active_descriptors():
                cert = check_failure(self.oracle, d, self.checks, self.check_rng, round_index=self.j)
                if cert is not None:
                    self.certificate = cert
                    # the round ends at its failure check; no scored query is sent
                    self.records.append({"j": self.j, "p": None, "a": None, "accused": []})
                    return cert
        p, v = self.draw()
        v[self.accused] = 0
        assert not np.any(v[self.accused]), "masked coordinate on the wire"
        c = np.where(v != 0, 1, -1)
        a = self.oracle.query(RingVector(self.oracle.ring, v))
        w = oriented_weights(self.zero_prob(p), c)
        live = ~self.accused
        self.scores[live] += a * w[live]
        new = np.nonzero(live & (self.scores > self.sigma))[0]
        if new.size:
            self.accused[new] = True
            self.order.extend(int(i) for i in new)
            self._descs = None
        self.records.append({"j": self.j, "p": float(p), "a": int(a),
                             "accused": [int(i) for i in new]})
        return None

    def final_check(self) -> Optional[FailureCertificate]:
        for d in self._active_descriptors():
            cert = check_failure(self.oracle, d, self.checks, self.check_rng, screen=False,
                                 round_index=self.j)
            if cert is not None:
                return cert
        return None

    def run(self, until: Optional[Callable[["ScoreAttack"], bool]] = None) -> AttackResult:
        exhausted = False
        while self.certificate is None:
            if self.j >= self.max_rounds:
                exhausted = True
                self.certificate = self.final_check()
                break
            self.step()
            if until is not None and until(self):
                break
        return self.result(exhausted)

    def result(self, exhausted: bool = False) -> AttackResult:
        cert = self.certificate
        transcript = {
            "params": self.params_json,
            "rounds": self.records,
            "certificate": cert.to_json() if cert else None,
            "no_certificate": cert is None,
            "accused": list(self.order),
            "skipped_checks": self.skipped,
            "query_count": self.oracle.query_count,
            "final_round": self.j,
        }
        return AttackResult(cert, list(self.order), self.j, self.oracle.query_count,
                            exhausted, transcript)


class IntegerAttack(ScoreAttack):
    def __init__(self, oracle, fam: MomentFamily, params: IntAttackParams,
                 rng: np.random.Generator, check_rng: np.random.Generator,
                 check_failures: bool = True):
        if oracle.ring.kind != "int":
            raise ValueError("integer attack needs an integer-ring oracle")
        if not fam.alpha < fam.beta:
            raise ValueError("degenerate family range")
        if fam.K < params.family_K():
            log.warning("family K=%d below c_K r log n = %d", fam.K, params.family_K())
        super().__init__(oracle, params.n, params.sigma, params.rounds, params.checks, rng,
                         check_rng, check_failures,
                         {**params.to_json(), "family": fam.describe()})
        self.fam = fam
        self.params = params

    def draw(self):
        p = float(sample_arcsine(self.fam.alpha, self.fam.beta, self.rng))
        return p, sample_family(self.fam, p, self.n, self.rng)

    def zero_prob(self, p):
        return p

    def endpoint_descriptors(self, mask):
        return [FamilyDescriptor(self.fam, float(self.fam.alpha), self.n, mask, "alpha"),
                FamilyDescriptor(self.fam, float(self.fam.beta), self.n, mask, "beta")]


def run_integer_attack(oracle, fam: MomentFamily, params: IntAttackParams,
                       rng: np.random.Generator, check_rng: Optional[np.random.Generator] = None,
                       check_failures: bool = True, until=None) -> AttackResult:
    check_rng = check_rng if check_rng is not None else rng
    return IntegerAttack(oracle, fam, params, rng, check_rng, check_failures).run(until)


def invisible_score_maxima(zero_probs_sampler, answer_sampler, rounds: int, trials: int,
                           rng: np.random.Generator, chunk: int = 20000) -> np.ndarray:
    """max_j |s^j| for a coordinate the victim never reads, one value per trial.

    `zero_probs_sampler(rng, shape)` gives the round's zero probability q and
    `answer_sampler(rng, q)` the victim's answers, drawn independently of the
    coordinate itself as they would be for an invisible coordinate.
    """
    s = np.zeros(trials)
    best = np.zeros(trials)
    done = 0
    while done < rounds:
        k = min(chunk, rounds - done)
        q = zero_probs_sampler(rng, (k, trials))
        a = answer_sampler(rng, q)
        c = np.where(rng.random((k, trials)) < q, -1, 1)
        w = np.where(c == 1, np.sqrt(q / (1 - q)), -np.sqrt((1 - q) / q))
        path = s + np.cumsum(a * w, axis=0)
        best = np.maximum(best, np.max(np.abs(path), axis=0))
        s = path[-1]
        done += k
    return best
