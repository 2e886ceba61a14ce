"""Confidence intervals, seed derivation and small statistical helpers."""
from __future__ import annotations

import math
from typing import Tuple

import numpy as np
from scipy.stats import norm

ROLE_TAGS = {"victim": 1, "attacker": 2, "checks": 3, "setup": 4}


def binomial_ci(successes: int, trials: int, confidence: float = 0.99) -> Tuple[float, float]:
    """Wilson score interval."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials")
    z = float(norm.ppf(0.5 + confidence / 2.0))
    ph = successes / trials
    z2n = z * z / trials
    centre = (ph + z2n / 2.0) / (1.0 + z2n)
    half = z * math.sqrt(ph * (1.0 - ph) / trials + z2n / (4.0 * trials)) / (1.0 + z2n)
    lo, hi = centre - half, centre + half
    if successes == 0:
        lo = 0.0
    if successes == trials:
        hi = 1.0
    return max(0.0, lo), min(1.0, hi)


def hoeffding_radius(m: int, delta: float) -> float:
    """Two-sided radius for the difference of two means of m samples each in [0, 1]."""
    return math.sqrt(2.0 * math.log(2.0 / delta) / m)


def hoeffding_samples(radius: float, delta: float) -> int:
    return int(math.ceil(2.0 * math.log(2.0 / delta) / (radius * radius)))


def substream(seed: int, role: str, trial: int = 0) -> np.random.Generator:
    """Independent generator for (seed, role, trial) via SeedSequence spawn keys."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(ROLE_TAGS[role], int(trial)))
    return np.random.Generator(np.random.PCG64(ss))


def ks_statistic(samples: np.ndarray, cdf) -> float:
    x = np.sort(np.asarray(samples, dtype=np.float64))
    m = x.size
    F = cdf(x)
    up = np.arange(1, m + 1) / m - F
    down = F - np.arange(0, m) / m
    return float(max(up.max(), down.max()))
