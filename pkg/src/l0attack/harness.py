"""Seeded multi-trial experiments with deterministic reports."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .attack_fp import FpAttackParams, run_fp_attack
from .attack_int import IntAttackParams, run_integer_attack
from .attack_real import RealAttackParams, run_real_attack
from .family import build_family, family_from_json
from .linalg import Ring
from .stats import binomial_ci, substream
from .victims import victim_from_config

log = logging.getLogger(__name__)

WORKERS_ENV = "L0ATTACK_WORKERS"
RING_FOR_ATTACK = {"int": "int", "real": "real", "fp": "fp"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    attack: str
    victim: dict
    params: dict = field(default_factory=dict)
    trials: int = 1
    seed: int = 0
    success_rate: float = 0.9
    family: Optional[dict] = None
    out_dir: Optional[str] = None

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        known = {"attack", "victim", "params", "trials", "seed", "success_rate", "family", "out_dir"}
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        cfg = cls(**obj)
        cfg.validate()
        return cfg

    def validate(self):
        errs = []
        if self.attack not in RING_FOR_ATTACK:
            errs.append(f"attack: must be one of {sorted(RING_FOR_ATTACK)}")
        if not isinstance(self.trials, int) or self.trials < 1:
            errs.append("trials: must be an integer >= 1")
        if not 0 <= self.success_rate <= 1:
            errs.append("success_rate: must lie in [0, 1]")
        for key in ("kind", "n", "theta_lo", "theta_hi"):
            if key not in self.victim:
                errs.append(f"victim.{key}: required")
        ring = self.victim.get("ring", "int")
        try:
            kind = Ring.parse(ring).kind
        except ValueError as exc:
            errs.append(f"victim.ring: {exc}")
            kind = None
        if kind is not None and self.attack in RING_FOR_ATTACK and kind != RING_FOR_ATTACK[self.attack]:
            errs.append(f"victim.ring: {ring} does not match attack {self.attack}")
        if self.victim.get("theta_lo", 0) >= self.victim.get("theta_hi", 1):
            errs.append("victim.theta_lo: must be below theta_hi")
        if errs:
            raise ConfigError("; ".join(errs))


def _params(cfg: ExperimentConfig):
    n = int(cfg.victim["n"])
    p = dict(cfg.params)
    if "r" in cfg.victim:
        p.setdefault("r", int(cfg.victim["r"]))
    elif "levels" in cfg.victim:
        p.setdefault("r", int(cfg.victim["levels"]) * int(cfg.victim["buckets"]))
    if cfg.attack == "int":
        p.setdefault("n", n)
        return IntAttackParams(**p)
    if cfg.attack == "real":
        p.setdefault("n", n)
        return RealAttackParams(**p)
    p.setdefault("n", n)
    p.setdefault("p", Ring.parse(cfg.victim["ring"]).p)
    return FpAttackParams(**p)


def _family(cfg: ExperimentConfig, params):
    if cfg.family and "u" in cfg.family:
        return family_from_json(cfg.family)
    spec = cfg.family or {}
    K = int(spec.get("K", params.family_K()))
    return build_family(K, spec.get("R"), int(spec.get("c_R", 4)))


def run_trial(cfg: ExperimentConfig, trial: int, fam=None) -> dict:
    """One independent trial; returns its report row and transcript."""
    params = _params(cfg)
    oracle = victim_from_config(cfg.victim, substream(cfg.seed, "victim", trial))
    rng = substream(cfg.seed, "attacker", trial)
    crng = substream(cfg.seed, "checks", trial)
    t0 = time.perf_counter()
    row = {"trial": trial}
    if cfg.attack == "int":
        res = run_integer_attack(oracle, fam, params, rng, crng)
    elif cfg.attack == "real":
        res = run_real_attack(oracle, params, rng, crng)
    else:
        res = run_fp_attack(oracle, params, rng, crng)
    row["certified"] = res.certified
    row["query_count"] = int(oracle.query_count)
    if cfg.attack in ("int", "real"):
        hidden = set(oracle.analyst_truth.get("hidden", []))
        acc = list(res.accused)
        false = [i for i in acc if i not in hidden]
        row.update(rounds=res.rounds, accused=acc, false_accusations=len(false),
                   precision=(1.0 - len(false) / len(acc)) if acc else None,
                   recall=(len(set(acc) & hidden) / len(hidden)) if hidden else None)
    else:
        row.update(T=list(res.T), audit_ok=res.audit_ok)
    cert = res.certificate
    row["certificate_label"] = cert.descriptor.get("label") if cert else None
    log.info("trial %d done in %.2fs", trial, time.perf_counter() - t0)
    return {"row": row, "transcript": res.transcript}


def _run_one(args):
    cfg, trial, fam = args
    return run_trial(cfg, trial, fam)


def aggregate(rows: List[dict]) -> dict:
    t = len(rows)
    succ = sum(1 for r in rows if r["certified"])
    qs = [r["query_count"] for r in rows]
    agg = {"trials": t, "successes": succ, "success_rate": succ / t,
           "success_ci95": list(binomial_ci(succ, t, 0.95)),
           "mean_queries": statistics.fmean(qs), "median_queries": float(statistics.median(qs))}
    if rows and "false_accusations" in rows[0]:
        clean = sum(1 for r in rows if r["false_accusations"] == 0)
        agg["no_false_accusation_trials"] = clean
    if rows and "audit_ok" in rows[0]:
        agg["audit_ok_trials"] = sum(1 for r in rows if r["audit_ok"])
    return agg


def validate_report(report: dict) -> List[str]:
    """Schema and recomputation checks; returns problems (empty when valid)."""
    bad = []
    for key in ("config", "rows", "aggregate", "passed"):
        if key not in report:
            bad.append(f"missing field {key}")
    if bad:
        return bad
    for r in report["rows"]:
        for key in ("trial", "certified", "query_count"):
            if key not in r:
                bad.append(f"row missing {key}")
    if bad:
        return bad
    if aggregate(report["rows"]) != report["aggregate"]:
        bad.append("aggregate does not match the rows")
    return bad


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None,
                   write: bool = True) -> dict:
    cfg.validate()
    params = _params(cfg)
    fam = _family(cfg, params) if cfg.attack == "int" else None
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    jobs = [(cfg, t, fam) for t in range(cfg.trials)]
    if workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    rows = [r["row"] for r in results]
    agg = aggregate(rows)
    report = {"config": _cfg_json(cfg), "rows": rows, "aggregate": agg,
              "passed": agg["success_rate"] >= cfg.success_rate}
    if write and cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for t, r in enumerate(results):
            dump_json(r["transcript"], out / f"transcript_{t:03d}.json")
        dump_json(report, out / "report.json")
        (out / "metrics.csv").write_text(rows_to_csv(rows), encoding="utf-8")
    return report


def _cfg_json(cfg: ExperimentConfig) -> dict:
    return {"attack": cfg.attack, "victim": cfg.victim, "params": cfg.params,
            "trials": cfg.trials, "seed": cfg.seed, "success_rate": cfg.success_rate,
            "family": cfg.family}


def rows_to_csv(rows: List[dict]) -> str:
    keys = sorted({k for r in rows for k in r})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: json.dumps(r[k], sort_keys=True) if isinstance(r.get(k), (list, dict))
                    else r.get(k) for k in keys})
    return buf.getvalue()


def _default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, default=_default)
        fh.write("\n")
