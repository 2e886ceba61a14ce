"""Command-line entry point."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .attack_fp import FpAttackParams, run_fp_attack
from .attack_int import IntAttackParams, run_integer_attack
from .attack_real import RealAttackParams, run_real_attack
from .family import FamilyError, build_family, load_family, save_family, verify_family
from .harness import ConfigError, ExperimentConfig, dump_json, run_experiment
from .linalg import load_matrix
from .preprocess import decompose
from .stats import substream
from .victims import victim_from_config


def _load(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def cmd_family_build(a):
    fam = build_family(a.K, a.R, a.c_R)
    save_family(fam, a.out)
    print(f"K={fam.K} R={fam.R} alpha={float(fam.alpha):.6f} beta={float(fam.beta):.6f}")
    return 0


def cmd_family_verify(a):
    try:
        fam = load_family(a.path)
    except (FamilyError, KeyError, ValueError) as exc:
        print(f"invalid family file: {exc}", file=sys.stderr)
        return 1
    bad = verify_family(fam, grid=a.grid)
    for b in bad:
        print(b, file=sys.stderr)
    print("ok" if not bad else f"{len(bad)} violations")
    return 0 if not bad else 1


def cmd_preprocess(a):
    A = load_matrix(a.matrix)
    if A.ring.kind != "int":
        print("preprocess needs an integer matrix", file=sys.stderr)
        return 2
    dec = decompose(A, a.s, budget=a.budget, rng=substream(a.seed, "setup"))
    dump_json(dec.to_json(), a.out)
    print(f"significant={dec.significant} flagged={dec.flagged}")
    return 0


def _victim(a):
    return victim_from_config(_load(a.victim), substream(a.seed, "victim"))


def _score_params(cls, a, oracle):
    cfg = _load(a.victim)
    base = {"n": oracle.n}
    r = a.r if a.r is not None else cfg.get("r")
    if r is None and "levels" in cfg:
        r = int(cfg["levels"]) * int(cfg["buckets"])
    if r is not None:
        base["r"] = int(r)
    extra = _load(a.params) if a.params else {}
    if "r" not in base and "r" not in extra:
        raise SystemExit("the victim row count r is unknown; pass --r with an assumed bound")
    return cls(**{**base, **extra})


def _finish(res, out):
    dump_json(res.transcript, out)
    print(f"certified={res.certified} queries={res.query_count}")
    return 0 if res.certified else 1


def cmd_attack_int(a):
    oracle = _victim(a)
    params = _score_params(IntAttackParams, a, oracle)
    fam = load_family(a.family) if a.family else build_family(params.family_K())
    res = run_integer_attack(oracle, fam, params, substream(a.seed, "attacker"),
                             substream(a.seed, "checks"))
    return _finish(res, a.out)


def cmd_attack_real(a):
    oracle = _victim(a)
    params = _score_params(RealAttackParams, a, oracle)
    res = run_real_attack(oracle, params, substream(a.seed, "attacker"), substream(a.seed, "checks"))
    return _finish(res, a.out)


def cmd_attack_fp(a):
    oracle = _victim(a)
    extra = _load(a.params) if a.params else {}
    params = FpAttackParams(**{"p": a.p, "n": oracle.n, "r": a.r, **extra})
    res = run_fp_attack(oracle, params, substream(a.seed, "attacker"), substream(a.seed, "checks"))
    return _finish(res, a.out)


def cmd_bench(a):
    try:
        obj = _load(a.config)
        if a.seed is not None:
            obj["seed"] = a.seed
        if a.out_dir:
            obj["out_dir"] = a.out_dir
        cfg = ExperimentConfig.from_json(obj)
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    report = run_experiment(cfg)
    agg = report["aggregate"]
    print(f"success_rate={agg['success_rate']:.3f} trials={agg['trials']} passed={report['passed']}")
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="l0attack", description="Adaptive attacks on linear l0 sketches")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    fam = sub.add_parser("family", help="build or verify a moment-matched family")
    fsub = fam.add_subparsers(dest="fcmd", required=True)
    b = fsub.add_parser("build")
    b.add_argument("--K", type=int, required=True)
    b.add_argument("--R", type=int, default=None)
    b.add_argument("--c-R", dest="c_R", type=int, default=4)
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int, default=0, help="accepted for uniformity; construction is deterministic")
    b.set_defaults(fn=cmd_family_build)
    v = fsub.add_parser("verify")
    v.add_argument("path")
    v.add_argument("--grid", type=int, default=5)
    v.add_argument("--seed", type=int, default=0, help="accepted for uniformity")
    v.set_defaults(fn=cmd_family_verify)

    pp = sub.add_parser("preprocess", help="decompose an integer sketch matrix")
    pp.add_argument("--matrix", required=True)
    pp.add_argument("--s", type=float, required=True)
    pp.add_argument("--out", required=True)
    pp.add_argument("--budget", type=int, default=2000)
    pp.add_argument("--seed", type=int, default=0)
    pp.set_defaults(fn=cmd_preprocess)

    ai = sub.add_parser("attack-int", help="score attack over the integers")
    ai.add_argument("--victim", required=True)
    ai.add_argument("--family")
    ai.add_argument("--params")
    ai.add_argument("--r", type=int, default=None, help="assumed victim row count")
    ai.add_argument("--seed", type=int, default=0)
    ai.add_argument("--out", required=True)
    ai.set_defaults(fn=cmd_attack_int)

    af = sub.add_parser("attack-fp", help="column-independence attack over F_p")
    af.add_argument("--victim", required=True)
    af.add_argument("--p", type=int, required=True)
    af.add_argument("--r", type=int, required=True)
    af.add_argument("--params")
    af.add_argument("--seed", type=int, default=0)
    af.add_argument("--out", required=True)
    af.set_defaults(fn=cmd_attack_fp)

    ar = sub.add_parser("attack-real", help="score attack over the reals")
    ar.add_argument("--victim", required=True)
    ar.add_argument("--params")
    ar.add_argument("--r", type=int, default=None, help="assumed victim row count")
    ar.add_argument("--seed", type=int, default=0)
    ar.add_argument("--out", required=True)
    ar.set_defaults(fn=cmd_attack_real)

    bn = sub.add_parser("bench", help="run a multi-trial experiment from a config")
    bn.add_argument("--config", required=True)
    bn.add_argument("--seed", type=int, default=None)
    bn.add_argument("--out-dir", default=None)
    bn.set_defaults(fn=cmd_bench)
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    return a.fn(a)


if __name__ == "__main__":
    sys.exit(main())
