"""Adaptive attacks on linear sketches for l0 gap estimation."""
from .linalg import INT, REAL, Fp, Ring, RingMatrix, RingVector, matvec, rank_fp, frac, leverage_scores
from .family import (MomentFamily, build_family, pmf, moment, phi, draw_round, draw_real_round,
                     verify_family)
from .victims import (GapSpec, SketchOracle, make_sampling_victim, make_bucket_victim,
                      make_constant_victim, make_coordinate_victim)
from .checks import CheckParams, FailureCertificate, check_failure
from .attack_int import IntAttackParams, run_integer_attack
from .attack_fp import FpAttackParams, find_column, run_fp_attack, tv_binary_test
from .attack_real import (RealAttackParams, embedding_check, kl_gaussian, remove_heavy_columns,
                          run_real_attack)
from .preprocess import check_witness, decompose, exact_pushforward_tv, search_witness
from .stats import binomial_ci

__version__ = "0.1.0"
