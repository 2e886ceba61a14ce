"""Ring-tagged dense matrices and vectors: integers, prime fields and reals."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

INT_BOUND_DEFAULT = 2 ** 32
_INT64_SAFE = 2 ** 62


@dataclass(frozen=True)
class Ring:
    kind: str  # "int" | "fp" | "real"
    p: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("int", "fp", "real"):
            raise ValueError(f"unknown ring kind {self.kind!r}")
        if self.kind == "fp":
            if self.p is None or not _is_prime(self.p):
                raise ValueError(f"fp ring needs a prime modulus, got {self.p}")
        elif self.p is not None:
            raise ValueError("only fp rings carry a modulus")

    @classmethod
    def parse(cls, tag: str) -> "Ring":
        if tag.startswith("fp:"):
            return cls("fp", int(tag[3:]))
        return cls(tag)

    def tag(self) -> str:
        return f"fp:{self.p}" if self.kind == "fp" else self.kind

    def __str__(self):
        return self.tag()


INT = Ring("int")
REAL = Ring("real")


def Fp(p: int) -> Ring:
    return Ring("fp", p)


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    k = 3
    while k * k <= p:
        if p % k == 0:
            return False
        k += 2
    return True


def _coerce(ring: Ring, data, bound: Optional[int]) -> np.ndarray:
    arr = np.asarray(data)
    if ring.kind == "real":
        arr = np.asarray(arr, dtype=np.float64)
        return arr
    if arr.dtype == object:
        vals = [int(v) for v in arr.ravel()]
        big = max((abs(v) for v in vals), default=0)
        if big < _INT64_SAFE:
            arr = np.array(vals, dtype=np.int64).reshape(arr.shape)
        else:
            arr = np.array(vals, dtype=object).reshape(arr.shape)
    elif arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise ValueError("integer ring needs integral entries")
        arr = arr.astype(np.int64)
    elif arr.dtype.kind in "iub":
        arr = arr.astype(np.int64)
    else:
        raise TypeError(f"unsupported dtype {arr.dtype}")
    if ring.kind == "fp":
        return np.mod(arr, ring.p).astype(np.int64)
    if bound is not None and arr.size and max(abs(int(arr.max())), abs(int(arr.min()))) > bound:
        raise ValueError(f"integer entries exceed magnitude bound {bound}")
    return arr


@dataclass(frozen=True, eq=False)
class RingMatrix:
    ring: Ring
    data: np.ndarray
    bound: int = INT_BOUND_DEFAULT

    def __post_init__(self):
        arr = _coerce(self.ring, self.data, self.bound)
        if arr.ndim != 2:
            raise ValueError("matrix data must be 2-d")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def column(self, j: int) -> np.ndarray:
        return self.data[:, j].copy()

    def submatrix(self, cols: Sequence[int]) -> "RingMatrix":
        return RingMatrix(self.ring, self.data[:, list(cols)], self.bound)

    def with_data(self, data) -> "RingMatrix":
        return RingMatrix(self.ring, data, self.bound)

    def __eq__(self, other):
        return (isinstance(other, RingMatrix) and self.ring == other.ring
                and self.shape == other.shape and bool(np.all(self.data == other.data)))

    def to_json(self) -> dict:
        return {"ring": self.ring.tag(), "rows": self.rows, "cols": self.cols,
                "data": _jsonable(self.data)}

    @classmethod
    def from_json(cls, obj: dict) -> "RingMatrix":
        ring = Ring.parse(obj["ring"])
        r, n = int(obj["rows"]), int(obj["cols"])
        flat = obj["data"]
        arr = np.array(flat, dtype=np.float64 if ring.kind == "real" else object)
        arr = arr.reshape(r, n)
        return cls(ring, arr)


@dataclass(frozen=True, eq=False)
class RingVector:
    ring: Ring
    data: np.ndarray
    support: Optional[frozenset] = None

    def __post_init__(self):
        # vectors hold sketches too, which may exceed the matrix entry bound
        arr = _coerce(self.ring, self.data, None)
        if arr.ndim != 1:
            raise ValueError("vector data must be 1-d")
        if self.support is not None:
            sup = frozenset(int(i) for i in self.support)
            mask = np.ones(arr.shape[0], dtype=bool)
            mask[list(sup)] = False
            if np.any(arr[mask] != 0):
                raise ValueError("nonzero entry outside the support descriptor")
            object.__setattr__(self, "support", sup)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def l0(self) -> int:
        return int(np.count_nonzero(self.data))

    def __eq__(self, other):
        return (isinstance(other, RingVector) and self.ring == other.ring
                and self.dim == other.dim and bool(np.all(self.data == other.data)))

    def __add__(self, other: "RingVector") -> "RingVector":
        if self.ring != other.ring or self.dim != other.dim:
            raise ValueError("ring or dimension mismatch")
        if self.ring.kind == "int":
            s = self.data.astype(object) + other.data.astype(object)
        else:
            s = self.data + other.data
        return RingVector(self.ring, s)

    def to_json(self) -> dict:
        return {"ring": self.ring.tag(), "dim": self.dim, "data": _jsonable(self.data)}


def _jsonable(arr: np.ndarray) -> list:
    if arr.dtype.kind == "f":
        return [float(v) for v in arr.ravel()]
    return [int(v) for v in arr.ravel()]


def matvec(A: RingMatrix, x: RingVector) -> RingVector:
    """Exact product Ax in A's ring."""
    if A.ring != x.ring:
        raise ValueError(f"ring mismatch: {A.ring} vs {x.ring}")
    if A.cols != x.dim:
        raise ValueError(f"dimension mismatch: {A.cols} columns vs dim {x.dim}")
    return RingVector(A.ring, ring_dot(A.ring, A.data, x.data[:, None])[:, 0])


def ring_dot(ring: Ring, M: np.ndarray, X: np.ndarray) -> np.ndarray:
    """M @ X in `ring`; X holds one query per column.

    Falls back to Python integers whenever an int64 accumulation could overflow.
    """
    if ring.kind == "real":
        return np.asarray(M, dtype=np.float64) @ np.asarray(X, dtype=np.float64)
    k = M.shape[1]
    mmax = int(np.max(np.abs(M))) if M.size else 0
    xmax = int(np.max(np.abs(X))) if X.size else 0
    if M.dtype != object and X.dtype != object and mmax * xmax * max(k, 1) < _INT64_SAFE:
        out = M.astype(np.int64) @ X.astype(np.int64)
    else:
        out = np.asarray(M, dtype=object).dot(np.asarray(X, dtype=object))
    if ring.kind == "fp":
        out = np.mod(out, ring.p)
        return out.astype(np.int64)
    return out


def _rref_rank_mod(M: np.ndarray, p: int, col_order: Optional[Sequence[int]] = None) -> int:
    mat = np.array(M, dtype=np.int64) % p
    rows, cols = mat.shape
    order = list(range(cols)) if col_order is None else list(col_order)
    rank = 0
    for c in order:
        if rank == rows:
            break
        piv = np.nonzero(mat[rank:, c])[0]
        if piv.size == 0:
            continue
        pr = rank + int(piv[0])
        if pr != rank:
            mat[[rank, pr]] = mat[[pr, rank]]
        inv = pow(int(mat[rank, c]), p - 2, p)
        mat[rank] = (mat[rank] * inv) % p
        others = np.nonzero(mat[:, c])[0]
        for rr in others:
            if rr != rank:
                mat[rr] = (mat[rr] - mat[rr, c] * mat[rank]) % p
        rank += 1
    return rank


def rank_fp(A: RingMatrix, col_order: Optional[Sequence[int]] = None) -> int:
    """Rank over F_p by Gauss-Jordan elimination; `col_order` sets the pivot scan."""
    if A.ring.kind != "fp":
        raise ValueError("rank_fp needs an fp ring")
    return _rref_rank_mod(A.data, A.ring.p, col_order)


def greedy_independent_columns(A: RingMatrix, order: Iterable[int]) -> list:
    """Columns kept by scanning `order` and keeping each one that raises the rank."""
    kept: list = []
    rank = 0
    for j in order:
        trial = kept + [j]
        rk = rank_fp(A.submatrix(trial))
        if rk > rank:
            kept, rank = trial, rk
    return kept


def frac(v) -> np.ndarray:
    """x - nearest integer, valued in (-1/2, 1/2]; exact halves go to +1/2."""
    arr = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("frac needs finite entries")
    # ceil(x - 1/2) is the nearest integer with halves rounded down, so the
    # remainder lands in (-1/2, 1/2]
    nearest = np.ceil(arr - 0.5)
    return arr - nearest


def frac_exact(x: Fraction) -> Fraction:
    x = Fraction(x)
    return x - math.ceil(x - Fraction(1, 2))


def leverage_scores(A, cutoff: float = 1e-10) -> np.ndarray:
    """l_i = a_i^T (A A^T)^+ a_i via an eigendecomposition of the Gram matrix."""
    M = A.data if isinstance(A, RingMatrix) else A
    M = np.asarray(M, dtype=np.float64)
    if not np.any(M):
        raise ValueError("leverage scores need a nonzero matrix")
    G = M @ M.T
    w, V = np.linalg.eigh(G)
    keep = w > cutoff * np.max(np.abs(w))
    if not np.any(keep):
        raise np.linalg.LinAlgError("Gram matrix is numerically zero")
    # (A A^T)^+ = V diag(1/w) V^T on the kept eigenspace
    P = (V[:, keep].T @ M) / np.sqrt(w[keep])[:, None]
    lev = np.sum(P * P, axis=0)
    return np.clip(lev, 0.0, 1.0)


def numeric_rank(A, cutoff: float = 1e-10) -> int:
    M = np.asarray(A.data if isinstance(A, RingMatrix) else A, dtype=np.float64)
    if not np.any(M):
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(sv * sv > cutoff * sv[0] ** 2))


def save_matrix(A: RingMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(A.to_json(), fh, sort_keys=True)
        fh.write("\n")


def load_matrix(path) -> RingMatrix:
    with open(path, encoding="utf-8") as fh:
        return RingMatrix.from_json(json.load(fh))
