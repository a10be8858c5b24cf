"""The three JL transforms and their exact column sensitivities.

All three constructions are used in the LPP-normalized convention: for any
fixed input x, E[||T(x)||_2^2] over the transform's randomness equals
||x||_2^2.  Concretely,

* ``SjltTransform`` is the block construction: s hash/sign pairs, one
  non-zero of magnitude 1/sqrt(s) per column per block of size k/s.  Its
  column sensitivities are structural: Delta_1 = sqrt(s) and Delta_2 = 1 for
  every seed.
* ``FjltTransform`` applies (1/sqrt(k)) P H D to the zero-padded input:
  random sign diagonal D, normalized Hadamard H, and a sparse matrix P whose
  entries are N(0, 1/q) with probability q and zero otherwise.  The realized
  P is stored so sensitivities can be computed exactly.
* ``IidGaussianTransform`` is the dense baseline with i.i.d. N(0, 1/k)
  entries; its exact l2 sensitivity is cached at construction (an O(dk)
  initialization step).

Transform descriptors are immutable after construction and safe to share
across concurrent readers.
"""

from __future__ import annotations

import json
import hashlib
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimMismatch,
    InvalidAccuracy,
    InvalidBlockStructure,
)
from .fwht import fwht, next_pow2
from .rng import Rng, splitmix64

__all__ = [
    "SketchParams",
    "SjltTransform",
    "FjltTransform",
    "IidGaussianTransform",
    "params_from_accuracy",
    "sjlt_hash_sign",
    "column_sensitivity",
    "canonical_json",
    "transform_to_json",
    "transform_from_json",
    "transform_fingerprint",
    "save_transform",
    "load_transform",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_HASH_TAG = np.uint64(0x68617368)  # "hash"
_SIGN_TAG = np.uint64(0x7369676E)  # "sign"
_POLY_PRIME = (1 << 31) - 1  # Mersenne prime; products of two residues fit in uint64


def _check_accuracy(alpha: float, beta: float) -> None:
    if not (0.0 < alpha < 0.5):
        raise InvalidAccuracy(f"alpha must lie in the open interval (0, 1/2), got {alpha}")
    if not (0.0 < beta < 0.5):
        raise InvalidAccuracy(f"beta must lie in the open interval (0, 1/2), got {beta}")


@dataclass(frozen=True)
class SketchParams:
    """Accuracy inputs and the dimensions derived from them."""

    alpha: float
    beta: float
    d: int
    k: int
    s: int
    c_k: float = 2.0
    c_s: float = 1.0

    def __post_init__(self):
        _check_accuracy(self.alpha, self.beta)
        if self.d < 1:
            raise ValueError(f"input dimension must be >= 1, got {self.d}")
        if self.s < 1 or self.k < self.s or self.k % self.s != 0:
            raise InvalidBlockStructure(
                f"k must be a positive multiple of s, got k={self.k}, s={self.s}"
            )


def params_from_accuracy(alpha, beta, d, c_k=2.0, c_s=1.0) -> SketchParams:
    """Derive (k, s) from the accuracy target.

    s = ceil(c_s * ln(1/beta) / alpha) and k = ceil(c_k * ln(1/beta) / alpha^2)
    rounded up to the next multiple of s (the block structure needs k/s to be
    integral; rounding up never hurts accuracy).  The constants default to
    c_k = 2, c_s = 1 and are configurable.
    """
    _check_accuracy(alpha, beta)
    if d < 1:
        raise ValueError(f"input dimension must be >= 1, got {d}")
    log_inv_beta = math.log(1.0 / beta)
    s = math.ceil(c_s * log_inv_beta / alpha)
    k_raw = math.ceil(c_k * log_inv_beta / alpha**2)
    k = max(1, math.ceil(k_raw / s)) * s
    return SketchParams(alpha=alpha, beta=beta, d=int(d), k=int(k), s=int(s), c_k=c_k, c_s=c_s)


def sjlt_hash_sign(seeds, s: int, n_buckets: int, cols):
    """Bucket and sign values for the SJLT's seeded hash functions.

    ``seeds`` may be a scalar or an array of transform seeds; ``cols`` is an
    int array of column indices.  Returns (h, phi) of shape
    ``seeds.shape + (s, len(cols))`` with h in [0, n_buckets) (uint64) and phi
    in {-1.0, +1.0}.  Stateless: the value for (seed, r, j) never depends on
    which other columns are evaluated, which is what makes O(s) streaming
    updates possible.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    cols = np.asarray(cols, dtype=np.uint64)
    r = np.arange(1, s + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        hkeys = splitmix64(seeds[..., None] ^ _HASH_TAG) + r * _GOLDEN
        skeys = splitmix64(seeds[..., None] ^ _SIGN_TAG) + r * _GOLDEN
        zmix = splitmix64(hkeys[..., None] + (cols + np.uint64(1)) * _GOLDEN)
        smix = splitmix64(skeys[..., None] + (cols + np.uint64(1)) * _GOLDEN)
    h = zmix % np.uint64(n_buckets)
    phi = 1.0 - 2.0 * (smix & np.uint64(1)).astype(np.float64)
    return h, phi


def _poly_eval_mod(coeffs: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Horner evaluation of a polynomial over GF(_POLY_PRIME), vectorized."""
    acc = np.zeros(xs.shape, dtype=np.uint64)
    xs = xs.astype(np.uint64) % np.uint64(_POLY_PRIME)
    p = np.uint64(_POLY_PRIME)
    for c in coeffs:
        acc = (acc * xs + np.uint64(int(c))) % p
    return acc


@dataclass(frozen=True, eq=False)
class SjltTransform:
    """Sparse JL transform descriptor (block construction).

    Only the descriptor is stored; the k x d matrix is never materialized for
    application.  ``hash_mode`` is "prf" (a seeded pseudorandom function
    treated as fully independent, the default) or "poly" (degree-``degree``
    polynomials over a prime field, giving exact ``degree``-wise
    independence; intended for tests, evaluated more slowly).
    """

    d: int
    k: int
    s: int
    seed: int
    hash_mode: str = "prf"
    degree: int = 4

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"input dimension must be >= 1, got {self.d}")
        if self.s < 1 or self.k < self.s or self.k % self.s != 0:
            raise InvalidBlockStructure(
                f"k must be a positive multiple of s, got k={self.k}, s={self.s}"
            )
        if self.hash_mode not in ("prf", "poly"):
            raise ValueError(f"unknown hash_mode {self.hash_mode!r}")
        if self.hash_mode == "poly" and self.degree < 1:
            raise ValueError("polynomial hash degree must be >= 1")

    @property
    def block_size(self) -> int:
        return self.k // self.s

    @cached_property
    def _row_offsets(self) -> np.ndarray:
        return (np.arange(self.s) * self.block_size).astype(np.int64)

    @cached_property
    def _poly_coeffs(self):
        rng = Rng(self.seed).substream("sjlt-poly")
        ch = rng.integers(0, _POLY_PRIME, size=(self.s, self.degree))
        cs = rng.integers(0, _POLY_PRIME, size=(self.s, self.degree))
        return ch, cs

    def hash_sign(self, cols) -> tuple[np.ndarray, np.ndarray]:
        """(h, phi) of shape (s, len(cols)): bucket in [0, k/s) and sign."""
        cols = np.asarray(cols, dtype=np.int64)
        if self.hash_mode == "prf":
            seed = self.seed & 0xFFFFFFFFFFFFFFFF
            h, phi = sjlt_hash_sign(seed, self.s, self.block_size, cols)
            return h.astype(np.int64), phi
        ch, cs = self._poly_coeffs
        xs = (cols + 1).astype(np.uint64)
        h = np.empty((self.s, cols.size), dtype=np.int64)
        phi = np.empty((self.s, cols.size), dtype=np.float64)
        for r in range(self.s):
            h[r] = (_poly_eval_mod(ch[r], xs) % np.uint64(self.block_size)).astype(np.int64)
            phi[r] = 1.0 - 2.0 * (_poly_eval_mod(cs[r], xs) & np.uint64(1)).astype(np.float64)
        return h, phi

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Sx for the LPP-normalized SJLT; O(s * nnz(x) + k) time."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise DimMismatch(f"expected a vector of dimension {self.d}, got shape {x.shape}")
        nz = np.flatnonzero(x)
        if nz.size == 0:
            return np.zeros(self.k)
        h, phi = self.hash_sign(nz)
        rows = h + self._row_offsets[:, None]
        weights = phi * (x[nz] / math.sqrt(self.s))
        return np.bincount(rows.ravel(), weights=weights.ravel(), minlength=self.k)

    def update(self, acc: np.ndarray, j: int, delta: float) -> np.ndarray:
        """acc += S (delta * e_j) in place, touching exactly s coordinates."""
        if not 0 <= j < self.d:
            raise DimMismatch(f"coordinate {j} outside [0, {self.d})")
        if acc.shape != (self.k,):
            raise DimMismatch(f"accumulator must have dimension {self.k}, got shape {acc.shape}")
        h, phi = self.hash_sign(np.array([j], dtype=np.int64))
        acc[h[:, 0] + self._row_offsets] += phi[:, 0] * (delta / math.sqrt(self.s))
        return acc

    def materialize(self) -> np.ndarray:
        """Dense k x d matrix; for tests and sensitivity checks only."""
        h, phi = self.hash_sign(np.arange(self.d, dtype=np.int64))
        m = np.zeros((self.k, self.d))
        rows = h + self._row_offsets[:, None]
        cols = np.broadcast_to(np.arange(self.d), (self.s, self.d))
        m[rows.ravel(), cols.ravel()] = phi.ravel() / math.sqrt(self.s)
        return m


@dataclass(frozen=True, eq=False)
class FjltTransform:
    """Fast JL transform descriptor: x -> (1/sqrt(k)) P H D pad(x).

    The realized sparse P is stored explicitly so the exact column
    sensitivities of the map are computable after construction.
    """

    d: int
    d_pad: int
    k: int
    q: float
    seed: int
    c_q: float
    alpha: float
    beta: float
    signs: np.ndarray  # (d_pad,) of +/-1
    p_matrix: sp.csr_matrix  # (k, d_pad), entries ~ N(0, 1/q)

    @classmethod
    def create(cls, alpha, beta, d, k, c_q=1.0, seed=0) -> "FjltTransform":
        """Draw D and P from the seeded stream; q = min(c_q ln^2(1/beta)/d_pad, 1)."""
        if not (0.0 < beta < 0.5):
            raise InvalidAccuracy(f"beta must lie in the open interval (0, 1/2), got {beta}")
        if d < 1:
            raise ValueError(f"input dimension must be >= 1, got {d}")
        if k < 1:
            raise ValueError(f"output dimension must be >= 1, got {k}")
        d_pad = next_pow2(d)
        q = min(c_q * math.log(1.0 / beta) ** 2 / d_pad, 1.0)
        rng = Rng(seed)
        signs = rng.substream("fjlt-signs").signs(d_pad)
        mask = rng.substream("fjlt-pattern").random((k, d_pad)) < q
        values = rng.substream("fjlt-values").generator.standard_normal(int(mask.sum()))
        values /= math.sqrt(q)
        rows, cols = np.nonzero(mask)
        p = sp.csr_matrix((values, (rows, cols)), shape=(k, d_pad))
        return cls(
            d=int(d), d_pad=int(d_pad), k=int(k), q=float(q), seed=int(seed),
            c_q=float(c_q), alpha=float(alpha), beta=float(beta),
            signs=signs, p_matrix=p,
        )

    def apply(self, x: np.ndarray) -> np.ndarray:
        """(1/sqrt(k)) P fwht(D pad(x)); O(d_pad log d_pad + nnz(P)) time."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise DimMismatch(f"expected a vector of dimension {self.d}, got shape {x.shape}")
        w = np.zeros(self.d_pad)
        w[: self.d] = x
        w *= self.signs
        return (self.p_matrix @ fwht(w)) / math.sqrt(self.k)

    def materialize(self) -> np.ndarray:
        """Dense k x d matrix of the normalized map restricted to real inputs."""
        ph = fwht(self.p_matrix.toarray())  # row i of P H is fwht of row i (H symmetric)
        full = ph * self.signs[None, :] / math.sqrt(self.k)
        return full[:, : self.d]


@dataclass(frozen=True, eq=False)
class IidGaussianTransform:
    """Dense baseline: k x d matrix of i.i.d. N(0, 1/k) entries.

    The 1/k entry variance makes the map LPP-normalized (E||Px||^2 = ||x||^2),
    which the unbiased estimator relies on.  The exact l2 sensitivity of the
    realized matrix is cached at construction.
    """

    d: int
    k: int
    seed: int
    matrix: np.ndarray
    delta2_exact: float

    @classmethod
    def create(cls, d, k, seed=0) -> "IidGaussianTransform":
        if d < 1:
            raise ValueError(f"input dimension must be >= 1, got {d}")
        if k < 1:
            raise ValueError(f"output dimension must be >= 1, got {k}")
        matrix = Rng(seed).substream("iid-matrix").generator.standard_normal((k, d))
        matrix /= math.sqrt(k)
        delta2 = float(np.sqrt((matrix**2).sum(axis=0).max()))
        return cls(d=int(d), k=int(k), seed=int(seed), matrix=matrix, delta2_exact=delta2)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise DimMismatch(f"expected a vector of dimension {self.d}, got shape {x.shape}")
        return self.matrix @ x

    def materialize(self) -> np.ndarray:
        return self.matrix


def column_sensitivity(transform, p: int) -> float:
    """Exact lp-sensitivity: the maximum column lp norm of the applied map.

    For the SJLT the values are structural (Delta_1 = sqrt(s), Delta_2 = 1,
    for every seed) and returned without materialization.  For the FJLT and
    the dense baseline the realized columns are measured exactly.
    """
    if p not in (1, 2):
        raise ValueError(f"p must be 1 or 2, got {p}")
    if isinstance(transform, SjltTransform):
        return math.sqrt(transform.s) if p == 1 else 1.0
    if isinstance(transform, IidGaussianTransform):
        if p == 2:
            return transform.delta2_exact
        return float(np.abs(transform.matrix).sum(axis=0).max())
    if isinstance(transform, FjltTransform):
        cols = transform.materialize()
        if p == 1:
            return float(np.abs(cols).sum(axis=0).max())
        return float(np.sqrt((cols**2).sum(axis=0).max()))
    raise TypeError(f"unknown transform type {type(transform).__name__}")


# ---------------------------------------------------------------------------
# Serialization.  Descriptors round-trip through JSON; the FJLT persists its
# realized randomness (D signs and P rows), the other two reconstruct from the
# seed.  Canonical encoding (sorted keys, shortest float repr) makes files
# byte-identical across runs with the same inputs.
# ---------------------------------------------------------------------------

def transform_to_json(transform) -> dict:
    if isinstance(transform, SjltTransform):
        obj = {
            "type": "sjlt",
            "version": 1,
            "d": transform.d,
            "k": transform.k,
            "s": transform.s,
            "seed": transform.seed,
            "hash_mode": transform.hash_mode,
        }
        if transform.hash_mode == "poly":
            obj["degree"] = transform.degree
        return obj
    if isinstance(transform, FjltTransform):
        p = transform.p_matrix
        rows = []
        for i in range(transform.k):
            lo, hi = p.indptr[i], p.indptr[i + 1]
            rows.append([[int(c), float(v)] for c, v in zip(p.indices[lo:hi], p.data[lo:hi])])
        return {
            "type": "fjlt",
            "version": 1,
            "d": transform.d,
            "d_pad": transform.d_pad,
            "k": transform.k,
            "q": transform.q,
            "c_q": transform.c_q,
            "alpha": transform.alpha,
            "beta": transform.beta,
            "seed": transform.seed,
            "signs": [int(v) for v in transform.signs],
            "p_rows": rows,
        }
    if isinstance(transform, IidGaussianTransform):
        return {
            "type": "iid",
            "version": 1,
            "d": transform.d,
            "k": transform.k,
            "seed": transform.seed,
        }
    raise TypeError(f"unknown transform type {type(transform).__name__}")


def transform_from_json(obj: dict):
    kind = obj.get("type")
    if kind == "sjlt":
        return SjltTransform(
            d=obj["d"], k=obj["k"], s=obj["s"], seed=obj["seed"],
            hash_mode=obj.get("hash_mode", "prf"), degree=obj.get("degree", 4),
        )
    if kind == "fjlt":
        k, d_pad = obj["k"], obj["d_pad"]
        indptr = [0]
        indices, data = [], []
        for row in obj["p_rows"]:
            for col, val in row:
                indices.append(col)
                data.append(val)
            indptr.append(len(indices))
        p = sp.csr_matrix(
            (np.array(data, dtype=np.float64), np.array(indices, dtype=np.int32), np.array(indptr)),
            shape=(k, d_pad),
        )
        return FjltTransform(
            d=obj["d"], d_pad=d_pad, k=k, q=obj["q"], seed=obj["seed"], c_q=obj["c_q"],
            alpha=obj["alpha"], beta=obj["beta"],
            signs=np.array(obj["signs"], dtype=np.float64), p_matrix=p,
        )
    if kind == "iid":
        return IidGaussianTransform.create(d=obj["d"], k=obj["k"], seed=obj["seed"])
    raise ValueError(f"unknown transform type {kind!r}")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def transform_fingerprint(transform) -> str:
    """Stable hash of the serialized descriptor; pairs of sketches must agree on it."""
    blob = canonical_json(transform_to_json(transform)).encode("utf-8")
    return hashlib.blake2b(blob, digest_size=16).hexdigest()


def save_transform(transform, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(transform_to_json(transform)))
        fh.write("\n")


def load_transform(path):
    with open(path, "r", encoding="utf-8") as fh:
        return transform_from_json(json.load(fh))
