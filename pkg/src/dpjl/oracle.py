"""Ground-truth verification engines.

``enumerate_sjlt_moments`` walks the entire randomness space of a tiny SJLT
instance (every hash/sign assignment, all equally likely, under the fully
independent hash model) and returns the exact mean and variance of
||Sx||_2^2.  This is the oracle against which the analytic identities are
checked: the mean must equal ||x||_2^2 (length preservation) and the variance
must equal (2/k)(||x||_2^4 - ||x||_4^4).

``mc_moments`` is the seeded Monte-Carlo counterpart for everything that
cannot be enumerated (FJLT, dense Gaussian, noisy estimators).  Trials are
drawn in fixed-size blocks, each block from its own derived stream, so
results are bit-identical for a given seed and independent of any execution
interleaving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TooManyConfigs
from .estimators import noise_moment
from .privacy import NoiseSpec
from .rng import Rng

__all__ = ["OracleResult", "enumerate_sjlt_moments", "mc_moments", "scalar_sampler"]

MAX_ORACLE_CONFIGS = 10_000_000


@dataclass(frozen=True)
class OracleResult:
    """Mean/variance plus how they were obtained.

    Exhaustive results carry ``n`` = number of enumerated configurations and
    no stderr; Monte-Carlo results carry ``n`` = trial count and
    stderr = sample_std / sqrt(n).
    """

    mean: float
    variance: float
    n: int
    stderr: float | None = None


def enumerate_sjlt_moments(d: int, k: int, s: int, x, statistic: str = "norm_sq",
                           noise: NoiseSpec | None = None,
                           max_configs: int = MAX_ORACLE_CONFIGS,
                           chunk: int = 1 << 17) -> OracleResult:
    """Exact moments of ||Sx||_2^2 over every (hash, sign) assignment.

    Each of the s*d (block, column) slots independently takes one of
    (k/s) * 2 values (bucket and sign), so there are ((2k/s))^(s*d)
    configurations; the guard rejects instances beyond ``max_configs``.

    ``statistic``:
      * "norm_sq": moments of ||Sx||_2^2 itself.
      * "est_with_noise_moments": moments of the bias-corrected distance
        estimator on sketch pairs with difference x, with the noise folded in
        analytically through its closed-form moments (the noise space is
        never enumerated).  Requires ``noise``.
    """
    if statistic not in ("norm_sq", "est_with_noise_moments"):
        raise ValueError(f"unknown statistic {statistic!r}")
    if statistic == "est_with_noise_moments" and noise is None:
        raise ValueError("est_with_noise_moments needs a NoiseSpec")
    if k % s != 0 or k < s or s < 1:
        raise ValueError(f"k must be a positive multiple of s, got k={k}, s={s}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (d,):
        raise ValueError(f"expected a vector of dimension {d}, got shape {x.shape}")

    m = k // s
    n_slots = s * d
    arity = 2 * m
    total = arity**n_slots
    if total > max_configs:
        raise TooManyConfigs(
            f"{total} configurations exceed the feasibility guard {max_configs}"
        )

    divisors = arity ** np.arange(n_slots, dtype=np.int64)
    offsets = (np.arange(s, dtype=np.int64) * m)[:, None]
    xw = x / math.sqrt(s)
    norm_sq = float(x @ x)

    # Accumulate sums of (v - ||x||^2) and its square: the shift keeps the
    # variance free of catastrophic cancellation.
    s1 = 0.0
    s2 = 0.0
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        idx = np.arange(lo, hi, dtype=np.int64)
        digits = (idx[:, None] // divisors[None, :]) % arity
        digits = digits.reshape(-1, s, d)
        h = digits % m
        sign = 1.0 - 2.0 * (digits // m).astype(np.float64)
        rows = h + offsets[None, :, :]
        flat = rows + (np.arange(hi - lo, dtype=np.int64) * k)[:, None, None]
        weights = sign * xw[None, None, :]
        coords = np.bincount(flat.ravel(), weights=weights.ravel(), minlength=(hi - lo) * k)
        vals = (coords.reshape(-1, k) ** 2).sum(axis=1)
        centered = vals - norm_sq
        s1 += float(centered.sum())
        s2 += float((centered**2).sum())

    mean_centered = s1 / total
    mean = norm_sq + mean_centered
    variance = s2 / total - mean_centered**2  # population variance: the space is exhaustive
    if statistic == "est_with_noise_moments":
        e2 = noise_moment(noise, 2)
        e4 = noise_moment(noise, 4)
        variance = variance + 8.0 * e2 * norm_sq + 2.0 * k * e4 + 2.0 * k * e2 * e2
    return OracleResult(mean=mean, variance=variance, n=int(total), stderr=None)


def scalar_sampler(f):
    """Adapt a one-draw closure f(rng) -> float to the block sampler protocol."""

    def sample(rng: Rng, n: int) -> np.ndarray:
        return np.array([f(rng) for _ in range(n)], dtype=np.float64)

    return sample


def mc_moments(sampler, n_trials: int, seed: int, block_size: int = 8192) -> OracleResult:
    """Seeded Monte-Carlo mean/variance/stderr of a scalar statistic.

    ``sampler(rng, n)`` must return n independent realizations drawn from the
    given stream.  Trials are partitioned into fixed blocks; block b draws
    from the stream derived from (seed, "mc-block", b), so the result is
    reproducible bit-for-bit and would not change if blocks were evaluated
    concurrently.
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    root = Rng(seed)
    s1 = 0.0
    s2 = 0.0
    pivot = None
    done = 0
    block = 0
    while done < n_trials:
        n = min(block_size, n_trials - done)
        rng = root.substream("mc-block", block)
        vals = np.asarray(sampler(rng, n), dtype=np.float64)
        if vals.shape != (n,):
            raise ValueError(f"sampler returned shape {vals.shape}, expected ({n},)")
        if pivot is None:
            pivot = float(vals[0])
        centered = vals - pivot
        s1 += float(centered.sum())
        s2 += float((centered**2).sum())
        done += n
        block += 1
    mean_centered = s1 / n_trials
    mean = pivot + mean_centered
    if n_trials == 1:
        return OracleResult(mean=mean, variance=0.0, n=1, stderr=None)
    variance = max((s2 - n_trials * mean_centered**2) / (n_trials - 1), 0.0)
    stderr = math.sqrt(variance / n_trials)
    return OracleResult(mean=mean, variance=variance, n=int(n_trials), stderr=stderr)
