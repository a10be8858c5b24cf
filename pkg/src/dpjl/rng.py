"""Deterministic random streams and the two continuous noise samplers.

Randomness is addressed by a pair ``(root_seed, stream_id)``: the same pair
always reproduces the same value stream, and distinct stream ids behave as
independent streams.  Stream ids are derived by stable hashing of string/int
labels so that e.g. per-trial Monte-Carlo streams do not depend on scheduling.

The two noise samplers are pinned algorithms (inverse CDF for Laplace, the
Marsaglia polar method for Gaussian) so that seeded test suites are
reproducible across platforms.  Caveat: both sample the continuous
distributions in floating point and are therefore subject to the usual
floating-point attacks on naive DP noise (Mironov 2012); discrete samplers
are out of scope here.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import InvalidScale

__all__ = [
    "Rng",
    "derive_stream",
    "sample_gaussian",
    "sample_laplace",
    "splitmix64",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MASK64 = 0xFFFFFFFFFFFFFFFF


def derive_stream(*labels) -> int:
    """Stable 64-bit stream id from a sequence of string/int labels.

    Uses blake2b, not Python's ``hash``, so the value is identical across
    runs, platforms and interpreter instances.
    """
    h = hashlib.blake2b(digest_size=8)
    for label in labels:
        h.update(repr(label).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


class Rng:
    """A single-owner deterministic random stream.

    Never share one instance between concurrent tasks; derive substreams
    instead.  The underlying bit generator is PCG64 keyed by
    ``SeedSequence([root_seed, stream_id])``.
    """

    def __init__(self, root_seed: int, stream_id: int = 0):
        self.root_seed = int(root_seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        seq = np.random.SeedSequence([self.root_seed, self.stream_id])
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def substream(self, *labels) -> "Rng":
        """Independent stream labelled relative to this one."""
        return Rng(self.root_seed, derive_stream(self.stream_id, *labels))

    def random(self, size=None):
        """Uniform draws in [0, 1)."""
        return self.generator.random(size)

    def integers(self, low, high, size=None):
        """Uniform integer draws in [low, high)."""
        return self.generator.integers(low, high, size=size)

    def signs(self, size=None):
        """Uniform +/-1 draws as float64."""
        return 1.0 - 2.0 * self.generator.integers(0, 2, size=size).astype(np.float64)

    def seeds(self, n: int) -> np.ndarray:
        """n fresh 64-bit seeds, e.g. one per Monte-Carlo trial."""
        return self.generator.integers(0, 2**64, size=n, dtype=np.uint64)

    def __repr__(self):  # pragma: no cover
        return f"Rng(root_seed={self.root_seed}, stream_id={self.stream_id})"


def splitmix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over uint64 arrays.

    Statistical mixing only (hash buckets and signs); not cryptographic.
    """
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z + _GOLDEN).astype(np.uint64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z


def sample_laplace(b: float, rng: Rng, size=None):
    """Draw from Lap(0, b) by inverse CDF.

    Draws u uniform in (-1/2, 1/2] and returns -b * sign(u) * ln(1 - 2|u|).
    A draw of exactly u = 0 maps to the median 0.
    """
    if b <= 0:
        raise InvalidScale(f"Laplace scale must be positive, got {b}")
    u = 0.5 - rng.random(size)
    return -b * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def sample_gaussian(sigma: float, rng: Rng, size=None):
    """Draw from N(0, sigma^2) by the Marsaglia polar method.

    Rejection is data-dependent but fully determined by the stream, so the
    output sequence is reproducible under a fixed (root_seed, stream_id).
    """
    if sigma <= 0:
        raise InvalidScale(f"Gaussian scale must be positive, got {sigma}")
    n = 1 if size is None else int(np.prod(size))
    out = np.empty(n + 1, dtype=np.float64)  # +1 slack: pairs come two at a time
    filled = 0
    while filled < n:
        need_pairs = (n - filled + 1) // 2
        # 1/acceptance ~ 4/pi; mild oversampling keeps the loop count low
        m = int(need_pairs * 1.35) + 8
        a = 2.0 * rng.random(m) - 1.0
        c = 2.0 * rng.random(m) - 1.0
        s = a * a + c * c
        ok = (s > 0.0) & (s < 1.0)
        a, c, s = a[ok], c[ok], s[ok]
        f = np.sqrt(-2.0 * np.log(s) / s)
        take = min(2 * a.size, n + 1 - filled)
        pair = np.empty(2 * a.size, dtype=np.float64)
        pair[0::2] = a * f
        pair[1::2] = c * f
        out[filled : filled + take] = pair[:take]
        filled += take
    vals = sigma * out[:n]
    if size is None:
        return float(vals[0])
    return vals.reshape(size)
