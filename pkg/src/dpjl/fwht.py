"""Normalized fast Walsh-Hadamard transform and power-of-two padding.

The transform applies the orthonormal Hadamard matrix
H[f, j] = (-1)^<f, j> / sqrt(n) (bitwise dot product of the 0-based row and
column indices), so fwht is its own inverse and preserves the l2 norm.
"""

from __future__ import annotations

import numpy as np

from .errors import NotPowerOfTwo

__all__ = ["fwht", "is_pow2", "next_pow2", "pad_pow2"]


def is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    """Smallest power of two >= n (n >= 1)."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return 1 << (n - 1).bit_length()


def fwht(v: np.ndarray) -> np.ndarray:
    """Apply the normalized Hadamard matrix along the last axis.

    In-place butterfly on a private copy, O(n log n) per vector; leading axes
    are treated as a batch.  Raises NotPowerOfTwo unless the last axis length
    is a power of two.
    """
    a = np.array(v, dtype=np.float64)
    n = a.shape[-1]
    if not is_pow2(n):
        raise NotPowerOfTwo(f"fwht needs a power-of-two dimension, got {n}")
    lead = a.shape[:-1]
    a = a.reshape(-1, n)
    h = 1
    while h < n:
        a = a.reshape(-1, n // (2 * h), 2, h)
        top = a[:, :, 0, :] + a[:, :, 1, :]
        bot = a[:, :, 0, :] - a[:, :, 1, :]
        a[:, :, 0, :] = top
        a[:, :, 1, :] = bot
        a = a.reshape(-1, n)
        h *= 2
    a *= 1.0 / np.sqrt(n)
    return a.reshape(*lead, n)


def pad_pow2(v: np.ndarray) -> np.ndarray:
    """Zero-pad a vector to the next power-of-two length.

    Padding with zeros leaves the l2 norm unchanged; an input whose length is
    already a power of two is returned as-is (no copy).
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("pad_pow2 expects a 1-D vector")
    n = v.shape[0]
    target = next_pow2(n)
    if target == n:
        return v
    out = np.zeros(target, dtype=np.float64)
    out[:n] = v
    return out
