"""Scaling, rounding, and modular embedding of real signals and gains.

Signals are divided by their resolution, rounded half-up, and must land
inside the centered plaintext range; the actuator undoes both the signal and
gain scalings with one multiplication by L*s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, RangeExceeded


@dataclass(frozen=True)
class QuantParams:
    """Signal resolution L (1/L per unit), gain resolution s, plaintext size N."""

    L: float
    s: float
    N: int

    def __post_init__(self):
        if self.L <= 0:
            raise InvalidParams("L must be positive")
        if self.s <= 0 or 1.0 / self.s < 1.0:
            raise InvalidParams("gain resolution must satisfy 1/s >= 1")
        if self.N < 2:
            raise InvalidParams("plaintext modulus must be >= 2")


def round_half_up(x):
    """floor(x + 1/2), element-wise; ties away from the floor (2.5 -> 3, -2.5 -> -2)."""
    arr = np.floor(np.asarray(x, dtype=float) + 0.5)
    if np.ndim(x) == 0:
        return int(arr)
    return arr.astype(np.int64)


def quantize(x, scale: float, N: int, step=None, strict: bool = True) -> np.ndarray:
    """round_half_up(x / scale) with the wraparound guard |x/scale| + 1/2 < N/2.

    Raises RangeExceeded when any component would wrap modulo N, which is the
    condition the exactness proofs rule out.  With ``strict=False`` the value
    wraps into the centered range instead, mimicking what the modular
    embedding would silently do.
    """
    scaled = np.asarray(x, dtype=float) / scale
    if np.any(np.abs(scaled) + 0.5 >= N / 2):
        if strict:
            worst = float(np.max(np.abs(scaled)))
            raise RangeExceeded(
                f"|x/scale| + 1/2 = {worst + 0.5:.6g} >= N/2 = {N / 2:.6g}", step=step)
        half = N // 2
        return ((np.atleast_1d(round_half_up(scaled)) + half) % N) - half
    return np.atleast_1d(round_half_up(scaled))


def rescale(m, L: float, s: float) -> np.ndarray:
    """Actuator rescaling u = m * (L*s) applied to decrypted integers."""
    return np.asarray(m, dtype=float) * (L * s)


def quantize_matrix(M: np.ndarray, s: float, N: int) -> np.ndarray:
    """Gain quantization round(M / s) with the same range guard as quantize."""
    return np.reshape(quantize(np.asarray(M, dtype=float).ravel(), s, N), np.shape(M))
