"""Pack/unpack between integer vectors in Z_N^p and plaintext polynomials.

Packing interpolates the polynomial taking value v_i at zeta_i = zeta^(2i-1),
which is the O(p log p) equivalent of the Vandermonde form
Pack(z) = [1 X ... X^{p-1}] Theta^{-1} z mod N; unpacking evaluates at the
same points.  Sums of polynomials therefore unpack to vector sums and
products to Hadamard products, both mod N.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import InvalidParams, LengthMismatch
from .ring import Modulus, RingPoly, is_probable_prime, ntt_forward, ntt_inverse


class PackingContext:
    """Evaluation points and inverse-degree constant for one plaintext modulus."""

    def __init__(self, modulus: Modulus):
        N, p = modulus.m, modulus.p
        if not modulus.has_root:
            raise InvalidParams(f"plaintext modulus {N} has no 2p-th root at p = {p}")
        if not is_probable_prime(N):
            raise InvalidParams(f"plaintext modulus {N} must be prime for packing")
        self.modulus = modulus
        self.zetas = [pow(modulus.root, 2 * i - 1, N) for i in range(1, p + 1)]
        self.inv_p = pow(p, -1, N)
        if len(set(self.zetas)) != p:
            raise InvalidParams("evaluation points are not pairwise distinct")

    @classmethod
    def create(cls, N: int, p: int) -> "PackingContext":
        return cls(Modulus.with_root(N, p))

    def pack(self, v: Sequence[int]) -> RingPoly:
        """Polynomial whose value at zeta_i is v_i (mod N, centered)."""
        if len(v) != self.modulus.p:
            raise LengthMismatch(f"expected {self.modulus.p} entries, got {len(v)}")
        return ntt_inverse([int(x) for x in v], self.modulus)

    def unpack(self, f: RingPoly) -> np.ndarray:
        """col{f(zeta_i)} mod N, centered."""
        if f.mod.m != self.modulus.m or f.mod.p != self.modulus.p:
            raise InvalidParams("polynomial does not belong to this plaintext ring")
        return np.array(ntt_forward(f), dtype=np.int64)


def pack(v: Sequence[int], ctx: PackingContext) -> RingPoly:
    return ctx.pack(v)


def unpack(f: RingPoly, ctx: PackingContext) -> np.ndarray:
    return ctx.unpack(f)


def pack_duplicated(x: Sequence[int], copies: int, width: int, ctx: PackingContext) -> RingPoly:
    """Pack ``copies`` partitions, each holding x zero-padded to ``width`` slots.

    This is the slot layout of the vectorized matrix product: the h-fold
    duplicated signal 1_h (x) x, padded per partition to max(h, l) and then
    with trailing zeros to the ring degree.
    """
    p = ctx.modulus.p
    if copies * width > p:
        raise LengthMismatch(f"{copies} partitions of width {width} exceed p = {p}")
    if len(x) > width:
        raise LengthMismatch(f"signal of length {len(x)} exceeds partition width {width}")
    slots = [0] * p
    for c in range(copies):
        base = c * width
        for j, val in enumerate(x):
            slots[base + j] = int(val)
    return ctx.pack(slots)
