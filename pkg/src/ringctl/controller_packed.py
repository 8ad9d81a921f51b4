"""Ring-LWE-customized encrypted controller: one ciphertext per window slot.

The gain is split into 2n blocks, each vectorized row-by-row into the slot
partitions of a single packed plaintext; signals travel duplicated so that
one slotwise product per block contributes a whole matrix-vector term.  The
partition sums that finish each inner product happen at the actuator after
decryption, so the controller itself needs nothing beyond additions and
multiplications.
"""

from __future__ import annotations

from fractions import Fraction
from typing import List, Optional

import numpy as np

from .bgv import (BgvParams, Ciphertext, OpCounters, SecretKey, decrypt, encrypt,
                  prod2)
from .errors import DimMismatch, LengthMismatch, ScaleMismatch, TooManyTerms
from .packing import PackingContext, pack_duplicated
from .quantize import QuantParams, quantize, quantize_matrix, rescale
from .transform import TransformedController


def split_H(Hcal: np.ndarray, n: int, h: int, l: int) -> List[np.ndarray]:
    """[H_1 .. H_n | H_{n+1} .. H_{2n}]: n blocks of width l, then n of width h."""
    Hcal = np.atleast_2d(np.asarray(Hcal, dtype=float))
    if Hcal.shape != (h, n * (l + h)):
        raise DimMismatch(f"gain must be {h} x {n * (l + h)}, got {Hcal.shape}")
    blocks = [Hcal[:, i * l:(i + 1) * l] for i in range(n)]
    off = n * l
    blocks += [Hcal[:, off + i * h: off + (i + 1) * h] for i in range(n)]
    return blocks


def vectorize_pad(Hi: np.ndarray, p: int, h: int, l: int) -> np.ndarray:
    """Row-major slot layout of one gain block, padded per partition.

    Partition i (of width max(h, l)) carries row i of the block followed by
    zeros; trailing slots up to the ring degree stay zero.  The layout lines
    up with the duplicated signal so a slotwise product leaves the i-th
    partition holding the terms of row i's inner product.
    """
    Hi = np.atleast_2d(Hi)
    w = Hi.shape[1]
    if Hi.shape[0] != h or w not in (h, l):
        raise DimMismatch(f"block must have {h} rows and width {h} or {l}")
    wmax = max(h, l)
    if p < h * wmax:
        raise DimMismatch(f"ring degree {p} below h*max(h,l) = {h * wmax}")
    out = np.zeros(p, dtype=np.int64)
    for i in range(h):
        out[i * wmax: i * wmax + w] = Hi[i]
    return out


def duplicate_pack_encrypt(x: np.ndarray, qp: QuantParams, ctx: PackingContext,
                           copies: int, width: int, key: SecretKey,
                           rng: np.random.Generator,
                           counters: Optional[OpCounters] = None, step=None,
                           strict: bool = True) -> Ciphertext:
    """Quantize, duplicate into padded partitions, pack, and encrypt (scale 1/L)."""
    msgs = quantize(x, qp.L, qp.N, step=step, strict=strict)
    m = pack_duplicated([int(v) for v in msgs], copies, width, ctx)
    return encrypt(m, key, rng, 1 / Fraction(qp.L), counters)


class PackedEncController:
    """Algorithm-1 controller: 2n gain ciphertexts against 2n window slots."""

    def __init__(self, tc: TransformedController, params: BgvParams, qp: QuantParams,
                 key: SecretKey, rng: np.random.Generator,
                 counters: Optional[OpCounters] = None, strict: bool = True):
        n, h, l = tc.n, tc.h, tc.l
        if 2 * n > params.r_bar:
            raise TooManyTerms(f"2n = {2 * n} exceeds r_bar = {params.r_bar}")
        wmax = max(h, l)
        if params.p < h * wmax:
            raise DimMismatch(f"p = {params.p} below h*max(h,l) = {h * wmax}")
        self.tc = tc
        self.params = params
        self.qp = qp
        self.wmax = wmax
        self.counters = counters if counters is not None else OpCounters()
        self.ctx = PackingContext(params.plain_modulus)

        blocks = split_H(tc.Hcal, n, h, l)
        self.Hq_blocks = [quantize_matrix(b, qp.s, qp.N) for b in blocks]
        scale_s = 1 / Fraction(qp.s)
        self.H_enc = [
            encrypt(self.ctx.pack(vectorize_pad(bq, params.p, h, l).tolist()),
                    key, rng, scale_s)
            for bq in self.Hq_blocks
        ]

        # initial window: z0 split into 2n chunks, duplicated like live signals
        chunks = [tc.z0[i * l:(i + 1) * l] for i in range(n)]
        off = n * l
        chunks += [tc.z0[off + i * h: off + (i + 1) * h] for i in range(n)]
        self.z_slots: List[Ciphertext] = [
            duplicate_pack_encrypt(np.asarray(c, dtype=float), qp, self.ctx, h, wmax,
                                   key, rng, strict=strict)
            for c in chunks
        ]
        self.step_index = 0

    def output(self) -> Ciphertext:
        """u_bar(k) = Prod2({H_i}, {z_i(k)}): one length-3 ciphertext."""
        before = [ct.mults_applied for ct in self.z_slots]
        out = prod2(self.H_enc, self.z_slots, self.params, self.counters)
        for prev, ct in zip(before, self.z_slots):
            if ct.mults_applied - prev != 1:
                raise TooManyTerms("window slot skipped or reused inside the product")
        return out

    def insert(self, y_enc: Ciphertext, u_enc: Ciphertext):
        """Window shift: z_1 <- y(k), z_{n+1} <- u(k), older slots move down."""
        self._check_input(y_enc)
        self._check_input(u_enc)
        n = self.tc.n
        z = self.z_slots
        self.z_slots = [y_enc] + z[: n - 1] + [u_enc] + z[n: 2 * n - 1]
        self.step_index += 1

    def alg1_step(self, y_enc: Ciphertext, u_enc: Ciphertext) -> Ciphertext:
        """Output from the current window, then shift in the new pair."""
        out = self.output()
        self.insert(y_enc, u_enc)
        return out

    def _check_input(self, ct: Ciphertext):
        if len(ct) != 2:
            raise LengthMismatch("window inputs must be fresh length-2 ciphertexts")
        want = 1 / Fraction(self.qp.L)
        if ct.scale != want:
            raise ScaleMismatch(f"window inputs must carry scale {want}")

    def polynomial_counts(self) -> dict:
        return {
            "u": 2,
            "u_bar": 3,
            "y": 2,
            "z": sum(len(ct) for ct in self.z_slots),
            "H": sum(len(ct) for ct in self.H_enc),
        }


def actuator_partition_sum(u_bar_enc: Ciphertext, key: SecretKey, qp: QuantParams,
                           ctx: PackingContext, h: int, wmax: int,
                           rng: np.random.Generator,
                           counters: Optional[OpCounters] = None, step=None,
                           strict: bool = True):
    """Decrypt, sum each partition, rescale by L*s, and re-encrypt the input.

    Returns (u, u_enc, slots) where slots is the decrypted integer slot
    vector (the per-slot values the range condition constrains).
    """
    if len(u_bar_enc) != 3:
        raise LengthMismatch("controller output must be a length-3 ciphertext")
    want = (1 / Fraction(qp.L)) * (1 / Fraction(qp.s))
    if u_bar_enc.scale != want:
        raise ScaleMismatch(f"controller output must carry scale {want}")
    slots = ctx.unpack(decrypt(u_bar_enc, key, counters))
    sums = np.array([int(np.sum(slots[i * wmax:(i + 1) * wmax])) for i in range(h)],
                    dtype=np.int64)
    u = rescale(sums, qp.L, qp.s)
    u_enc = duplicate_pack_encrypt(u, qp, ctx, h, wmax, key, rng, counters, step=step,
                                   strict=strict)
    return u, u_enc, slots
