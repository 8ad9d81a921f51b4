"""Scheme-agnostic encrypted controller: elementwise encrypted window state.

Every scalar signal and gain entry rides in its own ciphertext (constant
polynomials on a ring backend).  The window update is a pure permutation of
ciphertext handles, which is arithmetically identical to multiplying by the
0/1 shift matrices but adds no noise; the literal matrix form is kept
available so the equivalence can be asserted.
"""

from __future__ import annotations

from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from .bgv import (BgvParams, Ciphertext, OpCounters, SecretKey, encrypt, decrypt,
                  hom_add, plain_scalar_mul, prod1)
from .errors import LengthMismatch, ScaleMismatch, TooManyTerms
from .quantize import QuantParams, quantize, quantize_matrix, rescale
from .ring import RingPoly
from .transform import TransformedController


def _scale_L(qp: QuantParams) -> Fraction:
    return 1 / Fraction(qp.L)


def _scale_s(qp: QuantParams) -> Fraction:
    return 1 / Fraction(qp.s)


def sensor_encrypt(y: np.ndarray, qp: QuantParams, key: SecretKey,
                   rng: np.random.Generator, counters: Optional[OpCounters] = None,
                   step=None, strict: bool = True) -> List[Ciphertext]:
    """Quantize a real vector at resolution 1/L and encrypt it entrywise."""
    msgs = quantize(y, qp.L, qp.N, step=step, strict=strict)
    plain = key.params.plain_modulus
    return [encrypt(RingPoly.constant(int(v), plain), key, rng, _scale_L(qp), counters)
            for v in msgs]


class GeneralEncController:
    """Encrypted window controller holding h x n_bar gain ciphertexts."""

    def __init__(self, tc: TransformedController, params: BgvParams, qp: QuantParams,
                 key: SecretKey, rng: np.random.Generator,
                 counters: Optional[OpCounters] = None, strict: bool = True):
        if tc.n_bar > params.r_bar:
            raise TooManyTerms(f"n_bar = {tc.n_bar} exceeds r_bar = {params.r_bar}")
        self.tc = tc
        self.params = params
        self.qp = qp
        self.counters = counters if counters is not None else OpCounters()
        plain = params.plain_modulus
        Hq = quantize_matrix(tc.Hcal, qp.s, qp.N)
        self.Hq = Hq
        self.H_enc = [
            [encrypt(RingPoly.constant(int(Hq[i, j]), plain), key, rng, _scale_s(qp))
             for j in range(tc.n_bar)]
            for i in range(tc.h)
        ]
        z0_msgs = quantize(tc.z0, qp.L, qp.N, strict=strict)
        self.state_z: List[Ciphertext] = [
            encrypt(RingPoly.constant(int(v), plain), key, rng, _scale_L(qp))
            for v in z0_msgs
        ]
        self.step_index = 0

    # -- per-step phases -----------------------------------------------------

    def output(self) -> List[Ciphertext]:
        """u_bar(k): one length-3 ciphertext per output row, scale 1/(L*s)."""
        before = [ct.mults_applied for ct in self.state_z]
        rows = [prod1(self.H_enc[i], self.state_z, self.params, self.counters)
                for i in range(self.tc.h)]
        for prev, ct in zip(before, self.state_z):
            if ct.mults_applied - prev != self.tc.h:
                raise TooManyTerms("window entry skipped or reused inside the product")
        return rows

    def insert(self, y_enc: Sequence[Ciphertext], u_enc: Sequence[Ciphertext]):
        """Window shift: newest y and u enter, the oldest pair drops out."""
        n, h, l = self.tc.n, self.tc.h, self.tc.l
        self._check_inputs(y_enc, l)
        self._check_inputs(u_enc, h)
        z = self.state_z
        self.state_z = list(y_enc) + z[: (n - 1) * l] + list(u_enc) + z[n * l: n * l + (n - 1) * h]
        self.step_index += 1

    def ctrl_step(self, y_enc: Sequence[Ciphertext], u_enc: Sequence[Ciphertext]) -> List[Ciphertext]:
        """Output from the current window, then shift in the new pair."""
        rows = self.output()
        self.insert(y_enc, u_enc)
        return rows

    def insert_via_matrices(self, y_enc, u_enc) -> List[Ciphertext]:
        """The literal shift-matrix update; used to certify the rotation shortcut.

        Returns the would-be next window without installing it.
        """
        tc = self.tc
        z, out = self.state_z, []
        for i in range(tc.n_bar):
            terms = [plain_scalar_mul(int(tc.Fcal[i, j]), z[j])
                     for j in range(tc.n_bar) if tc.Fcal[i, j] != 0]
            terms += [plain_scalar_mul(int(tc.Gcal[i, j]), y_enc[j])
                      for j in range(tc.l) if tc.Gcal[i, j] != 0]
            terms += [plain_scalar_mul(int(tc.Rcal[i, j]), u_enc[j])
                      for j in range(tc.h) if tc.Rcal[i, j] != 0]
            acc = terms[0]
            for t in terms[1:]:
                acc = hom_add(acc, t, self.counters)
            out.append(acc)
        return out

    def _check_inputs(self, cts: Sequence[Ciphertext], expect: int):
        if len(cts) != expect:
            raise LengthMismatch(f"expected {expect} ciphertexts, got {len(cts)}")
        want = _scale_L(self.qp)
        for ct in cts:
            if len(ct) != 2:
                raise LengthMismatch("window inputs must be fresh length-2 ciphertexts")
            if ct.scale != want:
                raise ScaleMismatch(f"window inputs must carry scale {want}")

    # -- storage accounting (Table-style) -------------------------------------

    def polynomial_counts(self) -> dict:
        tc = self.tc
        return {
            "u": 2 * tc.h,
            "u_bar": 3 * tc.h,
            "y": 2 * tc.l,
            "z": sum(len(ct) for ct in self.state_z),
            "H": sum(len(ct) for row in self.H_enc for ct in row),
        }


def actuator_step(u_bar_enc: Sequence[Ciphertext], key: SecretKey, qp: QuantParams,
                  rng: np.random.Generator, counters: Optional[OpCounters] = None,
                  step=None, strict: bool = True):
    """Decrypt u_bar, rescale by L*s, and re-encrypt the input for feedback.

    Returns (u, u_enc, m_u) with u the real plant input and m_u the decrypted
    integer vector (useful for exactness checks).
    """
    want = _scale_L(qp) * _scale_s(qp)
    m_u = []
    for ct in u_bar_enc:
        if len(ct) != 3:
            raise LengthMismatch("controller output must be a length-3 ciphertext")
        if ct.scale != want:
            raise ScaleMismatch(f"controller output must carry scale {want}")
        m_u.append(int(decrypt(ct, key, counters).coeffs[0]))
    m_u = np.array(m_u, dtype=np.int64)
    u = rescale(m_u, qp.L, qp.s)
    u_enc = sensor_encrypt(u, qp, key, rng, counters, step=step, strict=strict)
    return u, u_enc, m_u
