"""Secret-key BGV over the negacyclic ring: keygen, Enc/Dec, and the
homomorphic operations the encrypted controllers need.

A ciphertext is a pair [a*sk + N*e + m, -a] over R_{p,q}; multiplication
returns the length-3 tensor form and is never relinearized, so decryption
handles both lengths through the key powers [1, sk, sk^2].  Composite
products Prod1/Prod2 apply exactly one multiplication to every input followed
by a chain of additions, which is what keeps the scheme usable for somewhat
homomorphic parameter sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from .errors import InvalidParams, LengthMismatch, ScaleMismatch, TooManyTerms
from .ring import Modulus, RingPoly, gaussian_poly, uniform_poly

_NOISE_TAIL = 6.0  # one-sided tail multiplier for the statistical noise bound


@dataclass
class OpCounters:
    """Tally of scheme algorithm executions (Table-style accounting)."""

    enc: int = 0
    dec: int = 0
    add: int = 0
    mult: int = 0
    poly_mul: int = 0

    def snapshot(self) -> dict:
        return {"enc": self.enc, "dec": self.dec, "add": self.add, "mult": self.mult,
                "poly_mul": self.poly_mul}

    def __iadd__(self, other: "OpCounters"):
        self.enc += other.enc
        self.dec += other.dec
        self.add += other.add
        self.mult += other.mult
        self.poly_mul += other.poly_mul
        return self


@dataclass(frozen=True)
class BgvParams:
    """Scheme parameters (N, p, q, sigma) plus the linear-combination cap r_bar."""

    N: int
    q: int
    p: int
    sigma: float = 3.2
    r_bar: int = 1

    def __post_init__(self):
        if self.N < 2 or self.q < 2:
            raise InvalidParams("moduli must be >= 2")
        if math.gcd(self.N, self.q) != 1:
            raise InvalidParams("plaintext and ciphertext moduli must be coprime")
        if self.q <= self.N:
            raise InvalidParams("ciphertext modulus must exceed the plaintext modulus")
        if self.p < 1 or (self.p & (self.p - 1)) != 0:
            raise InvalidParams("ring degree p must be a power of two")
        if self.sigma < 0:
            raise InvalidParams("sigma must be nonnegative")
        if self.r_bar < 1:
            raise InvalidParams("r_bar must be at least 1")
        object.__setattr__(self, "_cipher_modulus", Modulus.auto(self.q, self.p))
        object.__setattr__(self, "_plain_modulus", Modulus.auto(self.N, self.p))

    @property
    def cipher_modulus(self) -> Modulus:
        return self._cipher_modulus

    @property
    def plain_modulus(self) -> Modulus:
        return self._plain_modulus


@dataclass
class SecretKey:
    params: BgvParams
    sk: RingPoly
    powers: tuple  # (1, sk, sk^2) over R_{p,q}


class Ciphertext:
    """2 or 3 ring elements under one key, with scale bookkeeping.

    ``scale`` is the rational factor relating the embedded integer message to
    the signal it represents (1/L for quantized signals, 1/(L*s) after the
    gain product).  ``mults_applied`` counts how many homomorphic
    multiplications this ciphertext has entered, which lets callers assert
    the single-multiplication discipline.
    """

    __slots__ = ("polys", "scale", "mults_applied")

    def __init__(self, polys: Sequence[RingPoly], scale: Fraction = Fraction(1)):
        if len(polys) not in (2, 3):
            raise LengthMismatch(f"ciphertext must hold 2 or 3 polynomials, got {len(polys)}")
        self.polys = tuple(polys)
        self.scale = Fraction(scale)
        self.mults_applied = 0

    def __len__(self):
        return len(self.polys)

    @property
    def integer_count(self) -> int:
        """Number of Z_q integers this ciphertext occupies on the wire."""
        return len(self.polys) * self.polys[0].mod.p


def keygen(params: BgvParams, rng: np.random.Generator) -> SecretKey:
    """Sample sk from the coefficient-wise Gaussian and precompute its powers."""
    mod = params.cipher_modulus
    sk = gaussian_poly(mod, params.sigma, rng)
    one = RingPoly.constant(1, mod)
    return SecretKey(params, sk, (one, sk, sk * sk))


def _lift(m: RingPoly, mod: Modulus) -> RingPoly:
    """Reinterpret a plaintext polynomial's centered coefficients mod q."""
    return RingPoly(m.coeffs, mod)


def encrypt(
    m: RingPoly,
    key: SecretKey,
    rng: np.random.Generator,
    scale: Fraction = Fraction(1),
    counters: Optional[OpCounters] = None,
) -> Ciphertext:
    """Enc(m) = [a*sk + N*e + m, -a] mod (X^p + 1, q)."""
    params = key.params
    mod = params.cipher_modulus
    if m.mod.m != params.N or m.mod.p != params.p:
        raise InvalidParams("message must lie in the plaintext ring")
    a = uniform_poly(mod, rng, eval_domain=mod.has_root)
    e = gaussian_poly(mod, params.sigma, rng)
    body = e.scalar_mul(params.N) + _lift(m, mod)
    c0 = a * key.sk + body
    if counters is not None:
        counters.enc += 1
        counters.poly_mul += 1
    return Ciphertext((c0, -a), scale)


def decrypt(c: Ciphertext, key: SecretKey, counters: Optional[OpCounters] = None) -> RingPoly:
    """<c, (1, sk, sk^2)> mod (X^p + 1, q) mod N, centered."""
    inner = _inner_with_key(c, key)
    if counters is not None:
        counters.dec += 1
        counters.poly_mul += len(c) - 1
    return RingPoly(inner.coeffs, key.params.plain_modulus)


def _inner_with_key(c: Ciphertext, key: SecretKey) -> RingPoly:
    acc = c.polys[0]
    for i in range(1, len(c.polys)):
        acc = acc + c.polys[i] * key.powers[i]
    return acc


def noise_headroom(c: Ciphertext, key: SecretKey) -> int:
    """q/2 minus the largest decryption magnitude (diagnostic, key required)."""
    inner = _inner_with_key(c, key)
    worst = max(abs(int(v)) for v in inner.coeffs)
    return key.params.q // 2 - worst


def hom_add(c1: Ciphertext, c2: Ciphertext, counters: Optional[OpCounters] = None) -> Ciphertext:
    if len(c1) != len(c2):
        raise LengthMismatch(f"cannot add ciphertexts of lengths {len(c1)} and {len(c2)}")
    if c1.scale != c2.scale:
        raise ScaleMismatch(f"scales differ: {c1.scale} vs {c2.scale}")
    if counters is not None:
        counters.add += 1
    return Ciphertext(tuple(a + b for a, b in zip(c1.polys, c2.polys)), c1.scale)


def hom_mul(c1: Ciphertext, c2: Ciphertext, counters: Optional[OpCounters] = None) -> Ciphertext:
    """Tensor product of two length-2 ciphertexts (length 3, no relinearization)."""
    if len(c1) != 2 or len(c2) != 2:
        raise LengthMismatch("multiplication requires two length-2 ciphertexts")
    a0, a1 = c1.polys
    b0, b1 = c2.polys
    out = Ciphertext((a0 * b0, a0 * b1 + a1 * b0, a1 * b1), c1.scale * c2.scale)
    c1.mults_applied += 1
    c2.mults_applied += 1
    if counters is not None:
        counters.mult += 1
        counters.poly_mul += 4
    return out


def plain_scalar_mul(k: int, c: Ciphertext) -> Ciphertext:
    """Scale the embedded message by a plaintext integer k, |k| <= N/2."""
    return Ciphertext(tuple(poly.scalar_mul(k) for poly in c.polys), c.scale)


def _prod(enc_a: Sequence[Ciphertext], enc_m: Sequence[Ciphertext], r_bar: int,
          counters: Optional[OpCounters]) -> Ciphertext:
    if len(enc_a) != len(enc_m):
        raise LengthMismatch("operand lists differ in length")
    r = len(enc_a)
    if r < 1:
        raise LengthMismatch("empty product")
    if r > r_bar:
        raise TooManyTerms(f"r = {r} exceeds r_bar = {r_bar}")
    acc = hom_mul(enc_a[0], enc_m[0], counters)
    for i in range(1, r):
        acc = hom_add(acc, hom_mul(enc_a[i], enc_m[i], counters), counters)
    return acc


def prod1(enc_a: Sequence[Ciphertext], enc_m: Sequence[Ciphertext], params: BgvParams,
          counters: Optional[OpCounters] = None) -> Ciphertext:
    """Sum of products of scalar messages: decrypts to sum a_i * m_i mod N.

    Every input enters exactly one multiplication and the partial results are
    chained through r-1 additions.
    """
    return _prod(enc_a, enc_m, params.r_bar, counters)


def prod2(enc_a: Sequence[Ciphertext], enc_m: Sequence[Ciphertext], params: BgvParams,
          counters: Optional[OpCounters] = None) -> Ciphertext:
    """Slotwise sum of products of packed vectors: decrypts to sum a_i o m_i mod N."""
    return _prod(enc_a, enc_m, params.r_bar, counters)


# ---------------------------------------------------------------------------
# parameter validation

@dataclass
class NoiseReport:
    ok: bool
    analytic_bound: int
    q_half: int
    margin_bits: float
    empirical_worst: Optional[int] = None
    empirical_margin_bits: Optional[float] = None
    trials: int = 0
    failure: Optional[str] = None

    def as_dict(self) -> dict:
        return {
            "pass": self.ok,
            "analytic_bound_bits": math.log2(max(self.analytic_bound, 1)),
            "q_half_bits": math.log2(self.q_half),
            "margin_bits": self.margin_bits,
            "empirical_worst_bits": (math.log2(max(self.empirical_worst, 1))
                                     if self.empirical_worst is not None else None),
            "empirical_margin_bits": self.empirical_margin_bits,
            "trials": self.trials,
            "failure": self.failure,
        }


def analytic_noise_bound(params: BgvParams) -> int:
    """High-confidence magnitude bound on a decryption value after one
    multiplication of fresh ciphertexts and r_bar - 1 additions.

    Each decrypted fresh ciphertext equals m + N*e with per-coefficient
    standard deviation about N*sqrt(1/12 + sigma^2); a negacyclic product of
    two such polynomials concentrates around sqrt(p) times the coefficient
    deviations, and the additions stack r_bar such products.  A 6-sigma tail
    is applied throughout, which comfortably over-covers every empirical
    trial batch while staying meaningful for realistic parameter sizes.
    """
    per_coeff_sd = params.N * math.sqrt(1.0 / 12.0 + params.sigma**2)
    product_sd = math.sqrt(params.p) * per_coeff_sd**2
    single = _NOISE_TAIL * product_sd
    return int(params.r_bar * single) + 1


def validate_params(params: BgvParams, trials: int = 0,
                    rng: Optional[np.random.Generator] = None) -> NoiseReport:
    """PASS iff the post-Prod noise bound stays below q/2 (plus optional trials).

    The empirical batch runs the worst supported circuit (one multiplication,
    r_bar - 1 additions) on uniform messages and records the largest
    decryption magnitude actually observed.
    """
    q_half = params.q // 2
    bound = analytic_noise_bound(params)
    ok = bound < q_half
    report = NoiseReport(
        ok=ok,
        analytic_bound=bound,
        q_half=q_half,
        margin_bits=math.log2(q_half) - math.log2(max(bound, 1)),
        failure=None if ok else f"analytic bound 2^{math.log2(max(bound, 1)):.1f} >= q/2",
    )
    if trials > 0 and ok:
        rng = rng if rng is not None else np.random.default_rng(0)
        key = keygen(params, rng)
        plain = params.plain_modulus
        worst = 0
        for _ in range(trials):
            terms = []
            for _ in range(params.r_bar):
                ma = _random_plain(plain, rng)
                mb = _random_plain(plain, rng)
                terms.append(hom_mul(encrypt(ma, key, rng), encrypt(mb, key, rng)))
            acc = terms[0]
            for t in terms[1:]:
                acc = hom_add(acc, t)
            inner = _inner_with_key(acc, key)
            worst = max(worst, max(abs(int(v)) for v in inner.coeffs))
        report.empirical_worst = worst
        report.empirical_margin_bits = math.log2(q_half) - math.log2(max(worst, 1))
        report.trials = trials
        if worst >= q_half:
            report.ok = False
            report.failure = "empirical noise reached q/2"
    return report


def _random_plain(plain: Modulus, rng: np.random.Generator) -> RingPoly:
    lo, hi = -(plain.m // 2), (plain.m - 1) // 2
    return RingPoly(rng.integers(lo, hi + 1, plain.p).astype(object), plain)


# ---------------------------------------------------------------------------
# wire format

_MAGIC = b"RCT1"


def serialize(c: Ciphertext) -> bytes:
    """Length-prefixed little-endian coefficient arrays.

    Layout: magic "RCT1" | u8 n_polys | u32 p | u8 width (bytes per
    coefficient, two's complement, little-endian) | u32 scale_len |
    scale_len bytes (Fraction as "num/den" ASCII) | n_polys * p * width
    coefficient bytes.  The payload counts n_polys * p integers, which is the
    figure the communication ledger reports.
    """
    p = c.polys[0].mod.p
    q = c.polys[0].mod.m
    width = (q.bit_length() + 8) // 8
    out = bytearray(_MAGIC)
    out.append(len(c.polys))
    out += p.to_bytes(4, "little")
    out.append(width)
    scale_txt = f"{c.scale.numerator}/{c.scale.denominator}".encode()
    out += len(scale_txt).to_bytes(4, "little")
    out += scale_txt
    for poly in c.polys:
        for v in poly.coeffs:
            out += int(v).to_bytes(width, "little", signed=True)
    return bytes(out)


def deserialize(data: bytes, params: BgvParams) -> Ciphertext:
    if data[:4] != _MAGIC:
        raise InvalidParams("bad ciphertext magic")
    n_polys = data[4]
    p = int.from_bytes(data[5:9], "little")
    width = data[9]
    scale_len = int.from_bytes(data[10:14], "little")
    pos = 14
    num, den = data[pos:pos + scale_len].decode().split("/")
    scale = Fraction(int(num), int(den))
    pos += scale_len
    if p != params.p:
        raise InvalidParams(f"ring degree mismatch: {p} != {params.p}")
    mod = params.cipher_modulus
    polys = []
    for _ in range(n_polys):
        coeffs = [int.from_bytes(data[pos + i * width: pos + (i + 1) * width], "little", signed=True)
                  for i in range(p)]
        pos += p * width
        polys.append(RingPoly(np.array(coeffs, dtype=object), mod))
    return Ciphertext(tuple(polys), scale)


def spawn_rngs(seed: int, count: int) -> List[np.random.Generator]:
    """Independent deterministic streams from one master seed."""
    seq = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.PCG64(child)) for child in seq.spawn(count)]
