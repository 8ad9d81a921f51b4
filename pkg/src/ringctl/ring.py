"""Exact arithmetic in Z_m and in the negacyclic polynomial ring Z_m[X]/(X^p + 1).

Coefficients are kept in the centered residue set [-m/2, m/2).  Multiplication
runs through a number-theoretic transform whenever the modulus admits a
primitive 2p-th root of unity, and falls back to schoolbook negacyclic
convolution otherwise; both paths produce identical output.

A ring element may internally cache its evaluation at the points
zeta^(2i-1), i = 1..p (the same points the unpacking map uses).  Products and
sums of transformed elements stay in that representation until coefficients
are requested, which keeps long ciphertext pipelines at one forward and one
inverse transform per encrypt/decrypt rather than per multiplication.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ModulusMismatch, NoRoot

# Moduli below this bound run their transforms on int64 lanes; products of two
# centered residues then stay under 2^62.
_INT64_SAFE = 1 << 31

# Candidate budget for the smallest-root scan before switching to the
# generator-power construction (which is still deterministic).
_ROOT_SCAN_BUDGET = 1_000_000


def centered_mod(z: int, m: int) -> int:
    """Reduce z to the centered residue set [-m/2, m/2)."""
    if m < 1:
        raise ValueError("modulus must be positive")
    return ((z + m // 2) % m) - m // 2


def _centered_arr(a: np.ndarray, m: int) -> np.ndarray:
    """Vectorized centered reduction for object arrays."""
    half = m // 2
    return ((a + half) % m) - half


def is_probable_prime(n: int, rounds: int = 32) -> bool:
    """Miller-Rabin test; deterministic below 3.3e24 via fixed SPRP bases."""
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
    for sp in small:
        if n % sp == 0:
            return n == sp
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1

    def witness(a: int) -> bool:
        x = pow(a, d, n)
        if x in (1, n - 1):
            return False
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                return False
        return True

    for a in small:
        if witness(a):
            return False
    if n < 3317044064679887385961981:
        return True
    # beyond the deterministic range, add fixed pseudo-random witnesses
    x = 0x9E3779B97F4A7C15
    for _ in range(rounds):
        x = (x * 6364136223846793005 + 1442695040888963407) % (1 << 64)
        if witness(2 + x % (n - 3)):
            return False
    return True


def _pollard_rho(n: int) -> int:
    """Return a non-trivial factor of composite odd n (Brent's cycle variant)."""
    if n % 2 == 0:
        return 2
    seed = 1
    while True:
        seed += 1
        y, c, m = seed, seed + 1, 128
        g, r, q = 1, 1, 1
        x = ys = y
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = _gcd(q, n)
                k += m
            r *= 2
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = _gcd(abs(x - ys), n)
        if g != n:
            return g


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def _factorize(n: int) -> dict:
    """Full factorization (adequate for ciphertext-modulus sizes)."""
    factors: dict = {}
    stack = [n]
    while stack:
        v = stack.pop()
        if v == 1:
            continue
        if is_probable_prime(v):
            factors[v] = factors.get(v, 0) + 1
            continue
        for sp in (2, 3, 5, 7, 11, 13):
            if v % sp == 0:
                factors[sp] = factors.get(sp, 0) + 1
                stack.append(v // sp)
                break
        else:
            f = _pollard_rho(v)
            stack.extend((f, v // f))
    return factors


def find_primitive_root(m: int, p: int) -> int:
    """Smallest primitive 2p-th root of unity modulo a prime m.

    Requires m = 1 (mod 2p).  The returned zeta satisfies zeta^(2p) = 1 and
    zeta^k != 1 for 1 <= k < 2p; for prime m this is equivalent to
    zeta^p = -1 (mod m), which is what the scan checks.  When the smallest
    root is out of reach of the scan budget (very large m), a deterministic
    generator-power root is returned instead.
    """
    if p < 1 or (p & (p - 1)) != 0:
        raise ValueError("p must be a power of two")
    if m % (2 * p) != 1:
        raise NoRoot(f"m = {m} is not 1 mod 2p = {2 * p}")
    for zeta in range(2, 2 + _ROOT_SCAN_BUDGET):
        if pow(zeta, p, m) == m - 1:
            return zeta
    return _generator_power_root(m, p)


def _generator_power_root(m: int, p: int) -> int:
    """Deterministic root for a large prime m: first c with ord(c^((m-1)/2p)) = 2p."""
    exp = (m - 1) // (2 * p)
    for c in range(2, 10_000):
        zeta = pow(c, exp, m)
        if pow(zeta, p, m) == m - 1:
            return zeta
    raise NoRoot(f"no generator-power root found for m = {m}")


def _crt_pair(r1: int, m1: int, r2: int, m2: int) -> int:
    inv = pow(m1, -1, m2)
    return (r1 + m1 * ((r2 - r1) * inv % m2)) % (m1 * m2)


def negacyclic_root(m: int, p: int) -> Optional[int]:
    """A deterministic zeta with zeta^p = -1 (mod m), or None.

    Handles composite m whose prime factorization is squarefree with every
    factor = 1 (mod 2p) (e.g. RNS-style ciphertext moduli) by combining
    per-factor roots through the CRT.
    """
    if m <= 2 or m % (2 * p) != 1:
        return None
    if is_probable_prime(m):
        try:
            return find_primitive_root(m, p)
        except NoRoot:
            return None
    factors = _factorize(m)
    if any(k > 1 for k in factors.values()):
        return None
    if any(f % (2 * p) != 1 for f in factors):
        return None
    root, mod = None, None
    for f in sorted(factors):
        rf = _generator_power_root(f, p) if f > 4 * p * _ROOT_SCAN_BUDGET else find_primitive_root(f, p)
        if root is None:
            root, mod = rf, f
        else:
            root, mod = _crt_pair(root, mod, rf, f), mod * f
    if pow(root, p, m) != m - 1:
        return None
    return root


@dataclass(frozen=True)
class Modulus:
    """A coefficient modulus m together with the ring degree p.

    ``root`` is a primitive 2p-th root of unity mod m when transforms are
    available, else None (multiplication falls back to schoolbook).
    """

    m: int
    p: int
    root: Optional[int] = None

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("modulus must be >= 2")
        if self.p < 1 or (self.p & (self.p - 1)) != 0:
            raise ValueError("ring degree p must be a power of two")
        if self.root is not None:
            if pow(self.root, 2 * self.p, self.m) != 1:
                raise ValueError("root is not a 2p-th root of unity")
            if pow(self.root, self.p, self.m) != self.m - 1:
                raise ValueError("root^p != -1; not usable for the negacyclic transform")

    @classmethod
    def with_root(cls, m: int, p: int) -> "Modulus":
        """Construct a modulus with an automatically discovered root."""
        zeta = negacyclic_root(m, p)
        if zeta is None:
            raise NoRoot(f"m = {m} admits no negacyclic transform at p = {p}")
        return cls(m, p, zeta)

    @classmethod
    def auto(cls, m: int, p: int) -> "Modulus":
        """Root when available, plain (schoolbook) modulus otherwise."""
        return cls(m, p, negacyclic_root(m, p))

    @property
    def has_root(self) -> bool:
        return self.root is not None


class _NttPlan:
    """Precomputed tables for the negacyclic transform of one Modulus."""

    def __init__(self, mod: Modulus):
        m, p, zeta = mod.m, mod.p, mod.root
        self.m, self.p = m, p
        self.int64 = m < _INT64_SAFE
        omega = zeta * zeta % m
        lg = p.bit_length() - 1
        br = np.zeros(p, dtype=np.int64)
        for i in range(p):
            r, x = 0, i
            for _ in range(lg):
                r = (r << 1) | (x & 1)
                x >>= 1
            br[i] = r
        self.bitrev = br
        self.p_inv = pow(p, -1, m)

        def powers(base: int, count: int) -> np.ndarray:
            out = np.empty(count, dtype=object)
            acc = 1
            for i in range(count):
                out[i] = acc
                acc = acc * base % m
            return out

        self.w = powers(omega, p // 2)
        self.w_inv = powers(pow(omega, -1, m), p // 2)
        self.psi = powers(zeta, p)
        # psi_inv scaled by p^{-1} so the inverse transform needs no extra pass
        self.psi_inv_scaled = powers(pow(zeta, -1, m), p) * self.p_inv % m
        if self.int64:
            self.w64 = self.w.astype(np.int64)
            self.w_inv64 = self.w_inv.astype(np.int64)
            self.psi64 = self.psi.astype(np.int64)
            self.psi_inv_scaled64 = self.psi_inv_scaled.astype(np.int64)

    def _butterflies_obj(self, x: np.ndarray, w: np.ndarray, m: int) -> np.ndarray:
        # sums stay unreduced between stages (Python ints cannot overflow);
        # only the twiddle products are reduced
        p = self.p
        x = x[self.bitrev]
        size = 1
        while size < p:
            step = (p // 2) // size
            tw = w[: size * step : step]
            x = x.reshape(-1, 2, size)
            even = x[:, 0, :].copy()
            t = (x[:, 1, :] * tw) % m
            x[:, 0, :] = even + t
            x[:, 1, :] = even - t
            x = x.reshape(-1)
            size *= 2
        return x

    def _butterflies_i64(self, x: np.ndarray, w: np.ndarray, m: int) -> np.ndarray:
        # per-stage reduction keeps every product below m^2 < 2^62
        p = self.p
        x = x[self.bitrev]
        size = 1
        while size < p:
            step = (p // 2) // size
            tw = w[: size * step : step]
            x = x.reshape(-1, 2, size)
            even = x[:, 0, :].copy()
            t = (x[:, 1, :] * tw) % m
            x[:, 0, :] = (even + t) % m
            x[:, 1, :] = (even - t) % m
            x = x.reshape(-1)
            size *= 2
        return x

    def forward(self, coeffs: np.ndarray) -> np.ndarray:
        """Evaluations at zeta^(2i-1), i = 1..p, natural order, values in [0, m)."""
        m = self.m
        if self.int64:
            x = (coeffs.astype(np.int64) % m * self.psi64) % m
            return self._butterflies_i64(x, self.w64, m).astype(object)
        x = (coeffs * self.psi) % m
        return self._butterflies_obj(x, self.w, m) % m

    def inverse(self, evals: np.ndarray) -> np.ndarray:
        """Centered coefficient array from an evaluation vector."""
        m = self.m
        if self.int64:
            x = self._butterflies_i64((evals % m).astype(np.int64), self.w_inv64, m)
            x = (x * self.psi_inv_scaled64) % m
            return _centered_arr(x.astype(object), m)
        x = self._butterflies_obj(evals % m, self.w_inv, m) % m
        return _centered_arr((x * self.psi_inv_scaled) % m, m)


_PLAN_CACHE: dict = {}


def _plan(mod: Modulus) -> _NttPlan:
    key = (mod.m, mod.p, mod.root)
    plan = _PLAN_CACHE.get(key)
    if plan is None:
        if mod.root is None:
            raise NoRoot(f"modulus {mod.m} has no transform root")
        plan = _NttPlan(mod)
        _PLAN_CACHE[key] = plan
    return plan


def _as_object_array(values: Sequence[int], p: int) -> np.ndarray:
    arr = np.empty(p, dtype=object)
    for i, v in enumerate(values):
        arr[i] = int(v)
    return arr


class RingPoly:
    """An element of Z_m[X]/(X^p + 1) with centered coefficients.

    Instances are immutable in meaning; the only internal mutation is lazy
    caching of the coefficient/evaluation representations.  Evaluation arrays
    may hold unreduced integers between operations (sums and products of
    residues); they are normalized in place the first time a reduced form is
    needed and always before coefficients are materialized.
    """

    __slots__ = ("mod", "_coeffs", "_evals", "_evals_reduced")

    def __init__(self, coeffs: Sequence[int], mod: Modulus):
        if len(coeffs) != mod.p:
            raise ValueError(f"expected {mod.p} coefficients, got {len(coeffs)}")
        arr = coeffs if isinstance(coeffs, np.ndarray) and coeffs.dtype == object else _as_object_array(coeffs, mod.p)
        self.mod = mod
        self._coeffs = _centered_arr(arr, mod.m)
        self._evals = None
        self._evals_reduced = False

    @classmethod
    def _from_evals(cls, evals: np.ndarray, mod: Modulus, reduced: bool = False) -> "RingPoly":
        obj = object.__new__(cls)
        obj.mod = mod
        obj._coeffs = None
        obj._evals = evals
        obj._evals_reduced = reduced
        return obj

    @classmethod
    def zero(cls, mod: Modulus) -> "RingPoly":
        return cls([0] * mod.p, mod)

    @classmethod
    def constant(cls, c: int, mod: Modulus) -> "RingPoly":
        poly = cls([centered_mod(c, mod.m)] + [0] * (mod.p - 1), mod)
        if mod.has_root:
            # a constant evaluates to itself everywhere
            poly._evals = np.full(mod.p, centered_mod(c, mod.m) % mod.m, dtype=object)
            poly._evals_reduced = True
        return poly

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = _plan(self.mod).inverse(self._evals)
        return self._coeffs

    def coeff_list(self) -> list:
        return [int(v) for v in self.coeffs]

    def evals(self) -> np.ndarray:
        if self._evals is None:
            self._evals = _plan(self.mod).forward(self._coeffs)
            self._evals_reduced = True
        return self._evals

    def _evals_norm(self) -> np.ndarray:
        """Evaluation array reduced to [0, m); the normalization is cached."""
        vals = self.evals()
        if not self._evals_reduced:
            vals = vals % self.mod.m
            self._evals = vals
            self._evals_reduced = True
        return vals

    def _check(self, other: "RingPoly"):
        if self.mod.m != other.mod.m or self.mod.p != other.mod.p:
            raise ModulusMismatch(f"cannot combine rings mod {self.mod.m} and {other.mod.m}")

    def __add__(self, other: "RingPoly") -> "RingPoly":
        self._check(other)
        if self._evals is not None and other._evals is not None:
            return RingPoly._from_evals(self._evals + other._evals, self.mod)
        if self._coeffs is not None and other._coeffs is not None:
            return RingPoly(self._coeffs + other._coeffs, self.mod)
        if self.mod.has_root:
            return RingPoly._from_evals(self.evals() + other.evals(), self.mod)
        return RingPoly(self.coeffs + other.coeffs, self.mod)

    def __neg__(self) -> "RingPoly":
        out = None
        if self._coeffs is not None:
            out = RingPoly(-self._coeffs, self.mod)
        if self._evals is not None:
            if out is None:
                return RingPoly._from_evals(-self._evals, self.mod)
            out._evals = -self._evals
            out._evals_reduced = False
        return out

    def __sub__(self, other: "RingPoly") -> "RingPoly":
        return self + (-other)

    def scalar_mul(self, k: int) -> "RingPoly":
        out = None
        if self._coeffs is not None:
            out = RingPoly(_centered_arr(self._coeffs * k, self.mod.m), self.mod)
        if self._evals is not None:
            if out is None:
                return RingPoly._from_evals(self._evals * k, self.mod)
            out._evals = self._evals * k
            out._evals_reduced = False
        return out

    def __mul__(self, other: "RingPoly") -> "RingPoly":
        self._check(other)
        if self.mod.has_root:
            return RingPoly._from_evals(self._evals_norm() * other._evals_norm(), self.mod)
        return RingPoly(_schoolbook(self.coeffs, other.coeffs, self.mod.m), self.mod)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RingPoly):
            return NotImplemented
        return (
            self.mod.m == other.mod.m
            and self.mod.p == other.mod.p
            and all(int(a) == int(b) for a, b in zip(self.coeffs, other.coeffs))
        )

    def __hash__(self):
        return hash((self.mod.m, self.mod.p, tuple(self.coeff_list())))

    def __repr__(self):
        return f"RingPoly(p={self.mod.p}, m={self.mod.m}, coeffs={self.coeff_list()!r})"


def _schoolbook(a: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    p = len(a)
    out = np.zeros(p, dtype=object)
    for i in range(p):
        ai = int(a[i])
        if ai == 0:
            continue
        for j in range(p):
            k = i + j
            term = ai * int(b[j])
            if k >= p:
                out[k - p] -= term
            else:
                out[k] += term
    return _centered_arr(out, m)


def schoolbook_negacyclic(a: RingPoly, b: RingPoly) -> RingPoly:
    """Reference negacyclic product, independent of the transform path."""
    if a.mod.m != b.mod.m or a.mod.p != b.mod.p:
        raise ModulusMismatch("operands live in different rings")
    return RingPoly(_schoolbook(a.coeffs, b.coeffs, a.mod.m), a.mod)


def poly_add(a: RingPoly, b: RingPoly) -> RingPoly:
    """Coefficient-wise centered sum."""
    return a + b


def poly_mul(a: RingPoly, b: RingPoly) -> RingPoly:
    """Negacyclic product mod (X^p + 1, m); NTT when available, else schoolbook."""
    return a * b


def ntt_forward(a: RingPoly) -> list:
    """Evaluate a at zeta^(2i-1) for i = 1..p (the unpacking points), centered."""
    vals = _plan(a.mod).forward(a.coeffs)
    m = a.mod.m
    return [centered_mod(int(v), m) for v in vals]


def ntt_inverse(values: Sequence[int], mod: Modulus) -> RingPoly:
    """Interpolate the polynomial taking the given values at zeta^(2i-1)."""
    if len(values) != mod.p:
        raise ValueError(f"expected {mod.p} values")
    arr = _as_object_array(values, mod.p) % mod.m
    return RingPoly(_plan(mod).inverse(arr), mod)


def uniform_poly(mod: Modulus, rng: np.random.Generator, eval_domain: bool = False) -> RingPoly:
    """Uniform element of the ring, sampled componentwise.

    With ``eval_domain`` the p uniform residues are taken as the element's
    transform values; the transform is a bijection of the ring onto Z_m^p, so
    the distribution is identical and no forward pass is spent.
    """
    vals = _uniform_residues(mod.m, mod.p, rng)
    if eval_domain:
        return RingPoly._from_evals(vals, mod)
    return RingPoly(_centered_arr(vals, mod.m), mod)


def _uniform_residues(m: int, size: int, rng: np.random.Generator) -> np.ndarray:
    bits = m.bit_length()
    words = (bits + 63) // 64
    excess = words * 64 - bits
    out = np.zeros(size, dtype=object)
    pending = np.arange(size)
    while pending.size:
        vals = np.zeros(pending.size, dtype=object)
        for _ in range(words):
            draw = rng.integers(0, 2**64, pending.size, dtype=np.uint64).astype(object)
            vals = (vals << 64) | draw
        vals >>= excess
        ok = vals < m
        out[pending[ok]] = vals[ok]
        pending = pending[~ok]
    return out


def gaussian_int_array(sigma: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Rounded zero-mean Gaussian integers via Box-Muller (int64 range)."""
    if sigma == 0:
        return np.zeros(size, dtype=np.int64)
    pairs = (size + 1) // 2
    u1 = rng.random(pairs)
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    angle = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:size]
    return np.floor(sigma * z + 0.5).astype(np.int64)


def gaussian_poly(mod: Modulus, sigma: float, rng: np.random.Generator) -> RingPoly:
    """Ring element with coefficients from the rounded Gaussian N(0, sigma)."""
    return RingPoly(gaussian_int_array(sigma, mod.p, rng).astype(object), mod)
