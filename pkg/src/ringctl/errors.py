"""Exception taxonomy shared across the toolkit."""


class RingctlError(Exception):
    """Base class for all errors raised by this package."""


class NoRoot(RingctlError):
    """The modulus admits no primitive 2p-th root of unity."""


class ModulusMismatch(RingctlError):
    """Ring elements from incompatible rings were combined."""


class LengthMismatch(RingctlError):
    """Vector/ciphertext lengths are incompatible."""


class ScaleMismatch(RingctlError):
    """Ciphertexts with different scales were added."""


class TooManyTerms(RingctlError):
    """A homomorphic linear combination exceeds the supported length."""


class InvalidParams(RingctlError):
    """Encryption parameters violate a structural requirement."""


class RangeExceeded(RingctlError):
    """A quantized value left the plaintext range (modular wraparound)."""

    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.step = step


class NotObservable(RingctlError):
    """The (F, H) pair fails the observability rank test."""


class NotControllable(RingctlError):
    """The (F, G) pair fails the controllability rank test."""


class DimMismatch(RingctlError):
    """Matrix dimensions are inconsistent."""


class Unstable(RingctlError):
    """A closed-loop system is not Schur stable (or a simulation diverged)."""


class SInvalid(RingctlError):
    """The gain resolution s violates 1/s > eps0, so the error bound is undefined."""


class ConfigError(RingctlError):
    """A run configuration failed schema or consistency validation."""
